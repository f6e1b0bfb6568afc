#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cps/graph_schedule.hpp"
#include "cps/random_stream.hpp"

namespace cps {

struct ProtocolParams {
  std::size_t n = 5;
  double a = -50.0;
  double b = 50.0;
  double epsilon = 0.05;
  // Randomization horizon: rounds 0..big_k send uniform mass shares.
  Round big_k = 10;
};

// Throws configuration error unless n >= min_agents, a < b (both finite)
// and epsilon in (0, 1). Decoding divides by N - 2, so the confidential
// protocol needs three agents; plain push-sum runs with two.
void validate(const ProtocolParams& params, std::size_t min_agents = 3);

// Throws configuration error unless (max_out_degree + 1) * epsilon < 1.
void check_feasible(const ProtocolParams& params, std::size_t max_out_degree);

struct AgentState {
  AgentId agent_id = 0;
  double s = 0.0;
  double w = 1.0;

  bool operator==(const AgentState&) const = default;
};

struct WeightEntry {
  AgentId recipient = 0;
  double p = 0.0;

  bool operator==(const WeightEntry&) const = default;
};

// Outgoing split of one agent for one round: one column of P(k). Entries are
// sorted by recipient and include the owner itself.
struct WeightVector {
  AgentId owner = 0;
  std::vector<WeightEntry> entries;

  double at(AgentId recipient) const;
  double self_weight() const { return at(owner); }
  double sum() const;

  bool operator==(const WeightVector&) const = default;
};

struct RoundMessage {
  AgentId sender = 0;
  AgentId receiver = 0;
  double delta_s = 0.0;
  double delta_w = 0.0;
  Round round = 0;

  bool operator==(const RoundMessage&) const = default;
};

// Everything an agent emits in one round. The self share never leaves the
// agent and is not part of `messages`.
struct Outgoing {
  std::vector<RoundMessage> messages;
  double self_delta_s = 0.0;
  double self_delta_w = 0.0;
  WeightVector weights;
};

// Fractional part x - floor(x), always in [0, 1). Throws domain error on a
// non-finite argument.
double frac(double x);

// Maps x0 in [a, b] to s(0) in [1/N^2, (N-1)/N^2].
double encode_initial(double x0, const ProtocolParams& params);

// (b-a)/(N-2) * (N * frac(N s / w) - 1) + a.
double decode_estimate(double s, double w, const ProtocolParams& params);

// Random split over {self} plus the out-neighbors: each p in (epsilon, 1),
// summing to one. Draws one uniform per recipient, self first and then the
// neighbors in ascending order.
WeightVector gen_weights(RandomStream& rng, AgentId self,
                         std::span<const AgentId> out_neighbors, double epsilon);

Outgoing make_outgoing_confidential(const AgentState& state,
                                    std::span<const AgentId> out_neighbors, Round k,
                                    const ProtocolParams& params, RandomStream& rng);

// Sums the inbox (plus the retained self share) in ascending sender order;
// for k <= K the sum is wrapped with frac once.
AgentState apply_incoming_confidential(const AgentState& state,
                                       std::span<const RoundMessage> inbox,
                                       double self_delta_s, double self_delta_w, Round k,
                                       const ProtocolParams& params);

// Conventional push-sum with the same random weight sampler:
// every share is p * s and p * w.
Outgoing make_outgoing_conventional(const AgentState& state,
                                    std::span<const AgentId> out_neighbors, Round k,
                                    double epsilon, RandomStream& rng);

AgentState apply_incoming_conventional(const AgentState& state,
                                       std::span<const RoundMessage> inbox,
                                       double self_delta_s, double self_delta_w);

// Matrix form s(k+1) = P s(k), w(k+1) = P w(k). P must be column-stochastic
// within 1e-12 and supported on the edges plus the diagonal.
std::vector<AgentState> conventional_step(std::span<const AgentState> states,
                                          const Eigen::MatrixXd& weight_matrix,
                                          const EdgeSet& edges);

}  // namespace cps
