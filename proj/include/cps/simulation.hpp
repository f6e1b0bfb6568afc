#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "cps/graph_schedule.hpp"
#include "cps/pushsum.hpp"

namespace cps {

enum class Algorithm { conventional, confidential };
enum class RecordMode { full, states_only };

std::string_view to_string(Algorithm algorithm);
std::string_view to_string(RecordMode mode);
Algorithm parse_algorithm(std::string_view text);
RecordMode parse_record_mode(std::string_view text);

// Initial values drawn per agent from a seeded stream.
struct UniformInitialValues {
  double low = -50.0;
  double high = 50.0;
};

using InitialValues = std::variant<std::vector<double>, UniformInitialValues>;

struct ScenarioConfig {
  ProtocolParams params;
  std::shared_ptr<const GraphSchedule> schedule;
  Round horizon = 200;
  std::uint64_t seed = 1;
  InitialValues initial_values = UniformInitialValues{};
  Algorithm algorithm = Algorithm::confidential;
  std::vector<AgentId> adversaries;
  // Stop once e(k) drops below this; 0 disables early stopping.
  double stop_tolerance = 0.0;
  // Unset means full for N <= 50 and states-only above.
  std::optional<RecordMode> record;
  bool override_assumptions = false;
};

// Checks the config invariants; throws configuration/out-of-range errors.
void validate(const ScenarioConfig& config);

RecordMode resolve_record_mode(const ScenarioConfig& config);

// Explicit values are returned as-is. Uniform values are drawn from the open
// interval (low + d, high - d), d = 1e-9 (high - low), clipped to [a, b].
std::vector<double> resolve_initial_values(const ScenarioConfig& config);

struct RoundRecord {
  Round round = 0;
  // Sorted by (sender, receiver). Empty in states-only mode.
  std::vector<RoundMessage> messages;
  // One per agent, indexed by id - 1. Empty in states-only mode.
  std::vector<WeightVector> weights;
  // States at round + 1.
  std::vector<AgentState> states_after;
};

struct Transcript {
  ScenarioConfig config;
  RecordMode record = RecordMode::full;
  std::vector<double> initial_values;
  double ground_truth_mean = 0.0;
  std::vector<AgentState> initial_states;
  std::vector<RoundRecord> rounds;
  // errors[k] = e(k) for k = 0..rounds.size().
  std::vector<double> errors;
  // Interval bound T of the schedule, when it exists and the recurring
  // edge set is strongly connected.
  std::optional<unsigned> interval_bound;

  std::size_t n_agents() const { return initial_states.size(); }
  std::size_t n_rounds() const { return rounds.size(); }

  // States at round k (k = 0 is the initial state).
  const std::vector<AgentState>& states_at(Round k) const;
  std::vector<double> estimates_at(Round k) const;
  // Column-stochastic P(k) assembled from every agent's weight vector.
  Eigen::MatrixXd realized_weight_matrix(Round k) const;
};

// pi for one agent under the transcript's algorithm.
double estimate(const AgentState& state, Algorithm algorithm, const ProtocolParams& params);

// Synchronous execution of rounds 0..horizon-1 (or until early stop). Throws
// on invalid config, failed assumption checks (unless overridden), or an
// invariant audit violation.
Transcript run(const ScenarioConfig& config);

// Runs trials with seeds seed + t * seed_stride, spread over worker threads.
std::vector<Transcript> run_trials(const ScenarioConfig& config, std::size_t trials,
                                   std::uint64_t seed_stride = 1);

}  // namespace cps
