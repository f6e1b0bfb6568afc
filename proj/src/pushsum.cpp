#include "cps/pushsum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "cps/error.hpp"

namespace cps {

void validate(const ProtocolParams& params, std::size_t min_agents) {
  if (params.n < min_agents) {
    throw Error(ErrorKind::configuration,
                fmt::format("need at least {} agents, got {}", min_agents, params.n));
  }
  if (!std::isfinite(params.a) || !std::isfinite(params.b) || !(params.a < params.b)) {
    throw Error(ErrorKind::configuration,
                fmt::format("bounds must satisfy a < b, got a={} b={}", params.a, params.b));
  }
  if (!(params.epsilon > 0.0 && params.epsilon < 1.0)) {
    throw Error(ErrorKind::configuration,
                fmt::format("epsilon must be in (0, 1), got {}", params.epsilon));
  }
}

void check_feasible(const ProtocolParams& params, std::size_t max_out_degree) {
  if (!(static_cast<double>(max_out_degree + 1) * params.epsilon < 1.0)) {
    throw Error(ErrorKind::configuration,
                fmt::format("epsilon {} infeasible for out-degree {}: need epsilon < 1/{}",
                            params.epsilon, max_out_degree, max_out_degree + 1));
  }
}

double WeightVector::at(AgentId recipient) const {
  auto it = std::lower_bound(
      entries.begin(), entries.end(), recipient,
      [](const WeightEntry& e, AgentId id) { return e.recipient < id; });
  if (it == entries.end() || it->recipient != recipient) return 0.0;
  return it->p;
}

double WeightVector::sum() const {
  double total = 0.0;
  for (const auto& e : entries) total += e.p;
  return total;
}

double frac(double x) {
  if (!std::isfinite(x)) {
    throw Error(ErrorKind::domain, "frac of a non-finite value");
  }
  const double r = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1.
  return r < 1.0 ? r : 0.0;
}

double encode_initial(double x0, const ProtocolParams& params) {
  if (!(x0 >= params.a && x0 <= params.b)) {
    throw Error(ErrorKind::out_of_range,
                fmt::format("initial value {} outside [{}, {}]", x0, params.a, params.b));
  }
  const auto n = static_cast<double>(params.n);
  return 1.0 / (n * n) + (n - 2.0) * (x0 - params.a) / ((params.b - params.a) * n * n);
}

double decode_estimate(double s, double w, const ProtocolParams& params) {
  if (!(w > 0.0) || !std::isfinite(w)) {
    throw Error(ErrorKind::domain, fmt::format("decode needs w > 0, got {}", w));
  }
  const auto n = static_cast<double>(params.n);
  return (params.b - params.a) / (n - 2.0) * (n * frac(n * s / w) - 1.0) + params.a;
}

WeightVector gen_weights(RandomStream& rng, AgentId self,
                         std::span<const AgentId> out_neighbors, double epsilon) {
  const std::size_t count = out_neighbors.size() + 1;
  if (!(epsilon > 0.0) || !(static_cast<double>(count) * epsilon < 1.0)) {
    throw Error(ErrorKind::configuration,
                fmt::format("epsilon {} infeasible for {} recipients", epsilon, count));
  }
  WeightVector wv;
  wv.owner = self;
  wv.entries.reserve(count);
  if (count == 1) {
    wv.entries.push_back({self, 1.0});
    return wv;
  }

  std::vector<double> u(count);
  for (auto& v : u) v = rng.uniform_open01();
  const double total = std::accumulate(u.begin(), u.end(), 0.0);
  const double spread = 1.0 - static_cast<double>(count) * epsilon;

  wv.entries.push_back({self, epsilon + spread * u[0] / total});
  for (std::size_t m = 0; m < out_neighbors.size(); ++m) {
    wv.entries.push_back({out_neighbors[m], epsilon + spread * u[m + 1] / total});
  }
  std::sort(wv.entries.begin(), wv.entries.end(),
            [](const WeightEntry& l, const WeightEntry& r) { return l.recipient < r.recipient; });
  return wv;
}

namespace {

Outgoing split_weighted(const AgentState& state, std::span<const AgentId> out_neighbors,
                        Round k, WeightVector weights) {
  Outgoing out;
  out.messages.reserve(out_neighbors.size());
  for (AgentId j : out_neighbors) {
    const double p = weights.at(j);
    out.messages.push_back({state.agent_id, j, p * state.s, p * state.w, k});
  }
  const double p_self = weights.self_weight();
  out.self_delta_s = p_self * state.s;
  out.self_delta_w = p_self * state.w;
  out.weights = std::move(weights);
  return out;
}

// Adds the inbox and the self share in ascending sender order.
std::pair<double, double> accumulate_inbox(AgentId self, std::span<const RoundMessage> inbox,
                                           double self_delta_s, double self_delta_w) {
  std::vector<const RoundMessage*> ordered;
  ordered.reserve(inbox.size());
  for (const auto& m : inbox) ordered.push_back(&m);
  if (!std::is_sorted(ordered.begin(), ordered.end(),
                      [](auto* l, auto* r) { return l->sender < r->sender; })) {
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](auto* l, auto* r) { return l->sender < r->sender; });
  }
  double s = 0.0;
  double w = 0.0;
  bool self_added = false;
  for (const auto* m : ordered) {
    if (!self_added && m->sender > self) {
      s += self_delta_s;
      w += self_delta_w;
      self_added = true;
    }
    s += m->delta_s;
    w += m->delta_w;
  }
  if (!self_added) {
    s += self_delta_s;
    w += self_delta_w;
  }
  return {s, w};
}

}  // namespace

Outgoing make_outgoing_confidential(const AgentState& state,
                                    std::span<const AgentId> out_neighbors, Round k,
                                    const ProtocolParams& params, RandomStream& rng) {
  WeightVector weights = gen_weights(rng, state.agent_id, out_neighbors, params.epsilon);
  if (k > params.big_k) {
    return split_weighted(state, out_neighbors, k, std::move(weights));
  }

  Outgoing out;
  out.messages.reserve(out_neighbors.size());
  double sent = 0.0;
  for (AgentId j : out_neighbors) {
    const double ds = rng.uniform01();
    sent += ds;
    out.messages.push_back({state.agent_id, j, ds, weights.at(j) * state.w, k});
  }
  out.self_delta_s = frac(state.s - sent);
  out.self_delta_w = weights.self_weight() * state.w;
  out.weights = std::move(weights);
  return out;
}

AgentState apply_incoming_confidential(const AgentState& state,
                                       std::span<const RoundMessage> inbox,
                                       double self_delta_s, double self_delta_w, Round k,
                                       const ProtocolParams& params) {
  auto [s, w] = accumulate_inbox(state.agent_id, inbox, self_delta_s, self_delta_w);
  return {state.agent_id, k <= params.big_k ? frac(s) : s, w};
}

Outgoing make_outgoing_conventional(const AgentState& state,
                                    std::span<const AgentId> out_neighbors, Round k,
                                    double epsilon, RandomStream& rng) {
  return split_weighted(state, out_neighbors, k,
                        gen_weights(rng, state.agent_id, out_neighbors, epsilon));
}

AgentState apply_incoming_conventional(const AgentState& state,
                                       std::span<const RoundMessage> inbox,
                                       double self_delta_s, double self_delta_w) {
  auto [s, w] = accumulate_inbox(state.agent_id, inbox, self_delta_s, self_delta_w);
  return {state.agent_id, s, w};
}

std::vector<AgentState> conventional_step(std::span<const AgentState> states,
                                          const Eigen::MatrixXd& weight_matrix,
                                          const EdgeSet& edges) {
  const auto n = static_cast<Eigen::Index>(states.size());
  if (weight_matrix.rows() != n || weight_matrix.cols() != n) {
    throw Error(ErrorKind::validation,
                fmt::format("weight matrix is {}x{}, expected {}x{}", weight_matrix.rows(),
                            weight_matrix.cols(), n, n));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double col = weight_matrix.col(j).sum();
    if (std::abs(col - 1.0) > 1e-12) {
      throw Error(ErrorKind::validation,
                  fmt::format("column {} sums to {}, not 1", j + 1, col));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = weight_matrix(i, j);
      if (p < 0.0) {
        throw Error(ErrorKind::validation, fmt::format("negative entry at ({}, {})", i + 1, j + 1));
      }
      if (p != 0.0 && i != j &&
          !edges.contains({static_cast<AgentId>(i + 1), static_cast<AgentId>(j + 1)})) {
        throw Error(ErrorKind::validation,
                    fmt::format("entry ({}, {}) is not an edge of this round", i + 1, j + 1));
      }
    }
  }

  Eigen::VectorXd s(n);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i) = states[static_cast<std::size_t>(i)].s;
    w(i) = states[static_cast<std::size_t>(i)].w;
  }
  const Eigen::VectorXd s_next = weight_matrix * s;
  const Eigen::VectorXd w_next = weight_matrix * w;

  std::vector<AgentState> next(states.begin(), states.end());
  for (Eigen::Index i = 0; i < n; ++i) {
    next[static_cast<std::size_t>(i)].s = s_next(i);
    next[static_cast<std::size_t>(i)].w = w_next(i);
  }
  return next;
}

}  // namespace cps
