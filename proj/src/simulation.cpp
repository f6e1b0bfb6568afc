#include "cps/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/core.h>

#include "cps/error.hpp"
#include "cps/metrics.hpp"
#include "cps/random_stream.hpp"

namespace cps {

std::string_view to_string(Algorithm algorithm) {
  return algorithm == Algorithm::conventional ? "conventional" : "confidential";
}

std::string_view to_string(RecordMode mode) {
  return mode == RecordMode::full ? "full" : "states-only";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "conventional") return Algorithm::conventional;
  if (text == "confidential") return Algorithm::confidential;
  throw Error(ErrorKind::configuration, fmt::format("unknown algorithm '{}'", text));
}

RecordMode parse_record_mode(std::string_view text) {
  if (text == "full") return RecordMode::full;
  if (text == "states-only") return RecordMode::states_only;
  throw Error(ErrorKind::configuration, fmt::format("unknown record mode '{}'", text));
}

void validate(const ScenarioConfig& config) {
  validate(config.params, config.algorithm == Algorithm::conventional ? 2 : 3);
  if (!config.schedule) {
    throw Error(ErrorKind::configuration, "scenario has no schedule");
  }
  if (config.schedule->n_agents() != config.params.n) {
    throw Error(ErrorKind::configuration,
                fmt::format("schedule has {} agents but params say {}",
                            config.schedule->n_agents(), config.params.n));
  }
  check_feasible(config.params, config.schedule->max_out_degree());

  const auto& p = config.params;
  if (const auto* values = std::get_if<std::vector<double>>(&config.initial_values)) {
    if (values->size() != p.n) {
      throw Error(ErrorKind::configuration,
                  fmt::format("{} initial values for {} agents", values->size(), p.n));
    }
    for (std::size_t i = 0; i < values->size(); ++i) {
      const double x = (*values)[i];
      if (!(x >= p.a && x <= p.b)) {
        throw Error(ErrorKind::out_of_range,
                    fmt::format("initial value of agent {} = {} outside [{}, {}]", i + 1, x,
                                p.a, p.b));
      }
    }
  } else {
    const auto& range = std::get<UniformInitialValues>(config.initial_values);
    if (!(range.low >= p.a && range.high <= p.b && range.low < range.high)) {
      throw Error(ErrorKind::out_of_range,
                  fmt::format("initial range ({}, {}) not inside [{}, {}]", range.low,
                              range.high, p.a, p.b));
    }
  }
  for (AgentId id : config.adversaries) {
    if (id < 1 || id > p.n) {
      throw Error(ErrorKind::configuration, fmt::format("adversary {} outside 1..{}", id, p.n));
    }
  }
  if (!(config.stop_tolerance >= 0.0)) {
    throw Error(ErrorKind::configuration, "stop tolerance must be >= 0");
  }
}

RecordMode resolve_record_mode(const ScenarioConfig& config) {
  if (config.record) return *config.record;
  return config.params.n <= 50 ? RecordMode::full : RecordMode::states_only;
}

std::vector<double> resolve_initial_values(const ScenarioConfig& config) {
  if (const auto* values = std::get_if<std::vector<double>>(&config.initial_values)) {
    return *values;
  }
  const auto& range = std::get<UniformInitialValues>(config.initial_values);
  const double margin = 1e-9 * (range.high - range.low);
  const double low = range.low + margin;
  const double width = (range.high - margin) - low;
  std::vector<double> x(config.params.n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    RandomStream rng(config.seed, i + 1, RandomStream::kInitialValuesRound);
    x[i] = std::clamp(low + width * rng.uniform_open01(), config.params.a, config.params.b);
  }
  return x;
}

const std::vector<AgentState>& Transcript::states_at(Round k) const {
  if (k == 0) return initial_states;
  if (k > rounds.size()) {
    throw Error(ErrorKind::invalid_query,
                fmt::format("round {} beyond transcript length {}", k, rounds.size()));
  }
  return rounds[k - 1].states_after;
}

std::vector<double> Transcript::estimates_at(Round k) const {
  const auto& states = states_at(k);
  std::vector<double> pi(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    pi[i] = estimate(states[i], config.algorithm, config.params);
  }
  return pi;
}

Eigen::MatrixXd Transcript::realized_weight_matrix(Round k) const {
  if (record != RecordMode::full) {
    throw Error(ErrorKind::insufficient_record, "weight matrices need a full record");
  }
  if (k >= rounds.size()) {
    throw Error(ErrorKind::invalid_query, fmt::format("no round {} in transcript", k));
  }
  const auto n = static_cast<Eigen::Index>(n_agents());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (const auto& wv : rounds[k].weights) {
    for (const auto& e : wv.entries) p(e.recipient - 1, wv.owner - 1) = e.p;
  }
  return p;
}

double estimate(const AgentState& state, Algorithm algorithm, const ProtocolParams& params) {
  if (algorithm == Algorithm::confidential) return decode_estimate(state.s, state.w, params);
  return state.s / state.w;
}

Transcript run(const ScenarioConfig& config) {
  validate(config);
  const auto& params = config.params;
  const auto& schedule = *config.schedule;

  Transcript t;
  t.config = config;
  t.record = resolve_record_mode(config);

  const AssumptionReport assumptions = verify_assumptions(schedule);
  // The weight floor and the rate bound only hold under both assumptions.
  if (assumptions.strongly_connected) t.interval_bound = assumptions.interval_bound;
  if (!config.override_assumptions) {
    if (!assumptions.strongly_connected) {
      throw Error(ErrorKind::assumption,
                  "recurring edge set is not strongly connected (pass the override to run anyway)");
    }
    if (!assumptions.interval_bound) {
      throw Error(ErrorKind::assumption, "schedule has no intercommunication interval bound");
    }
  }

  t.initial_values = resolve_initial_values(config);
  t.ground_truth_mean =
      std::accumulate(t.initial_values.begin(), t.initial_values.end(), 0.0) /
      static_cast<double>(params.n);

  t.initial_states.resize(params.n);
  for (std::size_t i = 0; i < params.n; ++i) {
    const double x = t.initial_values[i];
    t.initial_states[i] = {static_cast<AgentId>(i + 1),
                           config.algorithm == Algorithm::confidential
                               ? encode_initial(x, params)
                               : x,
                           1.0};
  }
  t.errors.push_back(error_norm(t.estimates_at(0), t.ground_truth_mean));

  const bool full = t.record == RecordMode::full;
  std::vector<AgentState> states = t.initial_states;
  std::vector<Outgoing> outgoing(params.n);
  std::vector<std::vector<RoundMessage>> inboxes(params.n);
  std::vector<double> pi(params.n);
  t.rounds.reserve(config.horizon);

  for (Round k = 0; k < config.horizon; ++k) {
    const EdgeSet& edges = schedule.edges_at(k);
    for (auto& inbox : inboxes) inbox.clear();

    for (std::size_t i = 0; i < params.n; ++i) {
      const auto id = static_cast<AgentId>(i + 1);
      RandomStream rng(config.seed, id, k);
      outgoing[i] = config.algorithm == Algorithm::confidential
                        ? make_outgoing_confidential(states[i], edges.out_neighbors(id), k,
                                                     params, rng)
                        : make_outgoing_conventional(states[i], edges.out_neighbors(id), k,
                                                     params.epsilon, rng);
      for (const auto& m : outgoing[i].messages) inboxes[m.receiver - 1].push_back(m);
    }

    RoundRecord record;
    record.round = k;
    record.states_after.resize(params.n);
    for (std::size_t i = 0; i < params.n; ++i) {
      const auto& out = outgoing[i];
      record.states_after[i] =
          config.algorithm == Algorithm::confidential
              ? apply_incoming_confidential(states[i], inboxes[i], out.self_delta_s,
                                            out.self_delta_w, k, params)
              : apply_incoming_conventional(states[i], inboxes[i], out.self_delta_s,
                                            out.self_delta_w);
    }
    if (full) {
      record.weights.reserve(params.n);
      for (auto& out : outgoing) {
        record.messages.insert(record.messages.end(), out.messages.begin(),
                               out.messages.end());
        record.weights.push_back(std::move(out.weights));
      }
    }
    states = record.states_after;
    for (std::size_t i = 0; i < params.n; ++i) {
      pi[i] = estimate(states[i], config.algorithm, params);
    }
    const double e = error_norm(pi, t.ground_truth_mean);
    t.rounds.push_back(std::move(record));
    t.errors.push_back(e);
    if (config.stop_tolerance > 0.0 && e < config.stop_tolerance) break;
  }

  const auto violations = audit_transcript(t);
  if (!violations.empty()) {
    std::string detail;
    for (std::size_t v = 0; v < std::min<std::size_t>(violations.size(), 3); ++v) {
      detail += "\n  " + violations[v].describe();
    }
    throw Error(ErrorKind::validation,
                fmt::format("{} invariant violation(s) after run:{}", violations.size(), detail));
  }
  return t;
}

std::vector<Transcript> run_trials(const ScenarioConfig& config, std::size_t trials,
                                   std::uint64_t seed_stride) {
  if (trials == 0) {
    throw Error(ErrorKind::configuration, "need at least one trial");
  }
  std::vector<Transcript> out(trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) {
      try {
        ScenarioConfig c = config;
        c.seed = config.seed + t * seed_stride;
        out[t] = run(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(trials, std::max(1U, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace cps
