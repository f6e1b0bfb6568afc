#include "cps/adversary.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/core.h>

#include "cps/error.hpp"
#include "cps/ks_test.hpp"

namespace cps {

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::protected_target: return "protected";
    case Verdict::vulnerable: return "vulnerable";
    case Verdict::unknown: return "unknown";
  }
  return "unknown";
}

bool AdversaryView::is_adversary(AgentId id) const {
  return std::binary_search(adversaries.begin(), adversaries.end(), id);
}

namespace {

std::vector<AgentId> sorted_set(std::span<const AgentId> ids) {
  std::vector<AgentId> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// In- and out-neighbors of `target` at round k, ascending, deduplicated.
std::vector<AgentId> neighbors_at(const GraphSchedule& schedule, AgentId target, Round k) {
  const EdgeSet& edges = schedule.edges_at(k);
  std::vector<AgentId> out;
  auto in = edges.in_neighbors(target);
  auto outs = edges.out_neighbors(target);
  std::set_union(in.begin(), in.end(), outs.begin(), outs.end(), std::back_inserter(out));
  return out;
}

void check_agent(AgentId id, std::size_t n, std::string_view role) {
  if (id < 1 || id > n) {
    throw Error(ErrorKind::invalid_query, fmt::format("{} {} outside 1..{}", role, id, n));
  }
}

// Rounds 0..last_distinct-1 realise every distinct edge set of the schedule.
Round distinct_rounds(const GraphSchedule& schedule) {
  return schedule.prefix_length() + schedule.period();
}

}  // namespace

PrivacyVerdict privacy_condition(const GraphSchedule& schedule,
                                 std::span<const AgentId> adversaries, AgentId target,
                                 const ProtocolParams& params) {
  check_agent(target, schedule.n_agents(), "target");
  const auto adv = sorted_set(adversaries);
  if (std::binary_search(adv.begin(), adv.end(), target)) {
    throw Error(ErrorKind::invalid_query,
                fmt::format("target {} is itself an adversary", target));
  }
  auto honest = [&](AgentId l) { return !std::binary_search(adv.begin(), adv.end(), l); };

  PrivacyVerdict verdict;
  verdict.target = target;

  // Rounds past prefix + period repeat earlier edge sets, so the scans stop
  // there without losing anything.
  const Round horizon = distinct_rounds(schedule);
  const Round protect_end = std::min<Round>(params.big_k, horizon - 1);
  for (Round k = 0; k <= protect_end; ++k) {
    for (AgentId l : neighbors_at(schedule, target, k)) {
      if (honest(l)) {
        verdict.verdict = Verdict::protected_target;
        verdict.witness = std::make_pair(l, k);
        return verdict;
      }
    }
  }
  for (Round k = 0; k < horizon; ++k) {
    for (AgentId l : neighbors_at(schedule, target, k)) {
      if (honest(l)) {
        verdict.verdict = Verdict::unknown;
        return verdict;
      }
    }
  }
  verdict.verdict = Verdict::vulnerable;
  return verdict;
}

AdversaryView observe(const Transcript& transcript, std::span<const AgentId> adversaries) {
  if (transcript.record != RecordMode::full) {
    throw Error(ErrorKind::insufficient_record,
                "adversary view needs a transcript recorded with full message logs");
  }
  AdversaryView view;
  view.adversaries = sorted_set(adversaries);
  for (AgentId id : view.adversaries) check_agent(id, transcript.n_agents(), "adversary");
  view.params = transcript.config.params;
  view.algorithm = transcript.config.algorithm;
  view.schedule = transcript.config.schedule;
  view.n_rounds = transcript.n_rounds();

  view.own_states.resize(view.n_rounds + 1);
  for (Round k = 0; k <= view.n_rounds; ++k) {
    const auto& states = transcript.states_at(k);
    for (AgentId id : view.adversaries) view.own_states[k].push_back(states[id - 1]);
  }
  view.messages.resize(view.n_rounds);
  for (Round k = 0; k < view.n_rounds; ++k) {
    for (const auto& m : transcript.rounds[k].messages) {
      if (view.is_adversary(m.sender) || view.is_adversary(m.receiver)) {
        view.messages[k].push_back(m);
      }
    }
  }
  return view;
}

std::vector<double> reconstruct_weights(const AdversaryView& view, AgentId target) {
  std::vector<double> w(view.n_rounds + 1);
  w[0] = 1.0;
  for (Round k = 0; k < view.n_rounds; ++k) {
    double flux = 0.0;
    for (const auto& m : view.messages[k]) {
      if (m.receiver == target) flux += m.delta_w;
      if (m.sender == target) flux -= m.delta_w;
    }
    w[k + 1] = w[k] + flux;
  }
  return w;
}

double attack_reconstruct(const AdversaryView& view, AgentId target) {
  if (!view.schedule) {
    throw Error(ErrorKind::attack_infeasible, "view carries no schedule");
  }
  if (view.algorithm != Algorithm::confidential) {
    throw Error(ErrorKind::attack_infeasible,
                "reconstruction attack targets the confidential algorithm");
  }
  const auto& params = view.params;
  const PrivacyVerdict verdict =
      privacy_condition(*view.schedule, view.adversaries, target, params);
  if (verdict.verdict != Verdict::vulnerable) {
    throw Error(ErrorKind::attack_infeasible,
                fmt::format("target {} is {}, not fully surrounded by adversaries", target,
                            to_string(verdict.verdict)));
  }

  const std::vector<double> w = reconstruct_weights(view, target);

  // Earliest round after the randomized phase in which the target talks to
  // an adversary: its share reveals s_i(k') = (ds / dw) w_i(k').
  std::optional<Round> probe;
  const RoundMessage* probe_msg = nullptr;
  for (Round k = params.big_k + 1; k < view.n_rounds && !probe; ++k) {
    for (const auto& m : view.messages[k]) {
      if (m.sender == target && view.is_adversary(m.receiver)) {
        probe = k;
        probe_msg = &m;
        break;
      }
    }
  }
  if (!probe) {
    throw Error(ErrorKind::attack_infeasible,
                fmt::format("target {} never sends to an adversary after round {}", target,
                            params.big_k));
  }

  auto net_mass_flux = [&](Round k) {
    double flux = 0.0;
    for (const auto& m : view.messages[k]) {
      if (m.receiver == target) flux += m.delta_s;
      if (m.sender == target) flux -= m.delta_s;
    }
    return flux;
  };

  double s = probe_msg->delta_s / probe_msg->delta_w * w[*probe];
  for (Round k = params.big_k + 1; k < *probe; ++k) s -= net_mass_flux(k);
  // s is now s_i(K+1); undo the wrapped phase.
  double wrapped = 0.0;
  for (Round k = 0; k <= params.big_k; ++k) wrapped += net_mass_flux(k);
  const double s0 = frac(s - wrapped);

  const auto n = static_cast<double>(params.n);
  return (params.b - params.a) / (n - 2.0) * (n * n * s0 - 1.0) + params.a;
}

double attack_conventional(const AdversaryView& view, AgentId target) {
  if (view.n_rounds > 0) {
    for (const auto& m : view.messages[0]) {
      if (m.sender == target && view.is_adversary(m.receiver)) {
        return m.delta_s / m.delta_w;
      }
    }
  }
  throw Error(ErrorKind::attack_infeasible,
              fmt::format("target {} sends nothing to the adversaries at round 0", target));
}

namespace {

struct TrialSample {
  std::vector<std::string> ids;
  std::vector<double> values;
};

TrialSample observable_statistics(const Transcript& transcript,
                                  std::span<const AgentId> adversaries, Round last_round) {
  const AdversaryView view = observe(transcript, adversaries);
  TrialSample sample;
  for (Round k = 0; k <= last_round && k < view.n_rounds; ++k) {
    for (const auto& m : view.messages[k]) {
      sample.ids.push_back(fmt::format("r{}:{}->{}:ds", k, m.sender, m.receiver));
      sample.values.push_back(m.delta_s);
      sample.ids.push_back(fmt::format("r{}:{}->{}:dw", k, m.sender, m.receiver));
      sample.values.push_back(m.delta_w);
      // The pair is observed together, so its ratio is observable too.
      sample.ids.push_back(fmt::format("r{}:{}->{}:ratio", k, m.sender, m.receiver));
      sample.values.push_back(m.delta_s / m.delta_w);
    }
  }
  for (const auto& st : view.own_states.back()) {
    sample.ids.push_back(fmt::format("final:pi{}", st.agent_id));
    sample.values.push_back(estimate(st, view.algorithm, view.params));
  }
  return sample;
}

// values[stat][trial]
std::vector<std::vector<double>> collect(const ScenarioConfig& config, std::size_t trials,
                                         std::span<const AgentId> adversaries,
                                         Round last_round, std::vector<std::string>& ids) {
  std::vector<TrialSample> samples(trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) {
      try {
        ScenarioConfig c = config;
        c.seed = config.seed + t;
        samples[t] = observable_statistics(run(c), adversaries, last_round);
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

  ids = samples.front().ids;
  std::vector<std::vector<double>> values(ids.size(), std::vector<double>(trials));
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t s = 0; s < ids.size(); ++s) values[s][t] = samples[t].values[s];
  }
  return values;
}

}  // namespace

IndistinguishabilityResult indistinguishability_test(const ScenarioConfig& base, AgentId target,
                                                     AgentId partner, double shift,
                                                     std::size_t trials, double significance) {
  validate(base);
  const auto& params = base.params;
  check_agent(target, params.n, "target");
  check_agent(partner, params.n, "partner");
  if (trials == 0) {
    throw Error(ErrorKind::configuration, "need at least one trial");
  }
  if (!(significance > 0.0 && significance < 1.0)) {
    throw Error(ErrorKind::configuration, "significance must be in (0, 1)");
  }
  const auto adv = sorted_set(base.adversaries);
  auto is_adv = [&](AgentId id) { return std::binary_search(adv.begin(), adv.end(), id); };
  if (target == partner || is_adv(target) || is_adv(partner)) {
    throw Error(ErrorKind::invalid_pair,
                fmt::format("target {} and partner {} must be distinct honest agents", target,
                            partner));
  }
  bool adjacent = false;
  const Round last_k = std::min<Round>(params.big_k, distinct_rounds(*base.schedule) - 1);
  for (Round k = 0; k <= last_k && !adjacent; ++k) {
    const auto nb = neighbors_at(*base.schedule, target, k);
    adjacent = std::binary_search(nb.begin(), nb.end(), partner);
  }
  if (!adjacent) {
    throw Error(ErrorKind::invalid_pair,
                fmt::format("partner {} is never a neighbor of target {} within rounds 0..{}",
                            partner, target, params.big_k));
  }

  const std::vector<double> x = resolve_initial_values(base);
  std::vector<double> x_shifted = x;
  x_shifted[target - 1] += shift;
  x_shifted[partner - 1] -= shift;
  for (AgentId id : {target, partner}) {
    const double v = x_shifted[id - 1];
    if (!(v >= params.a && v <= params.b)) {
      throw Error(ErrorKind::invalid_pair,
                  fmt::format("shifted value {} of agent {} leaves [{}, {}]", v, id, params.a,
                              params.b));
    }
  }

  ScenarioConfig original = base;
  original.initial_values = x;
  original.record = RecordMode::full;
  original.stop_tolerance = 0.0;
  ScenarioConfig shifted = original;
  shifted.initial_values = x_shifted;
  shifted.seed = base.seed + trials;

  const Round last_round = params.big_k + 2;
  std::vector<std::string> ids;
  std::vector<std::string> ids_shifted;
  const auto sample_x = collect(original, trials, adv, last_round, ids);
  // Identical configurations yield the identical population.
  const auto sample_y =
      x_shifted == x ? sample_x : collect(shifted, trials, adv, last_round, ids_shifted);
  if (x_shifted != x && ids != ids_shifted) {
    throw Error(ErrorKind::validation, "observable statistics differ between the two runs");
  }

  IndistinguishabilityResult result;
  result.statistics = ids.size();
  for (std::size_t s = 0; s < ids.size(); ++s) {
    const KsResult ks = ks_two_sample(sample_x[s], sample_y[s]);
    result.p_values.emplace_back(ids[s], ks.p_value);
    if (ks.p_value < significance) ++result.rejections;
  }
  result.allowed_rejections = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(2.0 * significance * static_cast<double>(result.statistics))));
  result.rejection_fraction =
      result.statistics == 0
          ? 0.0
          : static_cast<double>(result.rejections) / static_cast<double>(result.statistics);
  result.pass = result.rejections <= result.allowed_rejections;
  return result;
}

}  // namespace cps
