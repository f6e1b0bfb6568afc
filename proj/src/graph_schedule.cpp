#include "cps/graph_schedule.hpp"

#include <algorithm>
#include <queue>
#include <set>

#include <fmt/core.h>

#include "cps/error.hpp"

namespace cps {

namespace {

void build_csr(std::size_t n, std::span<const Edge> edges, bool by_sender,
               std::vector<std::size_t>& offsets, std::vector<AgentId>& ids) {
  offsets.assign(n + 1, 0);
  for (const auto& e : edges) {
    ++offsets[by_sender ? e.sender : e.receiver];
  }
  for (std::size_t i = 1; i <= n; ++i) offsets[i] += offsets[i - 1];
  ids.assign(edges.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& e : edges) {
    const AgentId key = by_sender ? e.sender : e.receiver;
    ids[cursor[key - 1]++] = by_sender ? e.receiver : e.sender;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(ids.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
              ids.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
  }
}

}  // namespace

EdgeSet::EdgeSet(std::vector<Edge> edges, std::size_t n_agents)
    : edges_(std::move(edges)), n_agents_(n_agents) {
  for (const auto& e : edges_) {
    if (e.receiver < 1 || e.receiver > n_agents_ || e.sender < 1 || e.sender > n_agents_) {
      throw Error(ErrorKind::invalid_edge,
                  fmt::format("edge ({}, {}) has an endpoint outside 1..{}", e.receiver,
                              e.sender, n_agents_));
    }
    if (e.receiver == e.sender) {
      throw Error(ErrorKind::invalid_edge,
                  fmt::format("self-edge ({}, {}) is not allowed", e.receiver, e.sender));
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end()) {
    throw Error(ErrorKind::invalid_edge,
                fmt::format("duplicate edge ({}, {})", dup->receiver, dup->sender));
  }
  build_csr(n_agents_, edges_, true, out_offsets_, out_ids_);
  build_csr(n_agents_, edges_, false, in_offsets_, in_ids_);
}

std::span<const AgentId> EdgeSet::out_neighbors(AgentId sender) const {
  if (sender < 1 || sender > n_agents_) return {};
  return std::span<const AgentId>(out_ids_).subspan(
      out_offsets_[sender - 1], out_offsets_[sender] - out_offsets_[sender - 1]);
}

std::span<const AgentId> EdgeSet::in_neighbors(AgentId receiver) const {
  if (receiver < 1 || receiver > n_agents_) return {};
  return std::span<const AgentId>(in_ids_).subspan(
      in_offsets_[receiver - 1], in_offsets_[receiver] - in_offsets_[receiver - 1]);
}

std::size_t EdgeSet::max_out_degree() const {
  std::size_t d = 0;
  for (std::size_t i = 0; i < n_agents_; ++i) {
    d = std::max(d, out_offsets_[i + 1] - out_offsets_[i]);
  }
  return d;
}

bool EdgeSet::contains(const Edge& e) const {
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

GraphSchedule::GraphSchedule(std::size_t n_agents, std::vector<EdgeSet> prefix,
                             std::vector<EdgeSet> cycle, std::string name)
    : n_agents_(n_agents),
      prefix_(std::move(prefix)),
      cycle_(std::move(cycle)),
      name_(std::move(name)) {
  if (n_agents_ == 0) {
    throw Error(ErrorKind::configuration, "schedule needs at least one agent");
  }
  if (cycle_.empty()) {
    throw Error(ErrorKind::configuration, "schedule period must be positive");
  }
  auto check = [&](const EdgeSet& s) {
    if (s.n_agents() != n_agents_) {
      throw Error(ErrorKind::configuration,
                  fmt::format("edge set built for {} agents in a schedule of {}",
                              s.n_agents(), n_agents_));
    }
  };
  for (const auto& s : prefix_) check(s);
  for (const auto& s : cycle_) check(s);
}

GraphSchedule GraphSchedule::periodic(std::size_t n_agents, std::vector<EdgeSet> cycle,
                                      std::string name) {
  return GraphSchedule(n_agents, {}, std::move(cycle), std::move(name));
}

const EdgeSet& GraphSchedule::edges_at(Round k) const {
  if (k < prefix_.size()) return prefix_[k];
  return cycle_[(k - prefix_.size()) % cycle_.size()];
}

std::size_t GraphSchedule::max_out_degree() const {
  std::size_t d = 0;
  for (const auto& s : prefix_) d = std::max(d, s.max_out_degree());
  for (const auto& s : cycle_) d = std::max(d, s.max_out_degree());
  return d;
}

IncidenceMatrix incidence_matrix(const EdgeSet& edge_set, std::size_t n) {
  IncidenceMatrix c = IncidenceMatrix::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(edge_set.size()));
  Eigen::Index col = 0;
  for (const auto& e : edge_set.edges()) {
    if (e.receiver < 1 || e.receiver > n || e.sender < 1 || e.sender > n) {
      throw Error(ErrorKind::invalid_edge,
                  fmt::format("edge ({}, {}) out of range for {} agents", e.receiver,
                              e.sender, n));
    }
    c(e.receiver - 1, col) = 1;
    c(e.sender - 1, col) = -1;
    ++col;
  }
  return c;
}

EdgeSet infinite_edge_set(const GraphSchedule& schedule) {
  std::set<Edge> all;
  for (const auto& s : schedule.cycle()) {
    all.insert(s.edges().begin(), s.edges().end());
  }
  return EdgeSet(std::vector<Edge>(all.begin(), all.end()), schedule.n_agents());
}

bool is_strongly_connected(const EdgeSet& edge_set) {
  const std::size_t n = edge_set.n_agents();
  if (n <= 1) return true;
  auto reaches_all = [&](bool forward) {
    std::vector<char> seen(n + 1, 0);
    std::queue<AgentId> frontier;
    frontier.push(1);
    seen[1] = 1;
    std::size_t count = 1;
    while (!frontier.empty()) {
      const AgentId v = frontier.front();
      frontier.pop();
      auto next = forward ? edge_set.out_neighbors(v) : edge_set.in_neighbors(v);
      for (AgentId u : next) {
        if (!seen[u]) {
          seen[u] = 1;
          ++count;
          frontier.push(u);
        }
      }
    }
    return count == n;
  };
  return reaches_all(true) && reaches_all(false);
}

AssumptionReport verify_assumptions(const GraphSchedule& schedule) {
  AssumptionReport report;
  const EdgeSet recurring = infinite_edge_set(schedule);
  report.strongly_connected = is_strongly_connected(recurring);

  // Window scan over two copies of the cycle: every start position in one
  // period, every window length up to the period.
  const auto cycle = schedule.cycle();
  const std::size_t p = cycle.size();
  for (std::size_t t = 1; t <= p && !report.interval_bound; ++t) {
    bool all_windows = true;
    for (std::size_t start = 0; start < p && all_windows; ++start) {
      for (const auto& e : recurring.edges()) {
        bool seen = false;
        for (std::size_t k = start; k < start + t && !seen; ++k) {
          seen = cycle[k % p].contains(e);
        }
        if (!seen) {
          all_windows = false;
          break;
        }
      }
    }
    if (all_windows) report.interval_bound = static_cast<unsigned>(t);
  }
  return report;
}

GraphSchedule alternating5_schedule() {
  constexpr std::size_t n = 5;
  // Even rounds: directed 5-cycle i -> i+1. Odd rounds: stride-2 cycle i -> i+2.
  std::vector<Edge> even{{2, 1}, {3, 2}, {4, 3}, {5, 4}, {1, 5}};
  std::vector<Edge> odd{{3, 1}, {4, 2}, {5, 3}, {1, 4}, {2, 5}};
  return GraphSchedule::periodic(n, {EdgeSet(even, n), EdgeSet(odd, n)}, "alternating5");
}

GraphSchedule ring_schedule(std::size_t n_agents) {
  if (n_agents < 7) {
    throw Error(ErrorKind::configuration,
                "ring schedule needs at least 7 agents for distinct neighbors");
  }
  const auto n = static_cast<long long>(n_agents);
  auto wrap = [n](long long v) { return static_cast<AgentId>(((v % n) + n) % n + 1); };
  std::vector<Edge> even;
  std::vector<Edge> odd;
  even.reserve(3 * n_agents);
  odd.reserve(3 * n_agents);
  for (long long i = 1; i <= n; ++i) {
    const auto sender = static_cast<AgentId>(i);
    for (long long d : {0, 1, 2}) even.push_back({wrap(i + d), sender});
    for (long long d : {2, 3, 4}) odd.push_back({wrap(i - d), sender});
  }
  return GraphSchedule::periodic(
      n_agents, {EdgeSet(std::move(even), n_agents), EdgeSet(std::move(odd), n_agents)},
      n_agents == 1000 ? "ring1000" : fmt::format("ring{}", n_agents));
}

GraphSchedule custom_schedule(const CustomScheduleSpec& spec) {
  if (spec.n_agents == 0) {
    throw Error(ErrorKind::configuration, "custom schedule needs n >= 1");
  }
  if (spec.period == 0 || spec.period > spec.rounds.size()) {
    throw Error(ErrorKind::configuration,
                fmt::format("custom schedule period {} must be in 1..{}", spec.period,
                            spec.rounds.size()));
  }
  std::vector<EdgeSet> sets;
  sets.reserve(spec.rounds.size());
  for (const auto& round : spec.rounds) {
    std::vector<Edge> edges;
    edges.reserve(round.size());
    for (const auto& [i, j] : round) {
      const auto n = static_cast<long long>(spec.n_agents);
      if (i < 1 || i > n || j < 1 || j > n) {
        throw Error(ErrorKind::invalid_edge,
                    fmt::format("edge ({}, {}) has an endpoint outside 1..{}", i, j, n));
      }
      edges.push_back({static_cast<AgentId>(i), static_cast<AgentId>(j)});
    }
    sets.emplace_back(std::move(edges), spec.n_agents);
  }
  const auto split = static_cast<std::ptrdiff_t>(spec.rounds.size() - spec.period);
  std::vector<EdgeSet> prefix(sets.begin(), sets.begin() + split);
  std::vector<EdgeSet> cycle(sets.begin() + split, sets.end());
  return GraphSchedule(spec.n_agents, std::move(prefix), std::move(cycle), "custom");
}

GraphSchedule builtin_schedule(std::string_view name, const CustomScheduleSpec* custom) {
  if (name == "alternating5") return alternating5_schedule();
  if (name == "ring1000") return ring_schedule(1000);
  if (name == "custom") {
    if (custom == nullptr) {
      throw Error(ErrorKind::configuration, "custom schedule requires explicit rounds");
    }
    return custom_schedule(*custom);
  }
  throw Error(ErrorKind::unknown_schedule, fmt::format("unknown schedule '{}'", name));
}

}  // namespace cps
