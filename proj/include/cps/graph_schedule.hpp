#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cps {

// Agents are numbered 1..N everywhere in the public API and in files.
using AgentId = std::uint32_t;
using Round = std::uint64_t;

// Directed edge "sender -> receiver"; stored receiver-first to match the
// (i, j) pair convention of the incidence matrix.
struct Edge {
  AgentId receiver = 0;
  AgentId sender = 0;

  auto operator<=>(const Edge&) const = default;
};

// Edge set of one round. Edges are kept sorted by (receiver, sender) so the
// column order of the incidence matrix is reproducible.
class EdgeSet {
 public:
  EdgeSet() = default;
  EdgeSet(std::vector<Edge> edges, std::size_t n_agents);

  std::span<const Edge> edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  std::size_t n_agents() const { return n_agents_; }

  // Sorted ascending.
  std::span<const AgentId> out_neighbors(AgentId sender) const;
  std::span<const AgentId> in_neighbors(AgentId receiver) const;

  std::size_t out_degree(AgentId sender) const { return out_neighbors(sender).size(); }
  std::size_t in_degree(AgentId receiver) const { return in_neighbors(receiver).size(); }
  std::size_t max_out_degree() const;

  bool contains(const Edge& e) const;

  friend bool operator==(const EdgeSet& a, const EdgeSet& b) {
    return a.n_agents_ == b.n_agents_ && a.edges_ == b.edges_;
  }

 private:
  std::vector<Edge> edges_;
  std::size_t n_agents_ = 0;
  std::vector<std::size_t> out_offsets_;
  std::vector<AgentId> out_ids_;
  std::vector<std::size_t> in_offsets_;
  std::vector<AgentId> in_ids_;
};

// A time-varying graph given as an optional one-shot prefix followed by a
// cycle that repeats forever. A purely periodic schedule has an empty prefix.
class GraphSchedule {
 public:
  GraphSchedule(std::size_t n_agents, std::vector<EdgeSet> prefix,
                std::vector<EdgeSet> cycle, std::string name);

  static GraphSchedule periodic(std::size_t n_agents, std::vector<EdgeSet> cycle,
                                std::string name);

  std::size_t n_agents() const { return n_agents_; }
  std::size_t period() const { return cycle_.size(); }
  std::size_t prefix_length() const { return prefix_.size(); }
  bool is_periodic() const { return prefix_.empty(); }
  const std::string& name() const { return name_; }

  const EdgeSet& edges_at(Round k) const;

  std::span<const EdgeSet> prefix() const { return prefix_; }
  std::span<const EdgeSet> cycle() const { return cycle_; }

  // Max out-degree over every round of the schedule.
  std::size_t max_out_degree() const;

 private:
  std::size_t n_agents_;
  std::vector<EdgeSet> prefix_;
  std::vector<EdgeSet> cycle_;
  std::string name_;
};

using IncidenceMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// N x E matrix: column l has +1 at the receiver and -1 at the sender of the
// l-th edge.
IncidenceMatrix incidence_matrix(const EdgeSet& edge_set, std::size_t n);

// Edges that occur infinitely often. For a schedule with a prefix only the
// terminal cycle counts; the general aperiodic case is not supported.
EdgeSet infinite_edge_set(const GraphSchedule& schedule);

struct AssumptionReport {
  bool strongly_connected = false;
  // Smallest T such that every recurring edge appears in every window of T
  // consecutive rounds; empty when no such T exists.
  std::optional<unsigned> interval_bound;
};

AssumptionReport verify_assumptions(const GraphSchedule& schedule);

bool is_strongly_connected(const EdgeSet& edge_set);

// Explicit rounds for a "custom" schedule. The last `period` rounds form the
// repeating cycle; any rounds before them are played once.
struct CustomScheduleSpec {
  std::size_t n_agents = 0;
  std::size_t period = 0;
  std::vector<std::vector<std::pair<long long, long long>>> rounds;
};

GraphSchedule alternating5_schedule();
GraphSchedule ring_schedule(std::size_t n_agents);
GraphSchedule custom_schedule(const CustomScheduleSpec& spec);

// name is one of "alternating5", "ring1000", "custom"; `custom` is required
// (and only read) for the last.
GraphSchedule builtin_schedule(std::string_view name,
                               const CustomScheduleSpec* custom = nullptr);

}  // namespace cps
