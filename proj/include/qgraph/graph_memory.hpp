#pragma once

// Replay memory organised as a data graph: states are nodes, stored
// transitions are edges. Each edge may carry a lower bound on its optimal
// Q-value, derived incrementally from terminal anchors, self-loops, detected
// cycles and successor bounds, and pushed backwards to predecessors.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qgraph/keys.hpp"

namespace qgraph {

// Insertion index; strictly increasing over the lifetime of a graph.
using EdgeId = std::uint64_t;

struct Edge {
  EdgeId id = 0;
  StateKey from;
  ActionKey action;
  std::vector<double> action_values;
  double reward = 0.0;
  StateKey to;
  bool terminal = false;
  std::optional<double> lower_bound;
  bool synthetic = false;
};

struct LoopInfo {
  std::size_t length = 0;
  double discounted_reward_sum = 0.0;
};

struct TransitionSample {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
  std::optional<double> lower_bound;  // absent reads as -infinity
  EdgeId edge = 0;
};

using TransitionBatch = std::vector<TransitionSample>;

struct GraphConfig {
  double gamma = 0.99;
  std::optional<std::size_t> capacity;  // unlimited when empty
  std::optional<std::vector<double>> zero_action;
  std::size_t max_loop_search_depth = 32;
  double propagation_epsilon = 1e-9;
  // Plain replay memory when false: no bounds are computed or propagated.
  bool compute_bounds = true;
  // Only consulted by audit(): bounds must sit inside the a-priori range.
  std::optional<std::pair<double, double>> reward_range;

  void validate() const;
};

struct GraphDiagnostics {
  std::size_t duplicate_inserts = 0;
  std::size_t reward_mismatches = 0;
  std::size_t evictions = 0;
  std::size_t propagation_updates = 0;
};

class DataGraph {
 public:
  explicit DataGraph(GraphConfig config = {});

  const GraphConfig& config() const { return config_; }
  const GraphDiagnostics& diagnostics() const { return diagnostics_; }

  // Inserts (s, a, r, s', terminal), computes and propagates its bound, adds
  // the zero-action self-loop at s' when configured, and evicts down to
  // capacity. Returns the source states whose outgoing bounds changed.
  // Duplicates of an existing (from, action, to) triple are a no-op.
  std::vector<StateKey> add_transition(std::span<const double> state,
                                       std::span<const double> action,
                                       double reward,
                                       std::span<const double> next_state,
                                       bool terminal);

  // Tightest anchor for a not-yet-inserted edge, or nullopt.
  std::optional<double> lb_for_new_transition(const StateKey& from,
                                              const StateKey& to,
                                              double reward,
                                              bool terminal) const;

  // Shortest cycle closed by a new edge from -> to (breadth-first search from
  // `to` back to `from`, at most max_loop_search_depth stored edges).
  std::optional<LoopInfo> detect_loop(const StateKey& from, const StateKey& to,
                                      double reward) const;

  // Worklist backup of predecessor bounds starting at `start`. Returns the
  // number of edge bounds raised; sources of raised edges go to `changed`.
  std::size_t propagate_lb(const StateKey& start,
                           std::vector<StateKey>* changed = nullptr);

  // Removes the edge with the smallest insertion index. Bounds elsewhere are
  // left untouched. Throws std::out_of_range on an empty graph.
  EdgeId evict_oldest();

  // n edges drawn uniformly with replacement.
  TransitionBatch sample_minibatch(std::size_t n, std::mt19937_64& rng) const;

  // Raises the stored bound of `id` to `value` if that is an improvement.
  bool raise_lower_bound(EdgeId id, double value);

  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_states() const { return states_.size(); }
  bool empty() const { return edges_.empty(); }

  // Stored edges in insertion order.
  const std::deque<Edge>& edges() const { return edges_; }
  bool contains(EdgeId id) const;
  const Edge& edge(EdgeId id) const;
  std::optional<EdgeId> find_edge(const StateKey& from, const ActionKey& action,
                                  const StateKey& to) const;

  std::span<const EdgeId> successors(const StateKey& s) const;
  std::span<const EdgeId> predecessors(const StateKey& s) const;
  bool has_state(const StateKey& s) const { return states_.contains(s); }
  const std::vector<double>& state_vector(const StateKey& s) const;
  std::vector<StateKey> state_keys() const;

  // A state is terminal while any stored edge into it carries the flag.
  bool is_terminal_state(const StateKey& s) const;
  bool ends_terminal(const Edge& e) const;

  std::optional<double> max_successor_lb(const StateKey& s) const;

  // Structural self-check; returns one message per violated invariant.
  std::vector<std::string> audit() const;

  // One edge per line:
  // from_hex;action_hex;reward;to_hex;terminal;lb_or_NA;index;synthetic
  void dump(std::ostream& out) const;
  // Rebuilds a graph from dump() output verbatim (bounds are not recomputed).
  static DataGraph restore(std::istream& in, GraphConfig config);

 private:
  std::vector<StateKey> insert(std::span<const double> state,
                               std::span<const double> action, double reward,
                               std::span<const double> next_state,
                               bool terminal, bool synthetic);
  void append_edge(Edge edge, std::span<const double> from_values,
                   std::span<const double> to_values);
  Edge& mutable_edge(EdgeId id);
  void enforce_capacity();

  static std::string triple_key(const StateKey& from, const ActionKey& action,
                                const StateKey& to);

  GraphConfig config_;
  GraphDiagnostics diagnostics_;

  std::deque<Edge> edges_;  // ids first_id_ .. first_id_ + size - 1
  EdgeId first_id_ = 0;
  EdgeId next_id_ = 0;

  std::unordered_map<StateKey, std::vector<EdgeId>> successors_;
  std::unordered_map<StateKey, std::vector<EdgeId>> predecessors_;
  std::unordered_map<StateKey, std::vector<double>> states_;
  std::unordered_map<StateKey, std::size_t> terminal_in_degree_;
  std::unordered_map<std::string, EdgeId> triples_;
};

}  // namespace qgraph
