#pragma once

// The finite MDP induced by a data graph: loose ends are pruned, the rest is
// solved exactly by synchronous Q-iteration, and the solution can be written
// back into the graph's edge bounds.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qgraph/graph_memory.hpp"

namespace qgraph {

// Snapshot of the loose-end-free subgraph in solver-friendly form. Holds
// copies of everything it needs, so the source graph may change afterwards.
struct PrunedSubgraph {
  struct KeptEdge {
    EdgeId id = 0;
    std::uint32_t from = 0;  // index into `states`
    std::uint32_t to = 0;
    double reward = 0.0;
    bool ends_terminal = false;
  };

  std::vector<StateKey> states;
  std::vector<ActionKey> actions;   // parallel to `edges`
  std::vector<KeptEdge> edges;      // ascending EdgeId
  std::vector<std::uint32_t> out_offsets;  // CSR over `edges` by source state
  std::vector<std::uint32_t> out_edges;

  std::vector<EdgeId> kept() const;
  bool contains(EdgeId id) const;
  std::size_t size() const { return edges.size(); }
};

PrunedSubgraph prune_loose_ends(const DataGraph& graph);

struct QEntry {
  StateKey state;
  ActionKey action;
  double q = 0.0;
  std::optional<EdgeId> edge;
};

class QTable {
 public:
  double gamma = 0.0;
  double residual = 0.0;
  std::size_t iterations = 0;

  void add(QEntry entry);
  const std::vector<QEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // When several edges share (state, action) the smallest value is reported.
  std::optional<double> at(const StateKey& s, const ActionKey& a) const;
  std::optional<double> for_edge(EdgeId id) const;

  // Lines of state_hex;action_hex;qvalue (17 significant digits).
  void dump(std::ostream& out) const;

 private:
  std::vector<QEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_pair_;
  std::unordered_map<EdgeId, std::size_t> by_edge_;
};

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Jacobi sweeps Q(s,a) <- r + [not terminal] * gamma * max_a' Q(s',a') from an
// all-zero start. Iterates until the contraction bound
// residual * gamma / (1 - gamma) falls below tol, so every returned value is
// within tol of the exact fixpoint.
QTable q_iteration(const PrunedSubgraph& sub, double gamma, double tol = 1e-9,
                   std::size_t max_iters = 1'000'000);

enum class TransitionClass { DirectlyConnected, Connected, LooseEnd, Disconnected };

std::string_view to_string(TransitionClass c);

std::unordered_map<EdgeId, TransitionClass> classify_transitions(
    const DataGraph& graph);

// Prunes, solves, and raises each kept edge's bound to its exact value.
// Returns the number of bounds raised.
std::size_t sync_bounds(DataGraph& graph, double tol = 1e-9);

// Complete deterministic MDP, used as ground truth for the bound tests.
struct ExplicitMdp {
  struct Transition {
    std::vector<double> action;
    std::size_t next = 0;
    double reward = 0.0;
  };
  std::vector<std::vector<double>> state_vectors;
  std::vector<bool> terminal;
  std::vector<std::vector<Transition>> transitions;  // per state

  std::size_t num_states() const { return state_vectors.size(); }
  void validate() const;
};

// Q* of the complete MDP by value iteration (independent of the graph path).
QTable brute_force_q(const ExplicitMdp& mdp, double gamma, double tol = 1e-9);

}  // namespace qgraph
