#pragma once

// Random deterministic finite MDPs and random observed subsets of them, used
// by the bound property checks.

#include <random>
#include <vector>

#include "qgraph/finite_mdp.hpp"
#include "qgraph/graph_memory.hpp"

namespace qgraph::testing {

inline ExplicitMdp random_mdp(std::mt19937_64& rng, std::size_t max_states = 12,
                              std::size_t max_actions = 4) {
  std::uniform_int_distribution<std::size_t> n_states(2, max_states);
  std::uniform_int_distribution<std::size_t> n_actions(1, max_actions);
  std::uniform_real_distribution<double> reward(-1.0, 1.0);
  std::bernoulli_distribution is_terminal(0.2);

  ExplicitMdp mdp;
  const std::size_t n = n_states(rng);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t s = 0; s < n; ++s) {
    mdp.state_vectors.push_back({static_cast<double>(s), 0.5});
    mdp.terminal.push_back(s > 0 && is_terminal(rng));
    std::vector<ExplicitMdp::Transition> ts;
    if (!mdp.terminal.back()) {
      const std::size_t k = n_actions(rng);
      for (std::size_t a = 0; a < k; ++a) {
        ts.push_back({{static_cast<double>(a), -1.0}, pick(rng), reward(rng)});
      }
    }
    mdp.transitions.push_back(std::move(ts));
  }
  return mdp;
}

// Inserts each transition of `mdp` independently with probability `keep`, in
// a random order.
inline void insert_random_subset(const ExplicitMdp& mdp, DataGraph& graph, std::mt19937_64& rng,
                                 double keep) {
  struct Item {
    std::size_t s, a;
  };
  std::vector<Item> items;
  std::bernoulli_distribution take(keep);
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    for (std::size_t a = 0; a < mdp.transitions[s].size(); ++a) {
      if (take(rng)) items.push_back({s, a});
    }
  }
  std::shuffle(items.begin(), items.end(), rng);
  for (const Item& it : items) {
    const auto& t = mdp.transitions[it.s][it.a];
    graph.add_transition(mdp.state_vectors[it.s], t.action, t.reward, mdp.state_vectors[t.next],
                         mdp.terminal[t.next]);
  }
}

}  // namespace qgraph::testing
