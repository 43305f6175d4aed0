#include "qgraph/finite_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_set>

#include "qgraph/simd/kernels.hpp"

namespace qgraph {

namespace {

std::string pair_key(const StateKey& s, const ActionKey& a) {
  std::string key;
  key.reserve(s.bytes().size() + a.bytes().size() + 2);
  key.push_back(static_cast<char>(s.bytes().size() & 0xffu));
  key.push_back(static_cast<char>(s.bytes().size() >> 8));
  key += s.bytes();
  key += a.bytes();
  return key;
}

double stopping_threshold(double gamma, double tol) {
  return std::min(tol, tol * (1.0 - gamma) / gamma);
}

}  // namespace

std::vector<EdgeId> PrunedSubgraph::kept() const {
  std::vector<EdgeId> ids;
  ids.reserve(edges.size());
  for (const auto& e : edges) ids.push_back(e.id);
  return ids;
}

bool PrunedSubgraph::contains(EdgeId id) const {
  return std::binary_search(
      edges.begin(), edges.end(), id,
      [](const auto& lhs, const auto& rhs) {
        if constexpr (std::is_same_v<std::decay_t<decltype(lhs)>, EdgeId>) {
          return lhs < rhs.id;
        } else {
          return lhs.id < rhs;
        }
      });
}

PrunedSubgraph prune_loose_ends(const DataGraph& graph) {
  const auto& all = graph.edges();
  std::vector<bool> alive(all.size(), true);
  const EdgeId base = all.empty() ? 0 : all.front().id;

  std::unordered_map<StateKey, std::size_t> live_out;
  for (const Edge& e : all) ++live_out[e.from];

  // Peel states with no surviving outgoing edge; each peel can expose more.
  std::deque<StateKey> work;
  std::unordered_set<StateKey> queued;
  for (const StateKey& s : graph.state_keys()) {
    if (!graph.is_terminal_state(s) && !live_out.contains(s)) {
      work.push_back(s);
      queued.insert(s);
    }
  }
  while (!work.empty()) {
    const StateKey s = work.front();
    work.pop_front();
    for (EdgeId id : graph.predecessors(s)) {
      const Edge& e = graph.edge(id);
      auto slot = static_cast<std::size_t>(id - base);
      if (!alive[slot] || graph.ends_terminal(e)) continue;
      alive[slot] = false;
      auto it = live_out.find(e.from);
      if (--it->second == 0) {
        live_out.erase(it);
        if (!graph.is_terminal_state(e.from) && !queued.contains(e.from)) {
          work.push_back(e.from);
          queued.insert(e.from);
        }
      }
    }
  }

  PrunedSubgraph sub;
  std::unordered_map<StateKey, std::uint32_t> index;
  auto index_of = [&](const StateKey& s) {
    auto [it, inserted] =
        index.try_emplace(s, static_cast<std::uint32_t>(sub.states.size()));
    if (inserted) sub.states.push_back(s);
    return it->second;
  };
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!alive[i]) continue;
    const Edge& e = all[i];
    PrunedSubgraph::KeptEdge k;
    k.id = e.id;
    k.from = index_of(e.from);
    k.to = index_of(e.to);
    k.reward = e.reward;
    k.ends_terminal = graph.ends_terminal(e);
    sub.edges.push_back(k);
    sub.actions.push_back(e.action);
  }

  const std::size_t n_states = sub.states.size();
  sub.out_offsets.assign(n_states + 1, 0);
  for (const auto& k : sub.edges) ++sub.out_offsets[k.from + 1];
  for (std::size_t s = 0; s < n_states; ++s) {
    sub.out_offsets[s + 1] += sub.out_offsets[s];
  }
  sub.out_edges.resize(sub.edges.size());
  std::vector<std::uint32_t> fill(sub.out_offsets.begin(),
                                  sub.out_offsets.end() - 1);
  for (std::size_t i = 0; i < sub.edges.size(); ++i) {
    sub.out_edges[fill[sub.edges[i].from]++] = static_cast<std::uint32_t>(i);
  }
  return sub;
}

void QTable::add(QEntry entry) {
  const std::size_t pos = entries_.size();
  const std::string key = pair_key(entry.state, entry.action);
  auto [it, inserted] = by_pair_.try_emplace(key, pos);
  if (!inserted && entry.q < entries_[it->second].q) it->second = pos;
  if (entry.edge) by_edge_[*entry.edge] = pos;
  entries_.push_back(std::move(entry));
}

std::optional<double> QTable::at(const StateKey& s, const ActionKey& a) const {
  auto it = by_pair_.find(pair_key(s, a));
  if (it == by_pair_.end()) return std::nullopt;
  return entries_[it->second].q;
}

std::optional<double> QTable::for_edge(EdgeId id) const {
  auto it = by_edge_.find(id);
  if (it == by_edge_.end()) return std::nullopt;
  return entries_[it->second].q;
}

void QTable::dump(std::ostream& out) const {
  char buf[64];
  for (const QEntry& e : entries_) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.q);
    out << e.state.hex() << ';' << e.action.hex() << ';' << buf << '\n';
  }
}

QTable q_iteration(const PrunedSubgraph& sub, double gamma, double tol,
                   std::size_t max_iters) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("q_iteration: gamma must lie in (0, 1)");
  }
  if (!(tol > 0.0)) throw InvalidInput("q_iteration: tol must be positive");

  const auto& kernels = simd::active();
  const std::size_t n_edges = sub.edges.size();
  const std::size_t n_states = sub.states.size();

  std::vector<double> reward(n_edges), discount(n_edges);
  std::vector<std::uint32_t> target(n_edges);
  for (std::size_t i = 0; i < n_edges; ++i) {
    reward[i] = sub.edges[i].reward;
    discount[i] = sub.edges[i].ends_terminal ? 0.0 : gamma;
    target[i] = sub.edges[i].to;
  }

  std::vector<double> q(n_edges, 0.0), q_next(n_edges, 0.0), value(n_states, 0.0);
  const double threshold = stopping_threshold(gamma, tol);
  QTable table;
  table.gamma = gamma;

  std::size_t iter = 0;
  double residual = 0.0;
  if (n_edges > 0) {
    for (;;) {
      if (iter == max_iters) {
        throw NonConvergence("q_iteration: residual " + std::to_string(residual) +
                             " after " + std::to_string(iter) + " sweeps");
      }
      ++iter;
      for (std::size_t s = 0; s < n_states; ++s) {
        const std::uint32_t begin = sub.out_offsets[s];
        const std::uint32_t end = sub.out_offsets[s + 1];
        // States without kept out-edges are only ever reached through
        // terminal edges, whose discount is zero.
        double best = begin == end ? 0.0 : q[sub.out_edges[begin]];
        for (std::uint32_t j = begin + 1; j < end; ++j) {
          best = std::max(best, q[sub.out_edges[j]]);
        }
        value[s] = best;
      }
      kernels.bellman_backup(n_edges, reward.data(), discount.data(),
                             target.data(), value.data(), q_next.data());
      residual = kernels.max_abs_diff(n_edges, q_next.data(), q.data());
      q.swap(q_next);
      if (std::isnan(residual)) {
        throw NonConvergence("q_iteration: non-finite values");
      }
      if (residual <= threshold) break;
    }
  }
  table.residual = residual;
  table.iterations = iter;
  for (std::size_t i = 0; i < n_edges; ++i) {
    table.add(QEntry{sub.states[sub.edges[i].from], sub.actions[i], q[i],
                     sub.edges[i].id});
  }
  return table;
}

std::string_view to_string(TransitionClass c) {
  switch (c) {
    case TransitionClass::DirectlyConnected:
      return "directly_connected";
    case TransitionClass::Connected:
      return "connected";
    case TransitionClass::LooseEnd:
      return "loose_end";
    case TransitionClass::Disconnected:
      return "disconnected";
  }
  return "unknown";
}

std::unordered_map<EdgeId, TransitionClass> classify_transitions(
    const DataGraph& graph) {
  // States from which some terminal state is reachable over stored edges.
  std::unordered_set<StateKey> reaches;
  std::deque<StateKey> work;
  for (const StateKey& s : graph.state_keys()) {
    if (graph.is_terminal_state(s)) {
      reaches.insert(s);
      work.push_back(s);
    }
  }
  while (!work.empty()) {
    const StateKey s = work.front();
    work.pop_front();
    for (EdgeId id : graph.predecessors(s)) {
      const StateKey& from = graph.edge(id).from;
      if (reaches.insert(from).second) work.push_back(from);
    }
  }

  const PrunedSubgraph sub = prune_loose_ends(graph);
  std::unordered_map<EdgeId, TransitionClass> out;
  for (const Edge& e : graph.edges()) {
    TransitionClass c;
    if (graph.ends_terminal(e)) {
      c = TransitionClass::DirectlyConnected;
    } else if (reaches.contains(e.to)) {
      c = TransitionClass::Connected;
    } else if (sub.contains(e.id)) {
      c = TransitionClass::Disconnected;
    } else {
      c = TransitionClass::LooseEnd;
    }
    out.emplace(e.id, c);
  }
  return out;
}

std::size_t sync_bounds(DataGraph& graph, double tol) {
  const PrunedSubgraph sub = prune_loose_ends(graph);
  const QTable table = q_iteration(sub, graph.config().gamma, tol);
  std::size_t updated = 0;
  for (const QEntry& entry : table.entries()) {
    if (graph.raise_lower_bound(*entry.edge, entry.q)) ++updated;
  }
  return updated;
}

void ExplicitMdp::validate() const {
  const std::size_t n = state_vectors.size();
  if (terminal.size() != n || transitions.size() != n) {
    throw InvalidInput("explicit MDP: per-state tables have mismatched sizes");
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!terminal[s] && transitions[s].empty()) {
      throw InvalidInput("explicit MDP: non-terminal state " + std::to_string(s) +
                         " has no actions");
    }
    for (const auto& t : transitions[s]) {
      if (t.next >= n) throw InvalidInput("explicit MDP: successor out of range");
      if (!std::isfinite(t.reward)) throw InvalidInput("explicit MDP: non-finite reward");
    }
  }
}

QTable brute_force_q(const ExplicitMdp& mdp, double gamma, double tol) {
  mdp.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("brute_force_q: gamma must lie in (0, 1)");
  }
  const std::size_t n = mdp.num_states();
  std::vector<std::vector<double>> q(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (!mdp.terminal[s]) q[s].assign(mdp.transitions[s].size(), 0.0);
  }
  std::vector<double> v(n, 0.0);
  const double threshold = stopping_threshold(gamma, tol);
  QTable table;
  table.gamma = gamma;
  for (std::size_t iter = 1;; ++iter) {
    for (std::size_t s = 0; s < n; ++s) {
      if (mdp.terminal[s]) {
        v[s] = 0.0;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (double x : q[s]) best = std::max(best, x);
      v[s] = best;
    }
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (mdp.terminal[s]) continue;
      for (std::size_t a = 0; a < q[s].size(); ++a) {
        const auto& t = mdp.transitions[s][a];
        const double updated =
            t.reward + (mdp.terminal[t.next] ? 0.0 : gamma * v[t.next]);
        residual = std::max(residual, std::fabs(updated - q[s][a]));
        q[s][a] = updated;
      }
    }
    if (residual <= threshold) {
      table.residual = residual;
      table.iterations = iter;
      break;
    }
    if (iter >= 10'000'000) throw NonConvergence("brute_force_q: no convergence");
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (mdp.terminal[s]) continue;
    const StateKey sk = state_key(mdp.state_vectors[s]);
    for (std::size_t a = 0; a < q[s].size(); ++a) {
      table.add(QEntry{sk, action_key(mdp.transitions[s][a].action), q[s][a],
                       std::nullopt});
    }
  }
  return table;
}

}  // namespace qgraph
