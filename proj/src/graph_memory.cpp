#include "qgraph/graph_memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace qgraph {

namespace {

void erase_id(std::vector<EdgeId>& ids, EdgeId id) {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it != ids.end()) ids.erase(it);
}

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double parse_real(const std::string& field, const char* what) {
  char* end = nullptr;
  const double x = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw InvalidInput(std::string("graph dump: bad ") + what + " '" + field +
                       "'");
  }
  return x;
}

bool parse_flag(const std::string& field, const char* what) {
  if (field == "0") return false;
  if (field == "1") return true;
  throw InvalidInput(std::string("graph dump: bad ") + what + " '" + field +
                     "'");
}

}  // namespace

void GraphConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("graph config: gamma must lie in (0, 1)");
  }
  if (capacity && *capacity == 0) {
    throw InvalidInput("graph config: capacity must be positive");
  }
  if (max_loop_search_depth == 0) {
    throw InvalidInput("graph config: max_loop_search_depth must be positive");
  }
  if (!(propagation_epsilon > 0.0)) {
    throw InvalidInput("graph config: propagation_epsilon must be positive");
  }
  if (reward_range && reward_range->first > reward_range->second) {
    throw InvalidInput("graph config: reward_range must satisfy min <= max");
  }
  if (zero_action) {
    (void)action_key(*zero_action);
  }
}

DataGraph::DataGraph(GraphConfig config) : config_(std::move(config)) {
  config_.validate();
}

std::string DataGraph::triple_key(const StateKey& from, const ActionKey& action,
                                  const StateKey& to) {
  // Length-prefixed so that different splits never collide.
  std::string key;
  key.reserve(from.bytes().size() + action.bytes().size() + to.bytes().size() +
              6);
  for (const std::string* part : {&from.bytes(), &action.bytes(), &to.bytes()}) {
    const auto n = static_cast<std::uint16_t>(part->size());
    key.push_back(static_cast<char>(n & 0xffu));
    key.push_back(static_cast<char>(n >> 8));
    key += *part;
  }
  return key;
}

bool DataGraph::contains(EdgeId id) const {
  return id >= first_id_ && id < first_id_ + edges_.size();
}

const Edge& DataGraph::edge(EdgeId id) const {
  if (!contains(id)) throw std::out_of_range("data graph: edge not stored");
  return edges_[static_cast<std::size_t>(id - first_id_)];
}

Edge& DataGraph::mutable_edge(EdgeId id) {
  if (!contains(id)) throw std::out_of_range("data graph: edge not stored");
  return edges_[static_cast<std::size_t>(id - first_id_)];
}

std::optional<EdgeId> DataGraph::find_edge(const StateKey& from,
                                           const ActionKey& action,
                                           const StateKey& to) const {
  auto it = triples_.find(triple_key(from, action, to));
  if (it == triples_.end()) return std::nullopt;
  return it->second;
}

std::span<const EdgeId> DataGraph::successors(const StateKey& s) const {
  auto it = successors_.find(s);
  if (it == successors_.end()) return {};
  return it->second;
}

std::span<const EdgeId> DataGraph::predecessors(const StateKey& s) const {
  auto it = predecessors_.find(s);
  if (it == predecessors_.end()) return {};
  return it->second;
}

const std::vector<double>& DataGraph::state_vector(const StateKey& s) const {
  auto it = states_.find(s);
  if (it == states_.end()) throw std::out_of_range("data graph: unknown state");
  return it->second;
}

std::vector<StateKey> DataGraph::state_keys() const {
  std::vector<StateKey> keys;
  keys.reserve(states_.size());
  for (const auto& [k, v] : states_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

bool DataGraph::is_terminal_state(const StateKey& s) const {
  return terminal_in_degree_.contains(s);
}

bool DataGraph::ends_terminal(const Edge& e) const {
  return e.terminal || is_terminal_state(e.to);
}

std::optional<double> DataGraph::max_successor_lb(const StateKey& s) const {
  std::optional<double> best;
  for (EdgeId id : successors(s)) {
    const auto& lb = edge(id).lower_bound;
    if (lb && (!best || *lb > *best)) best = lb;
  }
  return best;
}

std::optional<LoopInfo> DataGraph::detect_loop(const StateKey& from,
                                               const StateKey& to,
                                               double reward) const {
  if (from == to) return LoopInfo{1, reward};

  // Parent edge per discovered state; the search never crosses an edge into a
  // terminal state since no episode continues past one.
  std::unordered_map<StateKey, EdgeId> parent;
  std::unordered_set<StateKey> seen{to};
  std::vector<StateKey> frontier{to};
  for (std::size_t depth = 1;
       depth <= config_.max_loop_search_depth && !frontier.empty(); ++depth) {
    std::vector<StateKey> next;
    for (const StateKey& u : frontier) {
      for (EdgeId id : successors(u)) {
        const Edge& e = edge(id);
        if (ends_terminal(e) || seen.contains(e.to)) continue;
        seen.insert(e.to);
        parent.emplace(e.to, id);
        if (e.to == from) {
          std::vector<double> rewards;
          StateKey cur = from;
          while (!(cur == to)) {
            const Edge& pe = edge(parent.at(cur));
            rewards.push_back(pe.reward);
            cur = pe.from;
          }
          // rewards holds the path s' -> ... -> s backwards.
          double sum = reward;
          double discount = config_.gamma;
          for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) {
            sum += discount * *it;
            discount *= config_.gamma;
          }
          return LoopInfo{rewards.size() + 1, sum};
        }
        next.push_back(e.to);
      }
    }
    frontier = std::move(next);
  }
  return std::nullopt;
}

std::optional<double> DataGraph::lb_for_new_transition(const StateKey& from,
                                                       const StateKey& to,
                                                       double reward,
                                                       bool terminal) const {
  std::optional<double> best;
  auto consider = [&best](double v) {
    if (!best || v > *best) best = v;
  };
  const double gamma = config_.gamma;
  if (terminal || is_terminal_state(to)) {
    consider(reward);
    return best;
  }
  if (from == to) {
    consider(reward / (1.0 - gamma));
  } else if (auto loop = detect_loop(from, to, reward)) {
    consider(loop->discounted_reward_sum /
             (1.0 - std::pow(gamma, static_cast<double>(loop->length))));
  }
  if (auto succ = max_successor_lb(to)) consider(reward + gamma * *succ);
  return best;
}

std::size_t DataGraph::propagate_lb(const StateKey& start,
                                    std::vector<StateKey>* changed) {
  std::size_t updates = 0;
  std::deque<StateKey> work{start};
  while (!work.empty()) {
    const StateKey s = std::move(work.front());
    work.pop_front();
    auto preds = predecessors_.find(s);
    if (preds == predecessors_.end()) continue;
    const auto best = max_successor_lb(s);
    if (!best) continue;
    for (EdgeId pid : preds->second) {
      Edge& pe = mutable_edge(pid);
      if (ends_terminal(pe)) continue;
      const double candidate = pe.reward + config_.gamma * *best;
      if (!pe.lower_bound ||
          candidate > *pe.lower_bound + config_.propagation_epsilon) {
        pe.lower_bound = candidate;
        ++updates;
        if (changed) changed->push_back(pe.from);
        work.push_back(pe.from);
      }
    }
  }
  diagnostics_.propagation_updates += updates;
  return updates;
}

void DataGraph::append_edge(Edge e, std::span<const double> from_values,
                            std::span<const double> to_values) {
  triples_.emplace(triple_key(e.from, e.action, e.to), e.id);
  successors_[e.from].push_back(e.id);
  predecessors_[e.to].push_back(e.id);
  if (!states_.contains(e.from)) {
    states_.emplace(e.from,
                    std::vector<double>(from_values.begin(), from_values.end()));
  }
  if (!states_.contains(e.to)) {
    states_.emplace(e.to, std::vector<double>(to_values.begin(), to_values.end()));
  }
  if (e.terminal) ++terminal_in_degree_[e.to];
  if (edges_.empty()) first_id_ = e.id;
  edges_.push_back(std::move(e));
}

std::vector<StateKey> DataGraph::insert(std::span<const double> state,
                                        std::span<const double> action,
                                        double reward,
                                        std::span<const double> next_state,
                                        bool terminal, bool synthetic) {
  if (std::isnan(reward) || !std::isfinite(reward)) {
    throw InvalidInput("add_transition: reward is not finite");
  }
  StateKey from = state_key(state);
  ActionKey act = action_key(action);
  StateKey to = state_key(next_state);

  std::vector<StateKey> changed;
  if (auto existing = find_edge(from, act, to)) {
    ++diagnostics_.duplicate_inserts;
    if (edge(*existing).reward != reward) ++diagnostics_.reward_mismatches;
    return changed;
  }

  std::optional<double> lb;
  if (config_.compute_bounds) lb = lb_for_new_transition(from, to, reward, terminal);

  Edge e;
  e.id = next_id_++;
  e.from = from;
  e.action = std::move(act);
  e.action_values.assign(action.begin(), action.end());
  e.reward = reward;
  e.to = to;
  e.terminal = terminal;
  e.lower_bound = lb;
  e.synthetic = synthetic;
  append_edge(std::move(e), state, next_state);

  if (lb) {
    changed.push_back(from);
    propagate_lb(from, &changed);
  }
  enforce_capacity();

  if (config_.zero_action && !terminal && !(from == to)) {
    auto more = insert(next_state, *config_.zero_action, reward, next_state,
                       false, true);
    changed.insert(changed.end(), more.begin(), more.end());
  }
  return changed;
}

std::vector<StateKey> DataGraph::add_transition(
    std::span<const double> state, std::span<const double> action,
    double reward, std::span<const double> next_state, bool terminal) {
  auto changed = insert(state, action, reward, next_state, terminal, false);
  std::sort(changed.begin(), changed.end());
  changed.erase(std::unique(changed.begin(), changed.end()), changed.end());
  return changed;
}

void DataGraph::enforce_capacity() {
  if (!config_.capacity) return;
  while (edges_.size() > *config_.capacity) evict_oldest();
}

EdgeId DataGraph::evict_oldest() {
  if (edges_.empty()) throw std::out_of_range("evict_oldest: graph is empty");
  const Edge& e = edges_.front();
  const EdgeId id = e.id;

  auto drop_from = [&](std::unordered_map<StateKey, std::vector<EdgeId>>& index,
                       const StateKey& key) {
    auto it = index.find(key);
    if (it == index.end()) return;
    erase_id(it->second, id);
    if (it->second.empty()) index.erase(it);
  };
  drop_from(successors_, e.from);
  drop_from(predecessors_, e.to);
  triples_.erase(triple_key(e.from, e.action, e.to));
  if (e.terminal) {
    auto it = terminal_in_degree_.find(e.to);
    if (it != terminal_in_degree_.end() && --it->second == 0) {
      terminal_in_degree_.erase(it);
    }
  }
  for (const StateKey* s : {&e.from, &e.to}) {
    if (!successors_.contains(*s) && !predecessors_.contains(*s)) {
      states_.erase(*s);
    }
  }
  edges_.pop_front();
  ++first_id_;
  ++diagnostics_.evictions;
  return id;
}

TransitionBatch DataGraph::sample_minibatch(std::size_t n,
                                            std::mt19937_64& rng) const {
  if (edges_.empty()) {
    throw std::out_of_range("sample_minibatch: graph is empty");
  }
  std::uniform_int_distribution<std::size_t> pick(0, edges_.size() - 1);
  TransitionBatch batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Edge& e = edges_[pick(rng)];
    TransitionSample t;
    t.state = state_vector(e.from);
    t.action = e.action_values;
    t.reward = e.reward;
    t.next_state = state_vector(e.to);
    t.terminal = e.terminal;
    t.lower_bound = e.lower_bound;
    t.edge = e.id;
    batch.push_back(std::move(t));
  }
  return batch;
}

bool DataGraph::raise_lower_bound(EdgeId id, double value) {
  Edge& e = mutable_edge(id);
  if (e.lower_bound && !(value > *e.lower_bound)) return false;
  e.lower_bound = value;
  return true;
}

std::vector<std::string> DataGraph::audit() const {
  std::vector<std::string> problems;
  auto fail = [&problems](std::string msg) { problems.push_back(std::move(msg)); };

  if (config_.capacity && edges_.size() > *config_.capacity) {
    fail("edge count exceeds capacity");
  }
  if (triples_.size() != edges_.size()) {
    fail("duplicate (from, action, to) triples or stale dedupe index");
  }

  std::unordered_map<EdgeId, int> succ_seen;
  std::unordered_map<EdgeId, int> pred_seen;
  for (const auto& [s, ids] : successors_) {
    if (ids.empty()) fail("empty successor list for state " + s.hex());
    for (EdgeId id : ids) {
      if (!contains(id)) {
        fail("successor index references evicted edge " + std::to_string(id));
        continue;
      }
      if (!(edge(id).from == s)) fail("successor index mismatch at edge " + std::to_string(id));
      ++succ_seen[id];
    }
  }
  for (const auto& [s, ids] : predecessors_) {
    if (ids.empty()) fail("empty predecessor list for state " + s.hex());
    for (EdgeId id : ids) {
      if (!contains(id)) {
        fail("predecessor index references evicted edge " + std::to_string(id));
        continue;
      }
      if (!(edge(id).to == s)) fail("predecessor index mismatch at edge " + std::to_string(id));
      ++pred_seen[id];
    }
  }

  std::unordered_set<StateKey> endpoints;
  EdgeId expected = first_id_;
  std::optional<std::pair<double, double>> range;
  if (config_.reward_range) {
    const double g = config_.gamma;
    const double lo = config_.reward_range->first;
    const double hi = config_.reward_range->second;
    range = std::pair{std::min(lo, lo / (1.0 - g)), std::max(hi, hi / (1.0 - g))};
  }
  for (const Edge& e : edges_) {
    const std::string tag = "edge " + std::to_string(e.id);
    if (e.id != expected++) fail(tag + ": insertion indices not contiguous");
    if (succ_seen[e.id] != 1) fail(tag + ": not listed exactly once as successor");
    if (pred_seen[e.id] != 1) fail(tag + ": not listed exactly once as predecessor");
    auto t = triples_.find(triple_key(e.from, e.action, e.to));
    if (t == triples_.end() || t->second != e.id) fail(tag + ": dedupe index mismatch");
    if (!std::isfinite(e.reward)) fail(tag + ": non-finite reward");
    if (e.lower_bound) {
      const double lb = *e.lower_bound;
      if (!std::isfinite(lb)) fail(tag + ": non-finite lower bound");
      if (e.terminal && lb < e.reward) fail(tag + ": terminal bound below reward");
      if (range) {
        const double slack = 1e-9 * (1.0 + std::fabs(lb));
        if (lb < range->first - slack || lb > range->second + slack) {
          fail(tag + ": lower bound outside a-priori Q range");
        }
      }
    }
    if (e.synthetic && !(e.from == e.to)) fail(tag + ": synthetic edge is not a self-loop");
    endpoints.insert(e.from);
    endpoints.insert(e.to);
  }
  if (endpoints.size() != states_.size()) fail("state table does not match edge endpoints");
  for (const auto& [k, v] : states_) {
    if (!endpoints.contains(k)) fail("orphan state " + k.hex());
    if (!(state_key(v) == k)) fail("raw state vector does not match key " + k.hex());
  }
  for (const auto& [k, n] : terminal_in_degree_) {
    std::size_t count = 0;
    for (EdgeId id : predecessors(k)) count += edge(id).terminal ? 1 : 0;
    if (count != n || n == 0) fail("terminal bookkeeping mismatch at " + k.hex());
  }
  return problems;
}

void DataGraph::dump(std::ostream& out) const {
  for (const Edge& e : edges_) {
    out << e.from.hex() << ';' << e.action.hex() << ';' << format_real(e.reward)
        << ';' << e.to.hex() << ';' << (e.terminal ? 1 : 0) << ';'
        << (e.lower_bound ? format_real(*e.lower_bound) : std::string("NA"))
        << ';' << e.id << ';' << (e.synthetic ? 1 : 0) << '\n';
  }
}

DataGraph DataGraph::restore(std::istream& in, GraphConfig config) {
  DataGraph g(std::move(config));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ';')) fields.push_back(field);
    if (fields.size() != 8) {
      throw InvalidInput("graph dump line " + std::to_string(line_no) +
                         ": expected 8 fields");
    }
    Edge e;
    e.from = StateKey::from_hex(fields[0]);
    e.action = ActionKey::from_hex(fields[1]);
    e.action_values = e.action.decode();
    e.reward = parse_real(fields[2], "reward");
    e.to = StateKey::from_hex(fields[3]);
    e.terminal = parse_flag(fields[4], "terminal flag");
    if (fields[5] != "NA") e.lower_bound = parse_real(fields[5], "lower bound");
    e.id = std::stoull(fields[6]);
    e.synthetic = parse_flag(fields[7], "synthetic flag");
    if (!g.edges_.empty() && e.id != g.next_id_) {
      throw InvalidInput("graph dump line " + std::to_string(line_no) +
                         ": insertion indices must be contiguous");
    }
    if (g.find_edge(e.from, e.action, e.to)) {
      throw InvalidInput("graph dump line " + std::to_string(line_no) +
                         ": duplicate (from, action, to)");
    }
    g.next_id_ = e.id + 1;
    const auto from_values = e.from.decode();
    const auto to_values = e.to.decode();
    g.append_edge(std::move(e), from_values, to_values);
  }
  return g;
}

}  // namespace qgraph
