#include "qgraph/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qgraph/neural.hpp"

namespace qgraph::envs {

void BairdConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("baird: gamma must lie in (0, 1)");
  if (!(lr > 0.0)) throw InvalidInput("baird: lr must be positive");
  if (record_every == 0) throw InvalidInput("baird: record_every must be positive");
  for (double w : initial_weights) {
    if (!std::isfinite(w)) throw InvalidInput("baird: initial weights must be finite");
  }
}

std::array<double, 7> baird_values(const std::array<double, 8>& w) {
  std::array<double, 7> v{};
  for (std::size_t i = 0; i < 6; ++i) v[i] = w[0] + 2.0 * w[i + 1];
  v[6] = 2.0 * w[0] + w[7];
  return v;
}

BairdTrace baird_run(const BairdConfig& config) {
  config.validate();
  BairdTrace trace;
  std::array<double, 8> w = config.initial_weights;
  auto record = [&](std::size_t t, const std::array<double, 7>& v) {
    trace.step.push_back(t);
    trace.weights.push_back(w);
    trace.values.push_back(v);
  };

  std::array<double, 7> v = baird_values(w);
  record(0, v);
  for (std::size_t t = 1; t <= config.steps; ++t) {
    double target = config.gamma * v[6];
    if (config.bounded) target = std::max(0.0, target);
    std::array<double, 7> err{};
    for (std::size_t i = 0; i < 7; ++i) err[i] = target - v[i];
    // Gradient of V_i with respect to w, summed over all states.
    std::array<double, 8> step{};
    for (std::size_t i = 0; i < 6; ++i) {
      step[0] += err[i];
      step[i + 1] += 2.0 * err[i];
    }
    step[0] += 2.0 * err[6];
    step[7] += err[6];
    for (std::size_t j = 0; j < 8; ++j) w[j] += config.lr * step[j];
    v = baird_values(w);

    const bool finite = std::all_of(w.begin(), w.end(), [](double x) { return std::isfinite(x); });
    if (t % config.record_every == 0 || t == config.steps || !finite) record(t, v);
    if (!finite) {
      trace.diverged = true;
      break;
    }
  }
  trace.final_weights = w;
  trace.final_values = v;
  return trace;
}

std::array<double, 8> baird_random_init(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> small(0.5, 1.5);
  std::uniform_real_distribution<double> large(8.0, 12.0);
  std::array<double, 8> w{};
  w[0] = large(rng);
  for (std::size_t i = 1; i < 8; ++i) w[i] = small(rng);
  return w;
}

std::array<EduTransition, 4> edu_transitions() {
  auto make = [](std::size_t idx, std::array<double, 2> s, std::array<double, 2> s2,
                 double r, bool terminal) {
    EduTransition t;
    t.index = idx;
    t.state = s;
    t.next_state = s2;
    t.action = {s2[0] - s[0], s2[1] - s[1]};
    t.reward = r;
    t.terminal = terminal;
    return t;
  };
  return {make(0, kEduS1, kEduS0, 0.0, true), make(1, kEduS1, kEduS2, -1.0, false),
          make(2, kEduS2, kEduS1, -1.0, false), make(3, kEduS2, kEduS2, -1.0, false)};
}

namespace {

std::vector<std::size_t> members_of(unsigned mask) {
  if (mask == 0 || mask > 0xF) throw InvalidInput("edu: subset mask must be in [1, 15]");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (mask & (1u << i)) out.push_back(i);
  }
  return out;
}

}  // namespace

std::vector<TransitionClass> edu_classify(unsigned mask) {
  const auto all = edu_transitions();
  GraphConfig gc;
  gc.gamma = kEduGamma;
  DataGraph graph(gc);
  std::vector<EdgeId> ids;
  for (std::size_t i : members_of(mask)) {
    const auto& t = all[i];
    graph.add_transition(t.state, t.action, t.reward, t.next_state, t.terminal);
    ids.push_back(graph.edges().back().id);
  }
  const auto classes = classify_transitions(graph);
  std::vector<TransitionClass> out;
  for (EdgeId id : ids) out.push_back(classes.at(id));
  return out;
}

EduResult edu_offline_experiment(unsigned mask, std::span<const std::uint64_t> seeds,
                                 const EduConfig& config) {
  if (seeds.empty()) throw InvalidInput("edu: need at least one seed");
  if (!(config.gamma > 0.0 && config.gamma < 1.0)) {
    throw InvalidInput("edu: gamma must lie in (0, 1)");
  }
  const auto all = edu_transitions();
  EduResult result;
  result.members = members_of(mask);
  result.seeds.assign(seeds.begin(), seeds.end());
  result.classes = edu_classify(mask);

  const std::size_t n = result.members.size();
  // Candidate bootstrap actions per sample: the subset's actions leaving s'.
  std::vector<std::vector<std::array<double, 2>>> bootstrap(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& t = all[result.members[k]];
    if (t.terminal) continue;
    for (std::size_t j : result.members) {
      if (all[j].state == t.next_state) bootstrap[k].push_back(all[j].action);
    }
    if (bootstrap[k].empty()) bootstrap[k].push_back({0.0, 0.0});
  }

  nn::Matrix inputs(n, 4);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& t = all[result.members[k]];
    inputs(k, 0) = t.state[0];
    inputs(k, 1) = t.state[1];
    inputs(k, 2) = t.action[0];
    inputs(k, 3) = t.action[1];
  }
  // Every (s', a') pair any target may need, evaluated in one batch.
  std::vector<std::pair<std::size_t, std::size_t>> probe_owner;
  std::size_t probes = 0;
  for (std::size_t k = 0; k < n; ++k) probes += bootstrap[k].size();
  nn::Matrix probe(probes, 4);
  for (std::size_t k = 0, row = 0; k < n; ++k) {
    const auto& t = all[result.members[k]];
    for (const auto& a : bootstrap[k]) {
      probe(row, 0) = t.next_state[0];
      probe(row, 1) = t.next_state[1];
      probe(row, 2) = a[0];
      probe(row, 3) = a[1];
      probe_owner.emplace_back(k, row);
      ++row;
    }
  }

  const nn::LayerSpec spec{{4, 4, 4, 1}, nn::Activation::relu, nn::Activation::linear};
  for (std::uint64_t seed : seeds) {
    std::mt19937_64 rng(seed);
    nn::Mlp critic = nn::Mlp::init(spec, nn::InitScheme::xavier_uniform(), rng);
    nn::AdamState opt(critic.num_params());
    std::vector<double> target(n);
    std::vector<double> q(n);
    bool failed = false;
    for (std::size_t epoch = 0; epoch < config.epochs && !failed; ++epoch) {
      try {
        for (std::size_t k = 0; k < n; ++k) target[k] = all[result.members[k]].reward;
        if (probes > 0) {
          const nn::Matrix qp = nn::forward(critic, probe);
          std::vector<double> best(n, -std::numeric_limits<double>::infinity());
          for (const auto& [k, row] : probe_owner) best[k] = std::max(best[k], qp(row, 0));
          for (std::size_t k = 0; k < n; ++k) {
            if (!bootstrap[k].empty()) target[k] += config.gamma * best[k];
          }
        }
        nn::ForwardCache cache;
        const nn::Matrix out = nn::forward(critic, inputs, &cache);
        nn::Matrix grad(n, 1);
        for (std::size_t k = 0; k < n; ++k) {
          grad(k, 0) = 2.0 * (out(k, 0) - target[k]) / static_cast<double>(n);
        }
        const nn::Gradients g = nn::backward(critic, cache, grad);
        nn::adam_step(critic, g.params, opt, config.lr);
      } catch (const nn::NonFinite&) {
        failed = true;
      }
    }
    if (failed) {
      q.assign(n, std::numeric_limits<double>::quiet_NaN());
    } else {
      const nn::Matrix out = nn::forward(critic, inputs);
      for (std::size_t k = 0; k < n; ++k) q[k] = out(k, 0);
    }
    result.q.push_back(std::move(q));
  }
  return result;
}

void PointMassConfig::validate() const {
  for (double x : {cube_side, block_width, block_height, hole_diameter, peg_diameter,
                   step_scale, reward_scale, terminal_radius}) {
    if (!(x > 0.0)) throw InvalidInput("point mass: lengths must be positive");
  }
  if (peg_diameter > hole_diameter) throw InvalidInput("point mass: peg wider than hole");
  if (block_width > cube_side || block_height > cube_side) {
    throw InvalidInput("point mass: block larger than cube");
  }
  if (episode_length == 0) throw InvalidInput("point mass: episode_length must be positive");
  if (noise_sigma < 0.0) throw InvalidInput("point mass: noise sigma must be >= 0");
  if (!pointmass_in_cube(*this, goal)) throw InvalidInput("point mass: goal outside cube");
}

bool pointmass_in_cube(const PointMassConfig& c, std::span<const double> p) {
  if (p.size() != 3) return false;
  const double h = c.half_side();
  return std::all_of(p.begin(), p.end(), [h](double x) { return x >= -h && x <= h; });
}

bool pointmass_in_material(const PointMassConfig& c, std::span<const double> p) {
  const double hw = c.block_width / 2.0;
  if (std::abs(p[0]) > hw || std::abs(p[1]) > hw) return false;
  if (p[2] >= c.block_top()) return false;
  return std::hypot(p[0], p[1]) > c.hole_clearance();
}

double pointmass_reward(const PointMassConfig& c, std::span<const double> p) {
  const double d = std::sqrt((p[0] - c.goal[0]) * (p[0] - c.goal[0]) +
                             (p[1] - c.goal[1]) * (p[1] - c.goal[1]) +
                             (p[2] - c.goal[2]) * (p[2] - c.goal[2]));
  return std::exp(-d / c.reward_scale) - 1.0;
}

EnvStep pointmass_step(const PointMassConfig& c, std::span<const double> state,
                       std::span<const double> action, std::mt19937_64& rng) {
  if (state.size() != 3 || action.size() != 3) {
    throw InvalidInput("point mass: state and action must be 3-dimensional");
  }
  if (!pointmass_in_cube(c, state)) throw InvalidInput("point mass: state outside cube");

  EnvStep out;
  std::normal_distribution<double> noise(0.0, c.noise_sigma > 0.0 ? c.noise_sigma : 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    double a = action[i];
    if (c.noise_sigma > 0.0) a += noise(rng);
    out.executed_action[i] = std::clamp(a, -1.0, 1.0);
  }

  const double h = c.half_side();
  std::array<double, 3> p{};
  for (std::size_t i = 0; i < 3; ++i) {
    p[i] = std::clamp(state[i] + c.step_scale * out.executed_action[i], -h, h);
  }
  if (pointmass_in_material(c, p)) {
    if (state[2] >= c.block_top()) {
      // Came down onto the block: rest on its top face.
      p[2] = c.block_top();
    } else {
      // Moving sideways below the top: the wall blocks the horizontal part.
      p[0] = state[0];
      p[1] = state[1];
    }
  }
  out.next_state = p;
  out.reward = pointmass_reward(c, p);
  const double d = std::sqrt((p[0] - c.goal[0]) * (p[0] - c.goal[0]) +
                             (p[1] - c.goal[1]) * (p[1] - c.goal[1]) +
                             (p[2] - c.goal[2]) * (p[2] - c.goal[2]));
  out.terminal = d <= c.terminal_radius;
  return out;
}

std::array<double, 3> pointmass_reset(const PointMassConfig& c, std::mt19937_64& rng) {
  const double h = c.half_side();
  std::uniform_real_distribution<double> xy(-h, h);
  std::uniform_real_distribution<double> z(c.block_top(), h);
  std::array<double, 3> p{};
  p[0] = xy(rng);
  p[1] = xy(rng);
  p[2] = z(rng);
  return p;
}

}  // namespace qgraph::envs
