#include "qgraph/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qgraph {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nn::Matrix stack_rows(const TransitionBatch& batch, double scale,
                      const std::vector<double> TransitionSample::*field) {
  const std::size_t dim = batch.empty() ? 0 : (batch.front().*field).size();
  nn::Matrix m(batch.size(), dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& v = batch[i].*field;
    if (v.size() != dim) throw nn::ShapeError("batch: ragged vectors");
    for (std::size_t j = 0; j < dim; ++j) m(i, j) = v[j] * scale;
  }
  return m;
}

nn::Matrix concat_columns(const nn::Matrix& a, const nn::Matrix& b) {
  nn::Matrix out(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    std::copy(a.row(r).begin(), a.row(r).end(), out.row(r).begin());
    std::copy(b.row(r).begin(), b.row(r).end(), out.row(r).begin() + a.cols);
  }
  return out;
}

}  // namespace

std::pair<double, double> apriori_bounds(double r_min, double r_max, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("apriori_bounds: gamma must lie in (0, 1)");
  }
  if (r_min > r_max) throw InvalidInput("apriori_bounds: r_min > r_max");
  return {std::min(r_min, r_min / (1.0 - gamma)),
          std::max(r_max, r_max / (1.0 - gamma))};
}

void BoundConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("bound config: gamma must lie in (0, 1)");
  }
  if (apriori && apriori->min > apriori->max) {
    throw InvalidInput("bound config: a-priori r_min > r_max");
  }
}

double TDTargets::clamp_rate() const {
  if (raw.empty()) return 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    n += (lower_clamped[i] || upper_clamped[i]) ? 1 : 0;
  }
  return static_cast<double>(n) / static_cast<double>(raw.size());
}

std::vector<double> compute_raw_targets(const TransitionBatch& batch,
                                        const nn::Mlp& critic,
                                        const nn::Mlp& actor, double gamma,
                                        double observation_scale) {
  if (batch.empty()) return {};
  const nn::Matrix next = stack_rows(batch, observation_scale, &TransitionSample::next_state);
  const nn::Matrix next_actions = nn::forward(actor, next);
  const nn::Matrix q_next = nn::forward(critic, concat_columns(next, next_actions));
  std::vector<double> raw(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    raw[i] = batch[i].terminal ? batch[i].reward
                               : batch[i].reward + gamma * q_next(i, 0);
  }
  return raw;
}

TDTargets apply_bounds(std::span<const double> raw,
                       std::span<const std::optional<double>> graph_lbs,
                       const BoundConfig& config,
                       std::optional<RewardRange> observed) {
  if (config.use_graph_lb && graph_lbs.size() != raw.size()) {
    throw nn::ShapeError("apply_bounds: bound vector size mismatch");
  }
  double shared_lower = -kInf;
  double shared_upper = kInf;
  if (config.apriori) {
    const auto [lo, hi] =
        apriori_bounds(config.apriori->min, config.apriori->max, config.gamma);
    shared_lower = std::max(shared_lower, lo);
    shared_upper = std::min(shared_upper, hi);
  }
  if (config.empirical && observed) {
    const auto [lo, hi] = apriori_bounds(observed->min, observed->max, config.gamma);
    shared_lower = std::max(shared_lower, lo);
    shared_upper = std::min(shared_upper, hi);
  }

  TDTargets t;
  const std::size_t n = raw.size();
  t.raw.assign(raw.begin(), raw.end());
  t.lower.resize(n);
  t.upper.resize(n);
  t.bounded.resize(n);
  t.lower_clamped.resize(n);
  t.upper_clamped.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lb = shared_lower;
    if (config.use_graph_lb && graph_lbs[i]) lb = std::max(lb, *graph_lbs[i]);
    const double ub = shared_upper;
    const double lifted = std::max(lb, raw[i]);
    t.lower[i] = lb;
    t.upper[i] = ub;
    t.bounded[i] = std::min(ub, lifted);
    t.lower_clamped[i] = raw[i] < lb;
    t.upper_clamped[i] = lifted > ub;
  }
  return t;
}

std::vector<double> select_action(const nn::Mlp& actor,
                                  std::span<const double> state, double sigma,
                                  std::mt19937_64& rng,
                                  double observation_scale) {
  if (sigma < 0.0) throw InvalidInput("select_action: sigma must be >= 0");
  std::vector<double> scaled(state.begin(), state.end());
  for (double& x : scaled) x *= observation_scale;
  std::vector<double> action = nn::forward(actor, scaled);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& a : action) a += noise(rng);
  }
  for (double& a : action) a = std::clamp(a, -1.0, 1.0);
  return action;
}

AgentConfig AgentConfig::make(std::size_t state_dim, std::size_t action_dim,
                              std::size_t hidden_width,
                              std::size_t hidden_layers) {
  AgentConfig c;
  c.actor_spec.sizes.push_back(state_dim);
  c.critic_spec.sizes.push_back(state_dim + action_dim);
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    c.actor_spec.sizes.push_back(hidden_width);
    c.critic_spec.sizes.push_back(hidden_width);
  }
  c.actor_spec.sizes.push_back(action_dim);
  c.critic_spec.sizes.push_back(1);
  c.actor_spec.hidden = nn::Activation::tanh;
  c.actor_spec.output = nn::Activation::tanh;
  c.critic_spec.hidden = nn::Activation::relu;
  c.critic_spec.output = nn::Activation::linear;
  return c;
}

void AgentConfig::validate() const {
  actor_spec.validate();
  critic_spec.validate();
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) {
    throw InvalidInput("agent config: learning rates must be positive");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw InvalidInput("agent config: gamma must lie in (0, 1)");
  }
  if (critic_spec.sizes.back() != 1) {
    throw InvalidInput("agent config: critic must have a single output");
  }
  if (critic_spec.sizes.front() !=
      actor_spec.sizes.front() + actor_spec.sizes.back()) {
    throw InvalidInput("agent config: critic input must be state + action width");
  }
  if (minibatch_size == 0) throw InvalidInput("agent config: minibatch_size must be positive");
  if (explore_sigma < 0.0) throw InvalidInput("agent config: explore_sigma must be >= 0");
  bounds.validate();
}

Agent::Agent(AgentConfig config, std::mt19937_64& rng) : config_(std::move(config)) {
  config_.validate();
  actor_ = nn::Mlp::init(config_.actor_spec, config_.actor_init, rng);
  critic_ = nn::Mlp::init(config_.critic_spec, config_.critic_init, rng);
  actor_opt_ = nn::AdamState(actor_.num_params());
  critic_opt_ = nn::AdamState(critic_.num_params());
}

Agent::Agent(AgentConfig config, nn::Mlp actor, nn::Mlp critic)
    : config_(std::move(config)), actor_(std::move(actor)), critic_(std::move(critic)) {
  config_.validate();
  if (!(actor_.spec() == config_.actor_spec) || !(critic_.spec() == config_.critic_spec)) {
    throw nn::ShapeError("agent: network shapes do not match config");
  }
  actor_opt_ = nn::AdamState(actor_.num_params());
  critic_opt_ = nn::AdamState(critic_.num_params());
}

void Agent::observe_reward(double r) {
  if (!observed_) {
    observed_ = RewardRange{r, r};
  } else {
    observed_->min = std::min(observed_->min, r);
    observed_->max = std::max(observed_->max, r);
  }
}

std::vector<double> Agent::policy(std::span<const double> state) const {
  std::vector<double> scaled(state.begin(), state.end());
  for (double& x : scaled) x *= config_.observation_scale;
  return nn::forward(actor_, scaled);
}

std::vector<double> Agent::select_action(std::span<const double> state,
                                         double sigma,
                                         std::mt19937_64& rng) const {
  return qgraph::select_action(actor_, state, sigma, rng, config_.observation_scale);
}

double Agent::q_value(std::span<const double> state,
                      std::span<const double> action) const {
  std::vector<double> input;
  input.reserve(state.size() + action.size());
  for (double x : state) input.push_back(x * config_.observation_scale);
  input.insert(input.end(), action.begin(), action.end());
  return nn::forward(critic_, input).front();
}

nn::Matrix Agent::critic_input(const nn::Matrix& states,
                               const nn::Matrix& actions) const {
  return concat_columns(states, actions);
}

std::size_t Agent::minibatches_per_epoch(std::size_t stored_edges) const {
  const std::size_t b = config_.minibatch_size;
  return std::min(config_.max_minibatches_per_epoch, (stored_edges + b - 1) / b);
}

LossReport Agent::train_step(const DataGraph& graph, std::mt19937_64& rng) {
  return train_on_batch(graph.sample_minibatch(config_.minibatch_size, rng));
}

LossReport Agent::train_on_batch(const TransitionBatch& batch) {
  if (batch.empty()) throw InvalidInput("train_on_batch: empty batch");
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double scale = config_.observation_scale;

  // Targets from the current networks (no target networks).
  const std::vector<double> raw =
      compute_raw_targets(batch, critic_, actor_, config_.gamma, scale);
  std::vector<std::optional<double>> lbs(n);
  for (std::size_t i = 0; i < n; ++i) lbs[i] = batch[i].lower_bound;
  const TDTargets targets = apply_bounds(raw, lbs, config_.bounds, observed_);

  LossReport report;
  report.clamp_rate = targets.clamp_rate();

  const nn::Matrix states = stack_rows(batch, scale, &TransitionSample::state);
  const nn::Matrix actions = stack_rows(batch, 1.0, &TransitionSample::action);

  // Critic: mean squared error against the bounded targets.
  {
    nn::ForwardCache cache;
    const nn::Matrix q = nn::forward(critic_, critic_input(states, actions), &cache);
    nn::Matrix grad(n, 1);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = q(i, 0) - targets.bounded[i];
      loss += err * err;
      grad(i, 0) = 2.0 * err * inv_n;
    }
    report.critic_loss = loss * inv_n;
    const nn::Gradients g = nn::backward(critic_, cache, grad);
    nn::adam_step(critic_, g.params, critic_opt_, config_.critic_lr);
  }

  // Actor: minimise -mean Q(s, pi(s)); gradients reach the actor only.
  {
    nn::ForwardCache actor_cache;
    const nn::Matrix pi = nn::forward(actor_, states, &actor_cache);
    nn::ForwardCache critic_cache;
    const nn::Matrix q = nn::forward(critic_, critic_input(states, pi), &critic_cache);
    double mean_q = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_q += q(i, 0);
    report.actor_loss = -mean_q * inv_n;
    const nn::Matrix dq(n, 1, -inv_n);
    const nn::Gradients through_critic = nn::backward(critic_, critic_cache, dq, false);
    const std::size_t state_dim = states.cols;
    nn::Matrix d_action(n, pi.cols);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < pi.cols; ++j) {
        d_action(i, j) = through_critic.input(i, state_dim + j);
      }
    }
    const nn::Gradients g = nn::backward(actor_, actor_cache, d_action);
    nn::adam_step(actor_, g.params, actor_opt_, config_.actor_lr);
  }
  return report;
}

}  // namespace qgraph
