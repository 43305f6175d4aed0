#pragma once

// DDPG without target networks, optionally with TD targets clamped into
// [LB, UB]: LB from the Q-graph, the a-priori reward range, or the observed
// reward range; UB from the latter two.

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "qgraph/graph_memory.hpp"
#include "qgraph/neural.hpp"

namespace qgraph {

// Smallest and largest value any discounted return of rewards in
// [r_min, r_max] can take: [min(r_min, r_min/(1-g)), max(r_max, r_max/(1-g))].
std::pair<double, double> apriori_bounds(double r_min, double r_max, double gamma);

struct RewardRange {
  double min = 0.0;
  double max = 0.0;
};

struct BoundConfig {
  bool use_graph_lb = false;
  std::optional<RewardRange> apriori;
  bool empirical = false;
  double gamma = 0.99;

  bool any() const { return use_graph_lb || apriori.has_value() || empirical; }
  void validate() const;
};

struct TDTargets {
  std::vector<double> raw;
  std::vector<double> lower;  // -inf when no bound applies
  std::vector<double> upper;  // +inf when no bound applies
  std::vector<double> bounded;
  std::vector<char> lower_clamped;
  std::vector<char> upper_clamped;

  std::size_t size() const { return raw.size(); }
  double clamp_rate() const;
};

// r + [not terminal] * gamma * Q(s', pi(s')). States are multiplied by
// `observation_scale` before entering either network.
std::vector<double> compute_raw_targets(const TransitionBatch& batch,
                                        const nn::Mlp& critic,
                                        const nn::Mlp& actor, double gamma,
                                        double observation_scale = 1.0);

TDTargets apply_bounds(std::span<const double> raw,
                       std::span<const std::optional<double>> graph_lbs,
                       const BoundConfig& config,
                       std::optional<RewardRange> observed);

// pi(state) + N(0, sigma) per component, clipped to [-1, 1].
std::vector<double> select_action(const nn::Mlp& actor,
                                  std::span<const double> state, double sigma,
                                  std::mt19937_64& rng,
                                  double observation_scale = 1.0);

enum class Method { vanilla, qgraph };

struct AgentConfig {
  nn::LayerSpec actor_spec;
  double actor_lr = 1e-4;
  nn::InitScheme actor_init = nn::InitScheme::he_uniform();
  nn::LayerSpec critic_spec;
  double critic_lr = 1e-4;
  nn::InitScheme critic_init = nn::InitScheme::gaussian(0.0, 0.001);
  double gamma = 0.99;
  std::size_t minibatch_size = 64;
  std::size_t epochs_per_episode = 50;
  std::size_t max_minibatches_per_epoch = 15;
  double explore_sigma = 0.2;
  double observation_scale = 1.0;
  BoundConfig bounds;
  Method method = Method::vanilla;

  // Actor: tanh hidden and output; critic over [state, action]: ReLU hidden,
  // linear output.
  static AgentConfig make(std::size_t state_dim, std::size_t action_dim,
                          std::size_t hidden_width, std::size_t hidden_layers);
  void validate() const;
};

struct LossReport {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double clamp_rate = 0.0;
};

class Agent {
 public:
  Agent(AgentConfig config, std::mt19937_64& rng);
  Agent(AgentConfig config, nn::Mlp actor, nn::Mlp critic);

  const AgentConfig& config() const { return config_; }
  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& critic() const { return critic_; }
  nn::Mlp& actor() { return actor_; }
  nn::Mlp& critic() { return critic_; }

  void observe_reward(double r);
  std::optional<RewardRange> observed_rewards() const { return observed_; }

  std::vector<double> policy(std::span<const double> state) const;
  std::vector<double> select_action(std::span<const double> state, double sigma,
                                    std::mt19937_64& rng) const;
  double q_value(std::span<const double> state,
                 std::span<const double> action) const;

  // One critic step on bounded TD targets followed by one actor step that
  // ascends Q(s, pi(s)) through the freshly updated critic.
  LossReport train_step(const DataGraph& graph, std::mt19937_64& rng);
  LossReport train_on_batch(const TransitionBatch& batch);

  std::size_t minibatches_per_epoch(std::size_t stored_edges) const;

 private:
  nn::Matrix critic_input(const nn::Matrix& states, const nn::Matrix& actions) const;

  AgentConfig config_;
  nn::Mlp actor_;
  nn::Mlp critic_;
  nn::AdamState actor_opt_;
  nn::AdamState critic_opt_;
  std::optional<RewardRange> observed_;
};

}  // namespace qgraph
