#pragma once

// Experiment configuration and its text format.
//
//   # comment
//   experiment = pointmass
//   [agent]
//   critic_lr = 1e-4
//
// Keys inside a section are addressed as "section.key", which is also the
// form accepted by overrides ("agent.critic_lr=1e-3").

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qgraph/agents.hpp"
#include "qgraph/envs.hpp"

namespace qgraph {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Experiment { baird, edu, pointmass };

std::string_view to_string(Experiment e);
std::string_view to_string(Method m);

struct ExperimentConfig {
  std::string name = "run";
  Experiment experiment = Experiment::pointmass;
  Method method = Method::vanilla;

  // Variant flags.
  bool graph_bounds = true;  // only consulted for method qgraph
  bool zero_action = false;
  bool apriori_bounds = false;
  bool empirical_bounds = false;
  double reward_min = -1.0;  // a-priori reward range
  double reward_max = 0.0;

  std::size_t episodes = 100;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  // Agent.
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double gamma = 0.99;
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 3;
  std::size_t minibatch_size = 64;
  std::size_t epochs_per_episode = 50;
  std::size_t max_minibatches_per_epoch = 15;
  double explore_sigma = 0.2;
  double observation_scale = 10.0;

  // Graph.
  std::optional<std::size_t> capacity;
  std::size_t max_loop_search_depth = 32;

  envs::PointMassConfig pointmass;
  envs::BairdConfig baird;
  envs::EduConfig edu;
  bool baird_random_init = false;  // seeds draw positive inits around the default

  // Prediction-variance probe actions ("given").
  std::vector<std::array<double, 3>> given_actions{
      {0, 0, 0},  {1, 0, 0},   {-1, 0, 0}, {0, 1, 0},   {0, -1, 0}, {0, 0, 1},
      {0, 0, -1}, {1, 1, 1},   {-1, -1, 1}, {1, -1, -1}, {-1, 1, -1}};

  // Output.
  std::string output_dir = "runs";
  bool record_wall_time = false;  // wall_ms stays 0 otherwise (byte-stable CSV)
  bool log_losses = false;
  bool dump_graph = false;

  void validate() const;

  AgentConfig agent_config(std::size_t state_dim, std::size_t action_dim) const;
  GraphConfig graph_config(std::size_t action_dim) const;
};

// Flat "section.key" -> value map.
using ConfigEntries = std::map<std::string, std::string>;

ConfigEntries parse_config_text(std::string_view text);
ConfigEntries read_config_file(const std::string& path);

// "section.key=value".
std::pair<std::string, std::string> parse_override(std::string_view text);

// Applies every entry; unknown keys and malformed values raise ConfigError.
void apply_entries(ExperimentConfig& config, const ConfigEntries& entries);
void apply_entry(ExperimentConfig& config, const std::string& key,
                 const std::string& value);

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

// Every addressable key with its current value, in the file syntax.
ConfigEntries to_entries(const ExperimentConfig& config);
std::string to_text(const ExperimentConfig& config);

}  // namespace qgraph
