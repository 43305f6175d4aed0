#include "qgraph/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace qgraph {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& key, std::string_view v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + std::string(v) + "'");
  }
  return x;
}

std::uint64_t to_uint(const std::string& key, std::string_view v) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return x;
}

bool to_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + std::string(v) + "'");
}

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// "0..9" or "1,5,7" (ranges may be mixed into lists).
std::vector<std::uint64_t> parse_seeds(const std::string& key, std::string_view v) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split(v, ',')) {
    if (part.empty()) continue;
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_uint(key, part));
    } else {
      const auto lo = to_uint(key, trim(std::string_view(part).substr(0, dots)));
      const auto hi = to_uint(key, trim(std::string_view(part).substr(dots + 2)));
      if (hi < lo) throw ConfigError(key + ": empty seed range");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  return out;
}

std::array<double, 3> parse_triple(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 3) throw ConfigError(key + ": expected three comma-separated values");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

#define QG_DOUBLE(name, member)                                                  \
  Field {                                                                        \
    name, [](const ExperimentConfig& c) { return fmt(c.member); },               \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {    \
          c.member = to_double(k, v);                                            \
        }                                                                        \
  }
#define QG_SIZE(name, member)                                                    \
  Field {                                                                        \
    name, [](const ExperimentConfig& c) { return std::to_string(c.member); },    \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {    \
          c.member = static_cast<std::size_t>(to_uint(k, v));                    \
        }                                                                        \
  }
#define QG_BOOL(name, member)                                                    \
  Field {                                                                        \
    name, [](const ExperimentConfig& c) { return fmt(c.member); },               \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {    \
          c.member = to_bool(k, v);                                              \
        }                                                                        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"name", [](const ExperimentConfig& c) { return c.name; },
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.name = v; }},
      Field{"experiment",
            [](const ExperimentConfig& c) { return std::string(to_string(c.experiment)); },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "baird") c.experiment = Experiment::baird;
              else if (v == "edu") c.experiment = Experiment::edu;
              else if (v == "pointmass") c.experiment = Experiment::pointmass;
              else throw ConfigError(k + ": expected baird, edu or pointmass");
            }},
      Field{"method", [](const ExperimentConfig& c) { return std::string(to_string(c.method)); },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "vanilla") c.method = Method::vanilla;
              else if (v == "qgraph") c.method = Method::qgraph;
              else throw ConfigError(k + ": expected vanilla or qgraph");
            }},
      QG_SIZE("episodes", episodes),
      Field{"seeds",
            [](const ExperimentConfig& c) {
              std::vector<std::string> parts;
              for (auto s : c.seeds) parts.push_back(std::to_string(s));
              return join(parts, ",");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.seeds = parse_seeds(k, v);
            }},
      Field{"output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.output_dir = v;
            }},
      QG_BOOL("record_wall_time", record_wall_time),
      QG_BOOL("log_losses", log_losses),
      QG_BOOL("dump_graph", dump_graph),

      QG_BOOL("bounds.graph", graph_bounds),
      QG_BOOL("bounds.zero_action", zero_action),
      QG_BOOL("bounds.apriori", apriori_bounds),
      QG_BOOL("bounds.empirical", empirical_bounds),
      QG_DOUBLE("bounds.reward_min", reward_min),
      QG_DOUBLE("bounds.reward_max", reward_max),

      QG_DOUBLE("agent.actor_lr", actor_lr),
      QG_DOUBLE("agent.critic_lr", critic_lr),
      QG_DOUBLE("agent.gamma", gamma),
      QG_SIZE("agent.hidden_width", hidden_width),
      QG_SIZE("agent.hidden_layers", hidden_layers),
      QG_SIZE("agent.minibatch_size", minibatch_size),
      QG_SIZE("agent.epochs_per_episode", epochs_per_episode),
      QG_SIZE("agent.max_minibatches_per_epoch", max_minibatches_per_epoch),
      QG_DOUBLE("agent.explore_sigma", explore_sigma),
      QG_DOUBLE("agent.observation_scale", observation_scale),

      Field{"graph.capacity",
            [](const ExperimentConfig& c) {
              return c.capacity ? std::to_string(*c.capacity) : std::string("inf");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "inf" || v == "none" || v == "unlimited") {
                c.capacity.reset();
              } else {
                c.capacity = static_cast<std::size_t>(to_uint(k, v));
              }
            }},
      QG_SIZE("graph.max_loop_search_depth", max_loop_search_depth),

      QG_DOUBLE("env.cube_side", pointmass.cube_side),
      QG_DOUBLE("env.block_width", pointmass.block_width),
      QG_DOUBLE("env.block_height", pointmass.block_height),
      QG_DOUBLE("env.hole_diameter", pointmass.hole_diameter),
      QG_DOUBLE("env.peg_diameter", pointmass.peg_diameter),
      QG_DOUBLE("env.step_scale", pointmass.step_scale),
      QG_DOUBLE("env.reward_scale", pointmass.reward_scale),
      QG_DOUBLE("env.terminal_radius", pointmass.terminal_radius),
      QG_SIZE("env.episode_length", pointmass.episode_length),
      QG_DOUBLE("env.noise_sigma", pointmass.noise_sigma),
      Field{"env.goal",
            [](const ExperimentConfig& c) {
              return fmt(c.pointmass.goal[0]) + "," + fmt(c.pointmass.goal[1]) + "," +
                     fmt(c.pointmass.goal[2]);
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.pointmass.goal = parse_triple(k, v);
            }},

      QG_DOUBLE("baird.gamma", baird.gamma),
      QG_DOUBLE("baird.lr", baird.lr),
      QG_SIZE("baird.steps", baird.steps),
      QG_SIZE("baird.record_every", baird.record_every),
      Field{"baird.weights",
            [](const ExperimentConfig& c) {
              std::vector<std::string> parts;
              for (double w : c.baird.initial_weights) parts.push_back(fmt(w));
              return join(parts, ",");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const auto parts = split(v, ',');
              if (parts.size() != 8) throw ConfigError(k + ": expected eight weights");
              for (std::size_t i = 0; i < 8; ++i) {
                c.baird.initial_weights[i] = to_double(k, parts[i]);
              }
            }},

      QG_BOOL("baird.random_init", baird_random_init),

      QG_DOUBLE("edu.gamma", edu.gamma),
      QG_DOUBLE("edu.lr", edu.lr),
      QG_SIZE("edu.epochs", edu.epochs),

      Field{"variance.given_actions",
            [](const ExperimentConfig& c) {
              std::vector<std::string> parts;
              for (const auto& a : c.given_actions) {
                parts.push_back(fmt(a[0]) + "," + fmt(a[1]) + "," + fmt(a[2]));
              }
              return join(parts, ";");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.given_actions.clear();
              for (const auto& part : split(v, ';')) {
                if (!part.empty()) c.given_actions.push_back(parse_triple(k, part));
              }
            }},
  };
  return table;
}

#undef QG_DOUBLE
#undef QG_SIZE
#undef QG_BOOL

}  // namespace

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::baird:
      return "baird";
    case Experiment::edu:
      return "edu";
    case Experiment::pointmass:
      return "pointmass";
  }
  return "?";
}

std::string_view to_string(Method m) {
  return m == Method::vanilla ? "vanilla" : "qgraph";
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (episodes == 0) throw ConfigError("episodes must be >= 1");
  if (name.empty() || name.find('/') != std::string::npos) {
    throw ConfigError("name must be a non-empty path component");
  }
  if (reward_min > reward_max) throw ConfigError("bounds.reward_min > bounds.reward_max");
  if (capacity && *capacity == 0) throw ConfigError("graph.capacity must be positive");
  if (!(observation_scale > 0.0)) throw ConfigError("agent.observation_scale must be positive");
  if (given_actions.empty()) throw ConfigError("variance.given_actions must not be empty");
  try {
    switch (experiment) {
      case Experiment::baird:
        baird.validate();
        break;
      case Experiment::edu:
        if (!(edu.lr > 0.0) || edu.epochs == 0) throw ConfigError("edu: lr and epochs must be positive");
        break;
      case Experiment::pointmass:
        pointmass.validate();
        agent_config(3, 3).validate();
        graph_config(3).validate();
        break;
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  } catch (const nn::ShapeError& e) {
    throw ConfigError(e.what());
  }
}

AgentConfig ExperimentConfig::agent_config(std::size_t state_dim,
                                           std::size_t action_dim) const {
  AgentConfig a = AgentConfig::make(state_dim, action_dim, hidden_width, hidden_layers);
  a.actor_lr = actor_lr;
  a.critic_lr = critic_lr;
  a.gamma = gamma;
  a.minibatch_size = minibatch_size;
  a.epochs_per_episode = epochs_per_episode;
  a.max_minibatches_per_epoch = max_minibatches_per_epoch;
  a.explore_sigma = explore_sigma;
  a.observation_scale = observation_scale;
  a.method = method;
  a.bounds.gamma = gamma;
  a.bounds.use_graph_lb = method == Method::qgraph && graph_bounds;
  if (apriori_bounds) a.bounds.apriori = RewardRange{reward_min, reward_max};
  a.bounds.empirical = empirical_bounds;
  return a;
}

GraphConfig ExperimentConfig::graph_config(std::size_t action_dim) const {
  GraphConfig g;
  g.gamma = gamma;
  g.capacity = capacity;
  g.max_loop_search_depth = max_loop_search_depth;
  g.compute_bounds = method == Method::qgraph;
  if (zero_action) g.zero_action = std::vector<double>(action_dim, 0.0);
  g.reward_range = std::make_pair(reward_min, reward_max);
  return g;
}

ConfigEntries parse_config_text(std::string_view text) {
  ConfigEntries out;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    out[key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

ConfigEntries read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::pair<std::string, std::string> parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(text) + "' is not key=value");
  }
  std::string key(trim(text.substr(0, eq)));
  if (key.empty()) throw ConfigError("override with empty key");
  return {key, std::string(trim(text.substr(eq + 1)))};
}

void apply_entry(ExperimentConfig& config, const std::string& key,
                 const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_entries(ExperimentConfig& config, const ConfigEntries& entries) {
  for (const auto& [k, v] : entries) apply_entry(config, k, v);
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  apply_entries(config, read_config_file(path));
  for (const auto& o : overrides) {
    const auto [k, v] = parse_override(o);
    apply_entry(config, k, v);
  }
  config.validate();
  return config;
}

ConfigEntries to_entries(const ExperimentConfig& config) {
  ConfigEntries out;
  for (const auto& f : fields()) out[f.key] = f.get(config);
  return out;
}

std::string to_text(const ExperimentConfig& config) {
  std::string top;
  std::map<std::string, std::string> sections;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    if (dot == std::string::npos) {
      top += f.key + " = " + f.get(config) + "\n";
    } else {
      sections[f.key.substr(0, dot)] += f.key.substr(dot + 1) + " = " + f.get(config) + "\n";
    }
  }
  for (const auto& [name, body] : sections) top += "\n[" + name + "]\n" + body;
  return top;
}

}  // namespace qgraph
