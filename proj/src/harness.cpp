#include "qgraph/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "qgraph/envs.hpp"
#include "qgraph/finite_mdp.hpp"
#include "qgraph/simd/kernels.hpp"

namespace qgraph {

namespace fs = std::filesystem;

namespace {

// Independent generator per purpose so that, e.g., environment noise does
// not shift the exploration sequence.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

enum Stream : std::uint64_t { kInit = 1, kReset = 2, kExplore = 3, kEnv = 4, kSample = 5 };

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

nlohmann::json config_json(const ExperimentConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : to_entries(config)) j[k] = v;
  return j;
}

nlohmann::json status_json(const std::vector<SeedStatus>& status) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : status) {
    nlohmann::json e = {{"seed", s.seed}, {"status", s.ok ? "ok" : "failed"}};
    if (!s.ok) e["error"] = s.error;
    arr.push_back(e);
  }
  return arr;
}

void write_checkpoint(const fs::path& path, const nn::Mlp& net) {
  std::ostringstream os;
  nn::save_checkpoint(net, os);
  write_file_atomic(path, os.str());
}

void write_losses(const fs::path& path, const std::vector<LossRow>& losses) {
  std::string out = "step,critic_loss,actor_loss,clamp_rate\n";
  for (const auto& l : losses) {
    out += std::to_string(l.step) + "," + fmt17(l.report.critic_loss) + "," +
           fmt17(l.report.actor_loss) + "," + fmt17(l.report.clamp_rate) + "\n";
  }
  write_file_atomic(path, out);
}

RunResult run_pointmass(const ExperimentConfig& config, const fs::path& dir) {
  RunResult result;
  result.dir = dir;
  for (std::uint64_t seed : config.seeds) {
    SeedStatus status{seed, false, {}};
    try {
      SeedRun run = run_pointmass_seed(config, seed);
      const fs::path seed_dir = dir / ("seed_" + std::to_string(seed));
      fs::create_directories(seed_dir);
      write_checkpoint(seed_dir / "actor.ckpt", run.agent.actor());
      write_checkpoint(seed_dir / "critic.ckpt", run.agent.critic());
      if (config.dump_graph) {
        std::ostringstream os;
        run.graph.dump(os);
        write_file_atomic(seed_dir / "graph.txt", os.str());
      }
      if (config.log_losses) write_losses(seed_dir / "losses.csv", run.losses);
      result.records.insert(result.records.end(), run.records.begin(), run.records.end());
      status.ok = true;
    } catch (const std::exception& e) {
      status.error = e.what();
    }
    result.status.push_back(status);
  }
  std::ostringstream csv;
  write_episodes_csv(csv, result.records);
  write_file_atomic(dir / "episodes.csv", csv.str());
  return result;
}

RunResult run_baird(const ExperimentConfig& config, const fs::path& dir) {
  RunResult result;
  result.dir = dir;
  std::string csv = "seed,step,w0,w1,w2,w3,w4,w5,w6,w7,v1,v2,v3,v4,v5,v6,v7\n";
  for (std::uint64_t seed : config.seeds) {
    envs::BairdConfig bc = config.baird;
    bc.bounded = config.method == Method::qgraph;
    if (config.baird_random_init) {
      auto rng = stream(seed, kInit);
      bc.initial_weights = envs::baird_random_init(rng);
    }
    const auto trace = envs::baird_run(bc);
    for (std::size_t i = 0; i < trace.step.size(); ++i) {
      csv += std::to_string(seed) + "," + std::to_string(trace.step[i]);
      for (double w : trace.weights[i]) csv += "," + fmt17(w);
      for (double v : trace.values[i]) csv += "," + fmt17(v);
      csv += "\n";
    }
    result.status.push_back({seed, true, {}});
  }
  write_file_atomic(dir / "baird.csv", csv);
  return result;
}

RunResult run_edu(const ExperimentConfig& config, const fs::path& dir) {
  RunResult result;
  result.dir = dir;
  std::string csv = "mask,transition,class,seed,q\n";
  for (unsigned mask = 1; mask < 16; ++mask) {
    const auto res = envs::edu_offline_experiment(mask, config.seeds, config.edu);
    for (std::size_t s = 0; s < res.seeds.size(); ++s) {
      for (std::size_t k = 0; k < res.members.size(); ++k) {
        csv += std::to_string(mask) + "," + std::to_string(res.members[k]) + "," +
               std::string(to_string(res.classes[k])) + "," + std::to_string(res.seeds[s]) +
               "," + fmt17(res.q[s][k]) + "\n";
      }
    }
  }
  for (std::uint64_t seed : config.seeds) result.status.push_back({seed, true, {}});
  write_file_atomic(dir / "edu.csv", csv);
  return result;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

bool RunResult::ok() const {
  return std::all_of(status.begin(), status.end(), [](const SeedStatus& s) { return s.ok; });
}

SeedRun run_pointmass_seed(const ExperimentConfig& config, std::uint64_t seed) {
  constexpr std::size_t kDim = 3;
  const envs::PointMassConfig& env = config.pointmass;
  auto init_rng = stream(seed, kInit);
  auto reset_rng = stream(seed, kReset);
  auto explore_rng = stream(seed, kExplore);
  auto env_rng = stream(seed, kEnv);
  auto sample_rng = stream(seed, kSample);

  SeedRun run{seed, {}, {}, Agent(config.agent_config(kDim, kDim), init_rng),
              DataGraph(config.graph_config(kDim))};
  Agent& agent = run.agent;
  DataGraph& graph = run.graph;
  const bool sync = config.method == Method::qgraph;
  std::size_t train_steps = 0;

  for (std::size_t ep = 0; ep < config.episodes; ++ep) {
    const auto t0 = std::chrono::steady_clock::now();
    EpisodeRecord rec;
    rec.seed = seed;
    rec.episode = ep;

    std::array<double, 3> s = envs::pointmass_reset(env, reset_rng);
    for (std::size_t t = 0; t < env.episode_length; ++t) {
      const std::vector<double> a =
          agent.select_action(s, config.explore_sigma, explore_rng);
      const envs::EnvStep step = envs::pointmass_step(env, s, a, env_rng);
      // The commanded action is stored; environment noise makes the
      // transition non-deterministic from the agent's point of view.
      graph.add_transition(s, a, step.reward, step.next_state, step.terminal);
      agent.observe_reward(step.reward);
      rec.ret += step.reward;
      ++rec.steps;
      s = step.next_state;
      if (step.terminal) break;
    }

    if (sync) sync_bounds(graph);

    double clamp_sum = 0.0;
    std::size_t updates = 0;
    for (std::size_t epoch = 0; epoch < config.epochs_per_episode; ++epoch) {
      const std::size_t batches = agent.minibatches_per_epoch(graph.num_edges());
      for (std::size_t b = 0; b < batches; ++b) {
        const LossReport report = agent.train_step(graph, sample_rng);
        clamp_sum += report.clamp_rate;
        ++updates;
        if (config.log_losses) run.losses.push_back({train_steps, report});
        ++train_steps;
      }
    }
    rec.clamp_rate = updates ? clamp_sum / static_cast<double>(updates) : 0.0;
    rec.graph_edges = graph.num_edges();
    if (config.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    }
    run.records.push_back(rec);
  }
  return run;
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path dir = fs::path(config.output_dir) / config.name;
  fs::create_directories(dir);

  RunResult result;
  switch (config.experiment) {
    case Experiment::pointmass:
      result = run_pointmass(config, dir);
      break;
    case Experiment::baird:
      result = run_baird(config, dir);
      break;
    case Experiment::edu:
      result = run_edu(config, dir);
      break;
  }

  nlohmann::json meta;
  meta["artifact_version"] = kArtifactVersion;
  meta["kernels"] = simd::isa_name(simd::active().isa);
  meta["config"] = config_json(config);
  meta["seeds"] = status_json(result.status);
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
  write_file_atomic(dir / "config.ini", to_text(config));
  return result;
}

void write_episodes_csv(std::ostream& out, const std::vector<EpisodeRecord>& records) {
  out << "seed,episode,return,steps,clamp_rate,graph_edges,wall_ms\n";
  for (const auto& r : records) {
    out << r.seed << ',' << r.episode << ',' << fmt17(r.ret) << ',' << r.steps << ','
        << fmt17(r.clamp_rate) << ',' << r.graph_edges << ',' << fmt17(r.wall_ms) << '\n';
  }
}

std::vector<EpisodeRecord> read_episodes_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "seed,episode,return,steps,clamp_rate,graph_edges,wall_ms") {
    throw std::runtime_error("episodes.csv: unexpected header");
  }
  std::vector<EpisodeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EpisodeRecord r;
    char c1, c2, c3, c4, c5, c6;
    if (!(ls >> r.seed >> c1 >> r.episode >> c2 >> r.ret >> c3 >> r.steps >> c4 >>
          r.clamp_rate >> c5 >> r.graph_edges >> c6 >> r.wall_ms)) {
      throw std::runtime_error("episodes.csv: malformed row '" + line + "'");
    }
    out.push_back(r);
  }
  return out;
}

std::vector<EpisodeRecord> read_episodes_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  return read_episodes_csv(in);
}

std::vector<double> final_returns(const std::vector<EpisodeRecord>& records,
                                  std::size_t window) {
  std::vector<std::uint64_t> order;
  std::map<std::uint64_t, std::vector<const EpisodeRecord*>> by_seed;
  for (const auto& r : records) {
    if (!by_seed.contains(r.seed)) order.push_back(r.seed);
    by_seed[r.seed].push_back(&r);
  }
  std::vector<double> out;
  for (auto seed : order) {
    auto& eps = by_seed[seed];
    std::sort(eps.begin(), eps.end(),
              [](const EpisodeRecord* a, const EpisodeRecord* b) { return a->episode < b->episode; });
    const std::size_t n = std::min(window, eps.size());
    double s = 0.0;
    for (std::size_t i = eps.size() - n; i < eps.size(); ++i) s += eps[i]->ret;
    out.push_back(n ? s / static_cast<double>(n) : 0.0);
  }
  return out;
}

std::vector<double> QGridReport::stds(bool given) const {
  std::vector<double> out;
  for (const auto& p : pairs) {
    if (p.given == given) out.push_back(p.stddev);
  }
  return out;
}

std::vector<double> QGridReport::all_stds() const {
  std::vector<double> out;
  for (const auto& p : pairs) out.push_back(p.stddev);
  return out;
}

std::vector<std::array<double, 3>> variance_grid(const envs::PointMassConfig& env) {
  const double h = env.half_side();
  const double step = 2.0 * h / 3.0;
  std::array<double, 3> coords{};
  for (std::size_t i = 0; i < 3; ++i) coords[i] = -h + step * (static_cast<double>(i) + 0.5);
  std::vector<std::array<double, 3>> out;
  for (double x : coords) {
    for (double y : coords) {
      for (double z : coords) out.push_back({x, y, z});
    }
  }
  return out;
}

QGridReport prediction_variance(const ExperimentConfig& config,
                                const std::vector<PolicyCheckpoint>& checkpoints) {
  if (checkpoints.size() < 2) {
    throw std::invalid_argument("prediction_variance: need checkpoints of at least two seeds");
  }
  const auto& first = checkpoints.front();
  for (const auto& c : checkpoints) {
    if (!(c.actor.spec() == first.actor.spec()) || !(c.critic.spec() == first.critic.spec())) {
      throw nn::ShapeError("prediction_variance: checkpoint shapes differ across seeds");
    }
  }
  if (first.critic.input_size() != 6 || first.actor.input_size() != 3 ||
      first.actor.output_size() != 3) {
    throw nn::ShapeError("prediction_variance: expected point-mass networks");
  }

  QGridReport report;
  report.states = variance_grid(config.pointmass);
  const std::size_t n_given = config.given_actions.size();
  // values[state][action slot] over seeds; slot n_given is "pi".
  std::vector<std::vector<std::vector<double>>> values(
      report.states.size(), std::vector<std::vector<double>>(n_given + 1));

  const double scale = config.observation_scale;
  for (const auto& cp : checkpoints) {
    for (std::size_t si = 0; si < report.states.size(); ++si) {
      const auto& s = report.states[si];
      const std::vector<double> scaled{s[0] * scale, s[1] * scale, s[2] * scale};
      const std::vector<double> pi = nn::forward(cp.actor, scaled);
      for (std::size_t ai = 0; ai <= n_given; ++ai) {
        std::array<double, 3> a{};
        if (ai < n_given) {
          a = config.given_actions[ai];
        } else {
          a = {pi[0], pi[1], pi[2]};
        }
        const std::vector<double> input{scaled[0], scaled[1], scaled[2], a[0], a[1], a[2]};
        const double q = nn::forward(cp.critic, input).front();
        report.rows.push_back({cp.seed, s, a, ai < n_given, q});
        values[si][ai].push_back(q);
      }
    }
  }
  for (std::size_t si = 0; si < report.states.size(); ++si) {
    for (std::size_t ai = 0; ai <= n_given; ++ai) {
      report.pairs.push_back({si, ai, ai < n_given, sample_std(values[si][ai])});
    }
  }
  return report;
}

std::vector<PolicyCheckpoint> load_checkpoints(const fs::path& run_dir) {
  std::vector<std::pair<std::uint64_t, fs::path>> seed_dirs;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("seed_", 0) != 0) continue;
    if (!fs::exists(entry.path() / "critic.ckpt")) continue;
    seed_dirs.emplace_back(std::stoull(name.substr(5)), entry.path());
  }
  std::sort(seed_dirs.begin(), seed_dirs.end());
  std::vector<PolicyCheckpoint> out;
  for (const auto& [seed, path] : seed_dirs) {
    std::istringstream actor(read_file(path / "actor.ckpt"));
    std::istringstream critic(read_file(path / "critic.ckpt"));
    out.push_back({seed, nn::load_checkpoint(actor), nn::load_checkpoint(critic)});
  }
  return out;
}

void write_qgrid_csv(std::ostream& out, const QGridReport& report) {
  out << "seed,sx,sy,sz,ax,ay,az,source,q\n";
  for (const auto& r : report.rows) {
    out << r.seed << ',' << fmt17(r.state[0]) << ',' << fmt17(r.state[1]) << ','
        << fmt17(r.state[2]) << ',' << fmt17(r.action[0]) << ',' << fmt17(r.action[1]) << ','
        << fmt17(r.action[2]) << ',' << (r.given ? "given" : "pi") << ',' << fmt17(r.q)
        << '\n';
  }
}

QGridReport read_qgrid_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "seed,sx,sy,sz,ax,ay,az,source,q") {
    throw std::runtime_error("qgrid.csv: unexpected header");
  }
  QGridReport report;
  // Pairs are rebuilt by grouping on (state, source, action for 'given').
  std::map<std::string, std::pair<QGridPair, std::vector<double>>> groups;
  std::vector<std::string> order;
  std::map<std::string, std::size_t> state_index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9 || (cells[7] != "given" && cells[7] != "pi")) {
      throw std::runtime_error("qgrid.csv: malformed row '" + line + "'");
    }
    QGridRow r;
    r.seed = std::stoull(cells[0]);
    for (std::size_t i = 0; i < 3; ++i) {
      r.state[i] = std::stod(cells[1 + i]);
      r.action[i] = std::stod(cells[4 + i]);
    }
    r.given = cells[7] == "given";
    r.q = std::stod(cells[8]);
    report.rows.push_back(r);

    const std::string skey = cells[1] + "," + cells[2] + "," + cells[3];
    if (!state_index.contains(skey)) {
      state_index[skey] = report.states.size();
      report.states.push_back(r.state);
    }
    const std::string gkey =
        skey + "|" + cells[7] + (r.given ? "|" + cells[4] + "," + cells[5] + "," + cells[6] : "");
    auto it = groups.find(gkey);
    if (it == groups.end()) {
      QGridPair p;
      p.state_index = state_index[skey];
      p.given = r.given;
      it = groups.emplace(gkey, std::make_pair(p, std::vector<double>{})).first;
      order.push_back(gkey);
    }
    it->second.second.push_back(r.q);
  }
  std::map<std::size_t, std::size_t> next_action;
  for (const auto& key : order) {
    auto& [pair, qs] = groups[key];
    pair.action_index = next_action[pair.state_index]++;
    pair.stddev = sample_std(qs);
    report.pairs.push_back(pair);
  }
  return report;
}

MatrixAxis parse_axis(const std::string& name) {
  if (name == "lr") return MatrixAxis::lr;
  if (name == "presets") return MatrixAxis::presets;
  if (name == "capacity") return MatrixAxis::capacity;
  if (name == "noise") return MatrixAxis::noise;
  if (name == "variant") return MatrixAxis::variant;
  throw ConfigError("unknown matrix axis '" + name + "' (lr, presets, capacity, noise, variant)");
}

namespace {

void apply_variant(ExperimentConfig& c, const std::string& v) {
  // <method>[-za][-apriori][-empirical]
  std::stringstream ss(v);
  std::string part;
  bool first = true;
  c.zero_action = false;
  c.apriori_bounds = false;
  c.empirical_bounds = false;
  while (std::getline(ss, part, '-')) {
    if (first) {
      if (part == "vanilla") c.method = Method::vanilla;
      else if (part == "qgraph" || part == "qg") c.method = Method::qgraph;
      else throw ConfigError("variant '" + v + "': unknown method '" + part + "'");
      first = false;
    } else if (part == "za") {
      c.zero_action = true;
    } else if (part == "apriori") {
      c.apriori_bounds = true;
    } else if (part == "empirical") {
      c.empirical_bounds = true;
    } else {
      throw ConfigError("variant '" + v + "': unknown flag '" + part + "'");
    }
  }
  if (first) throw ConfigError("empty variant");
}

std::string label_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

}  // namespace

std::vector<MatrixCell> expand_axis(const ExperimentConfig& base, MatrixAxis axis,
                                    const std::vector<std::string>& values) {
  std::vector<std::string> vals = values;
  if (vals.empty()) {
    switch (axis) {
      case MatrixAxis::lr:
        for (const char* a : {"1e-2", "1e-3", "1e-4"}) {
          for (const char* c : {"1e-2", "1e-3", "1e-4"}) vals.push_back(std::string(a) + ":" + c);
        }
        break;
      case MatrixAxis::presets:
        vals = {"1e-3:1e-3", "1e-4:1e-3", "1e-4:1e-4"};
        break;
      case MatrixAxis::capacity:
        vals = {"1000", "5000", "inf"};
        break;
      case MatrixAxis::noise:
        vals = {"0", "0.1", "0.2"};
        break;
      case MatrixAxis::variant:
        vals = {"vanilla",         "vanilla-za",         "qgraph",
                "qgraph-za",       "vanilla-apriori",    "qgraph-apriori",
                "vanilla-empirical", "qgraph-empirical"};
        break;
    }
  }
  std::vector<MatrixCell> cells;
  for (const auto& v : vals) {
    MatrixCell cell{v, base};
    ExperimentConfig& c = cell.config;
    switch (axis) {
      case MatrixAxis::lr:
      case MatrixAxis::presets: {
        const auto colon = v.find(':');
        if (colon == std::string::npos) throw ConfigError("lr cell '" + v + "' is not actor:critic");
        apply_entry(c, "agent.actor_lr", v.substr(0, colon));
        apply_entry(c, "agent.critic_lr", v.substr(colon + 1));
        cell.label = "lr_a" + label_number(c.actor_lr) + "_c" + label_number(c.critic_lr);
        break;
      }
      case MatrixAxis::capacity:
        apply_entry(c, "graph.capacity", v);
        cell.label = "capacity_" + (c.capacity ? std::to_string(*c.capacity) : std::string("inf"));
        break;
      case MatrixAxis::noise:
        apply_entry(c, "env.noise_sigma", v);
        cell.label = "noise_" + label_number(c.pointmass.noise_sigma);
        break;
      case MatrixAxis::variant:
        apply_variant(c, v);
        cell.label = v;
        break;
    }
    c.output_dir = (fs::path(base.output_dir) / base.name).string();
    c.name = cell.label;
    cells.push_back(std::move(cell));
  }
  if (cells.empty()) throw ConfigError("matrix axis has no values");
  return cells;
}

MatrixResult run_matrix(const ExperimentConfig& base, MatrixAxis axis,
                        const std::vector<std::string>& values) {
  base.validate();
  const auto cells = expand_axis(base, axis, values);
  MatrixResult result;
  result.root = fs::path(base.output_dir) / base.name;
  fs::create_directories(result.root);
  nlohmann::json manifest;
  manifest["artifact_version"] = kArtifactVersion;
  manifest["base_config"] = config_json(base);
  nlohmann::json given = nlohmann::json::array();
  for (const auto& a : base.given_actions) given.push_back({a[0], a[1], a[2]});
  manifest["given_actions"] = given;
  manifest["runs"] = nlohmann::json::array();
  for (const auto& cell : cells) {
    nlohmann::json entry = {{"label", cell.label}, {"dir", cell.label}};
    std::string error;
    try {
      const RunResult r = run_experiment(cell.config);
      entry["seeds"] = status_json(r.status);
      if (!r.ok()) error = "one or more seeds failed";
    } catch (const std::exception& e) {
      error = e.what();
    }
    entry["status"] = error.empty() ? "ok" : "failed";
    if (!error.empty()) entry["error"] = error;
    manifest["runs"].push_back(entry);
    result.run_dirs.push_back(result.root / cell.label);
    result.errors.push_back(error);
    write_file_atomic(result.root / "manifest.json", manifest.dump(2) + "\n");
  }
  return result;
}

}  // namespace qgraph
