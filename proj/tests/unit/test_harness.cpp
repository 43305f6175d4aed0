#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "qgraph/harness.hpp"

namespace fs = std::filesystem;
using namespace qgraph;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("qgraph_test_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ExperimentConfig tiny_pointmass(const fs::path& out) {
  ExperimentConfig c;
  c.name = "tiny";
  c.experiment = Experiment::pointmass;
  c.method = Method::qgraph;
  c.episodes = 3;
  c.seeds = {0, 1};
  c.hidden_width = 8;
  c.hidden_layers = 2;
  c.epochs_per_episode = 2;
  c.max_minibatches_per_epoch = 2;
  c.minibatch_size = 8;
  c.pointmass.episode_length = 30;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST(EpisodesCsv, RoundTripsExactly) {
  std::vector<EpisodeRecord> recs{{3, 0, -12.5, 200, 0.25, 200, 0.0},
                                  {3, 1, -0.1, 17, 1.0 / 3.0, 217, 4.5},
                                  {7, 0, -1e-300, 1, 0.0, 1, 0.0}};
  std::stringstream ss;
  write_episodes_csv(ss, recs);
  const auto back = read_episodes_csv(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].seed, recs[i].seed);
    EXPECT_EQ(back[i].episode, recs[i].episode);
    EXPECT_EQ(back[i].ret, recs[i].ret);
    EXPECT_EQ(back[i].steps, recs[i].steps);
    EXPECT_EQ(back[i].clamp_rate, recs[i].clamp_rate);
    EXPECT_EQ(back[i].graph_edges, recs[i].graph_edges);
    EXPECT_EQ(back[i].wall_ms, recs[i].wall_ms);
  }
}

TEST(EpisodesCsv, RejectsBadHeaderAndRows) {
  std::istringstream bad_header("seed,episode\n");
  EXPECT_THROW(read_episodes_csv(bad_header), std::runtime_error);
  std::istringstream bad_row("seed,episode,return,steps,clamp_rate,graph_edges,wall_ms\n1,2,x\n");
  EXPECT_THROW(read_episodes_csv(bad_row), std::runtime_error);
}

TEST(FinalReturns, AveragesLastWindowPerSeedInFirstSeenOrder) {
  std::vector<EpisodeRecord> recs;
  for (std::size_t e = 0; e < 5; ++e) recs.push_back({9, e, -double(e), 1, 0, 0, 0});
  for (std::size_t e = 0; e < 3; ++e) recs.push_back({2, e, 10.0 * double(e), 1, 0, 0, 0});
  const auto f = final_returns(recs, 2);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_DOUBLE_EQ(f[0], -3.5);
  EXPECT_DOUBLE_EQ(f[1], 15.0);
  // A window longer than the run averages everything.
  EXPECT_DOUBLE_EQ(final_returns(recs, 100)[0], -2.0);
}

TEST(VarianceGrid, CellCentresOfTheCube) {
  envs::PointMassConfig env;
  const auto g = variance_grid(env);
  ASSERT_EQ(g.size(), 27u);
  const double h = env.half_side();
  for (const auto& p : g) {
    for (double x : p) {
      EXPECT_GT(x, -h);
      EXPECT_LT(x, h);
    }
  }
  EXPECT_NEAR(g.front()[0], -h + h / 3.0, 1e-15);
  EXPECT_NEAR(g[13][0], 0.0, 1e-15);
  EXPECT_NEAR(g[13][2], 0.0, 1e-15);
}

TEST(PredictionVariance, RequiresTwoCompatibleCheckpoints) {
  ExperimentConfig c;
  std::mt19937_64 rng(1);
  const nn::InitScheme init{nn::InitScheme::Kind::gaussian, 0.0, 0.1};
  auto actor = nn::Mlp::init({{3, 4, 3}, nn::Activation::relu, nn::Activation::tanh}, init, rng);
  auto critic = nn::Mlp::init({{6, 4, 1}, nn::Activation::relu, nn::Activation::linear}, init, rng);
  EXPECT_THROW(prediction_variance(c, {{0, actor, critic}}), std::invalid_argument);

  auto wider = nn::Mlp::init({{6, 5, 1}, nn::Activation::relu, nn::Activation::linear}, init, rng);
  EXPECT_THROW(prediction_variance(c, {{0, actor, critic}, {1, actor, wider}}), nn::ShapeError);

  auto wrong = nn::Mlp::init({{2, 4, 1}, nn::Activation::relu, nn::Activation::linear}, init, rng);
  EXPECT_THROW(prediction_variance(c, {{0, actor, wrong}, {1, actor, wrong}}), nn::ShapeError);
}

TEST(PredictionVariance, SampleStdAcrossSeeds) {
  ExperimentConfig c;
  c.given_actions = {{0, 0, 0}, {1, 0, 0}};
  const nn::LayerSpec actor_spec{{3, 3}, nn::Activation::linear, nn::Activation::tanh};
  const nn::LayerSpec critic_spec{{6, 1}, nn::Activation::linear, nn::Activation::linear};
  // Critics are constants 1, 2 and 6: every pair has sample std
  // sqrt(((1-3)^2 + (2-3)^2 + (6-3)^2) / 2) = sqrt(7).
  std::vector<PolicyCheckpoint> cps;
  for (double v : {1.0, 2.0, 6.0}) {
    nn::Mlp actor(actor_spec);
    nn::Mlp critic(critic_spec);
    critic.bias(0)[0] = v;
    cps.push_back({static_cast<std::uint64_t>(v), actor, critic});
  }
  const auto r = prediction_variance(c, cps);
  EXPECT_EQ(r.states.size(), 27u);
  EXPECT_EQ(r.rows.size(), 3u * 27u * 3u);
  EXPECT_EQ(r.pairs.size(), 27u * 3u);
  EXPECT_EQ(r.stds(true).size(), 27u * 2u);
  EXPECT_EQ(r.stds(false).size(), 27u);
  EXPECT_EQ(r.all_stds().size(), 27u * 3u);
  for (double s : r.all_stds()) EXPECT_NEAR(s, std::sqrt(7.0), 1e-12);
}

TEST(QGridCsv, RoundTrip) {
  ExperimentConfig c;
  c.given_actions = {{0, 0, 0}};
  std::mt19937_64 rng(4);
  const nn::InitScheme init{nn::InitScheme::Kind::gaussian, 0.0, 0.3};
  std::vector<PolicyCheckpoint> cps;
  for (std::uint64_t s = 0; s < 3; ++s) {
    cps.push_back(
        {s, nn::Mlp::init({{3, 4, 3}, nn::Activation::relu, nn::Activation::tanh}, init, rng),
         nn::Mlp::init({{6, 4, 1}, nn::Activation::relu, nn::Activation::linear}, init, rng)});
  }
  const auto r = prediction_variance(c, cps);
  std::stringstream ss;
  write_qgrid_csv(ss, r);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "seed,sx,sy,sz,ax,ay,az,source,q");
  const auto back = read_qgrid_csv(ss);
  ASSERT_EQ(back.rows.size(), r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].seed, r.rows[i].seed);
    EXPECT_EQ(back.rows[i].state, r.rows[i].state);
    EXPECT_EQ(back.rows[i].action, r.rows[i].action);
    EXPECT_EQ(back.rows[i].given, r.rows[i].given);
    EXPECT_EQ(back.rows[i].q, r.rows[i].q);
  }
  const auto a = r.all_stds();
  const auto b = back.all_stds();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Matrix, ParseAxis) {
  EXPECT_EQ(parse_axis("lr"), MatrixAxis::lr);
  EXPECT_EQ(parse_axis("variant"), MatrixAxis::variant);
  EXPECT_THROW(parse_axis("learning_rate"), ConfigError);
}

TEST(Matrix, ExpandAxisDefaultsAndLabels) {
  ExperimentConfig base;
  base.name = "sweep";
  base.output_dir = "out";
  const auto lr = expand_axis(base, MatrixAxis::lr);
  ASSERT_EQ(lr.size(), 9u);
  EXPECT_EQ(lr.front().label, "lr_a0.01_c0.01");
  EXPECT_EQ(lr.back().label, "lr_a0.0001_c0.0001");
  EXPECT_DOUBLE_EQ(lr[1].config.critic_lr, 1e-3);
  EXPECT_EQ(lr[1].config.name, lr[1].label);
  EXPECT_EQ(fs::path(lr[1].config.output_dir), fs::path("out") / "sweep");

  EXPECT_EQ(expand_axis(base, MatrixAxis::presets).size(), 3u);

  const auto cap = expand_axis(base, MatrixAxis::capacity);
  ASSERT_EQ(cap.size(), 3u);
  EXPECT_EQ(cap[0].label, "capacity_1000");
  EXPECT_EQ(cap[0].config.capacity, std::optional<std::size_t>(1000));
  EXPECT_EQ(cap[2].label, "capacity_inf");
  EXPECT_FALSE(cap[2].config.capacity.has_value());

  const auto noise = expand_axis(base, MatrixAxis::noise, {"0.05"});
  ASSERT_EQ(noise.size(), 1u);
  EXPECT_EQ(noise[0].label, "noise_0.05");
  EXPECT_DOUBLE_EQ(noise[0].config.pointmass.noise_sigma, 0.05);

  const auto variants = expand_axis(base, MatrixAxis::variant);
  EXPECT_EQ(variants.size(), 8u);
  const auto za = expand_axis(base, MatrixAxis::variant, {"qgraph-za-empirical"});
  EXPECT_EQ(za[0].config.method, Method::qgraph);
  EXPECT_TRUE(za[0].config.zero_action);
  EXPECT_TRUE(za[0].config.empirical_bounds);
  EXPECT_FALSE(za[0].config.apriori_bounds);
}

TEST(Matrix, ExpandAxisRejectsMalformedValues) {
  ExperimentConfig base;
  EXPECT_THROW(expand_axis(base, MatrixAxis::lr, {"1e-3"}), ConfigError);
  EXPECT_THROW(expand_axis(base, MatrixAxis::variant, {"dqn"}), ConfigError);
  EXPECT_THROW(expand_axis(base, MatrixAxis::variant, {"qgraph-fast"}), ConfigError);
  EXPECT_THROW(expand_axis(base, MatrixAxis::capacity, {"lots"}), ConfigError);
}

TEST(WriteFileAtomic, ReplacesContentAndLeavesNoTemp) {
  TempDir tmp;
  const fs::path p = tmp.path() / "x.txt";
  write_file_atomic(p, "first");
  write_file_atomic(p, "second");
  EXPECT_EQ(slurp(p), "second");
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
  EXPECT_THROW(write_file_atomic(tmp.path() / "missing" / "x.txt", "x"), std::runtime_error);
}

TEST(RunExperiment, PointmassWritesArtifactsDeterministically) {
  TempDir tmp;
  ExperimentConfig c = tiny_pointmass(tmp.path() / "a");
  c.dump_graph = true;
  c.log_losses = true;
  const RunResult r1 = run_experiment(c);
  ASSERT_TRUE(r1.ok());
  EXPECT_EQ(r1.records.size(), 6u);
  for (const char* f : {"episodes.csv", "meta.json", "config.ini"}) {
    EXPECT_TRUE(fs::exists(r1.dir / f)) << f;
  }
  for (const char* f : {"actor.ckpt", "critic.ckpt", "graph.txt", "losses.csv"}) {
    EXPECT_TRUE(fs::exists(r1.dir / "seed_1" / f)) << f;
  }
  const auto meta = nlohmann::json::parse(slurp(r1.dir / "meta.json"));
  EXPECT_EQ(meta["artifact_version"], kArtifactVersion);
  EXPECT_EQ(meta["seeds"].size(), 2u);

  c.output_dir = (tmp.path() / "b").string();
  const RunResult r2 = run_experiment(c);
  EXPECT_EQ(slurp(r1.dir / "episodes.csv"), slurp(r2.dir / "episodes.csv"));
  EXPECT_EQ(slurp(r1.dir / "seed_0" / "critic.ckpt"), slurp(r2.dir / "seed_0" / "critic.ckpt"));
  EXPECT_EQ(slurp(r1.dir / "seed_0" / "graph.txt"), slurp(r2.dir / "seed_0" / "graph.txt"));

  // The saved config reproduces the run.
  ExperimentConfig reloaded = load_config((r1.dir / "config.ini").string());
  reloaded.output_dir = (tmp.path() / "c").string();
  const RunResult r3 = run_experiment(reloaded);
  EXPECT_EQ(slurp(r1.dir / "episodes.csv"), slurp(r3.dir / "episodes.csv"));

  const auto ckpts = load_checkpoints(r1.dir);
  ASSERT_EQ(ckpts.size(), 2u);
  EXPECT_EQ(ckpts[0].seed, 0u);
  EXPECT_EQ(ckpts[1].critic.input_size(), 6u);
  EXPECT_EQ(ckpts[1].actor.output_size(), 3u);
}

TEST(RunExperiment, CapacityIsNeverExceeded) {
  TempDir tmp;
  ExperimentConfig c = tiny_pointmass(tmp.path());
  c.capacity = 25;
  c.seeds = {3};
  c.dump_graph = true;
  const RunResult r = run_experiment(c);
  ASSERT_TRUE(r.ok());
  for (const auto& rec : r.records) EXPECT_LE(rec.graph_edges, 25u);
  EXPECT_EQ(r.records.back().graph_edges, 25u);

  std::ifstream in(r.dir / "seed_3" / "graph.txt");
  const DataGraph g = DataGraph::restore(in, c.graph_config(3));
  EXPECT_EQ(g.num_edges(), 25u);
  EXPECT_TRUE(g.audit().empty());
}

TEST(RunExperiment, QgraphWithoutGraphBoundsMatchesVanilla) {
  TempDir tmp;
  ExperimentConfig qg = tiny_pointmass(tmp.path());
  qg.name = "qg";
  qg.graph_bounds = false;
  ExperimentConfig van = qg;
  van.name = "van";
  van.method = Method::vanilla;
  const RunResult a = run_experiment(qg);
  const RunResult b = run_experiment(van);
  ASSERT_TRUE(a.ok());
  ASSERT_TRUE(b.ok());
  EXPECT_EQ(slurp(a.dir / "episodes.csv"), slurp(b.dir / "episodes.csv"));
  EXPECT_EQ(slurp(a.dir / "seed_1" / "critic.ckpt"), slurp(b.dir / "seed_1" / "critic.ckpt"));
}

TEST(RunExperiment, InvalidConfigThrowsBeforeWriting) {
  TempDir tmp;
  ExperimentConfig c = tiny_pointmass(tmp.path());
  c.seeds.clear();
  EXPECT_THROW(run_experiment(c), ConfigError);
  EXPECT_FALSE(fs::exists(tmp.path() / "tiny"));
}

TEST(RunExperiment, BairdCsvHasOneRowPerRecordedStep) {
  TempDir tmp;
  ExperimentConfig c;
  c.name = "baird";
  c.experiment = Experiment::baird;
  c.method = Method::qgraph;
  c.seeds = {0, 1};
  c.baird.steps = 100;
  c.baird.record_every = 10;
  c.output_dir = tmp.path().string();
  const RunResult r = run_experiment(c);
  ASSERT_TRUE(r.ok());
  std::istringstream csv(slurp(r.dir / "baird.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "seed,step,w0,w1,w2,w3,w4,w5,w6,w7,v1,v2,v3,v4,v5,v6,v7");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 16);
  }
  EXPECT_EQ(rows, 2u * 11u);
}

TEST(RunExperiment, EduCsvCoversEverySubset) {
  TempDir tmp;
  ExperimentConfig c;
  c.name = "edu";
  c.experiment = Experiment::edu;
  c.seeds = {0};
  c.edu.epochs = 20;
  c.output_dir = tmp.path().string();
  const RunResult r = run_experiment(c);
  ASSERT_TRUE(r.ok());
  std::istringstream csv(slurp(r.dir / "edu.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "mask,transition,class,seed,q");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  // Subsets of four transitions hold 32 members in total.
  EXPECT_EQ(rows, 32u);
}

TEST(RunMatrix, ManifestListsEveryCell) {
  TempDir tmp;
  ExperimentConfig c = tiny_pointmass(tmp.path());
  c.name = "m";
  c.seeds = {0};
  c.episodes = 1;
  const MatrixResult r = run_matrix(c, MatrixAxis::variant, {"vanilla", "qgraph-za"});
  ASSERT_EQ(r.run_dirs.size(), 2u);
  for (const auto& e : r.errors) EXPECT_TRUE(e.empty()) << e;
  EXPECT_EQ(r.run_dirs[1], tmp.path() / "m" / "qgraph-za");
  EXPECT_TRUE(fs::exists(r.run_dirs[1] / "episodes.csv"));
  const auto manifest = nlohmann::json::parse(slurp(r.root / "manifest.json"));
  ASSERT_EQ(manifest["runs"].size(), 2u);
  EXPECT_EQ(manifest["runs"][0]["label"], "vanilla");
  EXPECT_EQ(manifest["runs"][1]["status"], "ok");
  EXPECT_EQ(manifest["given_actions"].size(), c.given_actions.size());
}
