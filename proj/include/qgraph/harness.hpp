#pragma once

// Experiment runner: point-mass training runs, Baird and educational sweeps,
// prediction-variance probes, run matrices, and the on-disk record formats.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qgraph/agents.hpp"
#include "qgraph/config.hpp"
#include "qgraph/graph_memory.hpp"

namespace qgraph {

inline constexpr const char* kArtifactVersion = "0.1.0";

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::size_t episode = 0;
  double ret = 0.0;  // undiscounted
  std::size_t steps = 0;
  double clamp_rate = 0.0;
  std::size_t graph_edges = 0;
  double wall_ms = 0.0;
};

struct LossRow {
  std::size_t step = 0;
  LossReport report;
};

// One point-mass training run, kept in memory.
struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> records;
  std::vector<LossRow> losses;  // filled only with log_losses
  Agent agent;
  DataGraph graph;
};

SeedRun run_pointmass_seed(const ExperimentConfig& config, std::uint64_t seed);

struct SeedStatus {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
};

struct RunResult {
  std::filesystem::path dir;
  std::vector<EpisodeRecord> records;
  std::vector<SeedStatus> status;
  bool ok() const;
};

// Validates, then runs every seed and writes into output_dir/name:
// episodes.csv (point mass), baird.csv or edu.csv, meta.json, and per seed
// seed_<n>/{actor,critic}.ckpt (plus graph.txt and losses.csv when enabled).
RunResult run_experiment(const ExperimentConfig& config);

void write_episodes_csv(std::ostream& out, const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> read_episodes_csv(std::istream& in);
std::vector<EpisodeRecord> read_episodes_csv(const std::filesystem::path& path);

// Mean return over the last `window` episodes of each seed, in seed order.
std::vector<double> final_returns(const std::vector<EpisodeRecord>& records,
                                  std::size_t window);

// ------------------------------------------------------ prediction variance

struct PolicyCheckpoint {
  std::uint64_t seed = 0;
  nn::Mlp actor;
  nn::Mlp critic;
};

struct QGridRow {
  std::uint64_t seed = 0;
  std::array<double, 3> state{};
  std::array<double, 3> action{};
  bool given = true;  // false: the seed's own actor action ("pi")
  double q = 0.0;
};

struct QGridPair {
  std::size_t state_index = 0;
  std::size_t action_index = 0;  // given_actions.size() marks "pi"
  bool given = true;
  double stddev = 0.0;
};

struct QGridReport {
  std::vector<std::array<double, 3>> states;
  std::vector<QGridRow> rows;
  std::vector<QGridPair> pairs;

  std::vector<double> stds(bool given) const;
  std::vector<double> all_stds() const;
};

// 3 x 3 x 3 cell centres of the cube.
std::vector<std::array<double, 3>> variance_grid(const envs::PointMassConfig& env);

QGridReport prediction_variance(const ExperimentConfig& config,
                                const std::vector<PolicyCheckpoint>& checkpoints);

std::vector<PolicyCheckpoint> load_checkpoints(const std::filesystem::path& run_dir);

void write_qgrid_csv(std::ostream& out, const QGridReport& report);
QGridReport read_qgrid_csv(std::istream& in);

// --------------------------------------------------------------- matrices

enum class MatrixAxis { lr, presets, capacity, noise, variant };

MatrixAxis parse_axis(const std::string& name);

struct MatrixCell {
  std::string label;
  ExperimentConfig config;
};

// Empty `values` selects the axis defaults; entries are parsed per axis
// (lr pairs as "actor:critic", capacities as integers or "inf", noise as
// reals, variants by name).
std::vector<MatrixCell> expand_axis(const ExperimentConfig& base, MatrixAxis axis,
                                    const std::vector<std::string>& values = {});

struct MatrixResult {
  std::filesystem::path root;
  std::vector<std::filesystem::path> run_dirs;
  std::vector<std::string> errors;  // per cell, empty when fine
};

// Each cell runs into output_dir/name/<label>; manifest.json lists all cells.
MatrixResult run_matrix(const ExperimentConfig& base, MatrixAxis axis,
                        const std::vector<std::string>& values = {});

// Writes `content` to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace qgraph
