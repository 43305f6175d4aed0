#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qgraph/config.hpp"
#include "qgraph/harness.hpp"
#include "qgraph/plots.hpp"

namespace fs = std::filesystem;
using namespace qgraph;

namespace {

ExperimentConfig config_for_run_dir(const fs::path& dir) {
  ExperimentConfig config;
  if (fs::exists(dir / "config.ini")) apply_entries(config, read_config_file((dir / "config.ini").string()));
  return config;
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides) {
  const ExperimentConfig config = load_config(path, overrides);
  const RunResult r = run_experiment(config);
  for (const auto& s : r.status) {
    if (!s.ok) std::cerr << "seed " << s.seed << " failed: " << s.error << '\n';
  }
  if (config.experiment == Experiment::pointmass && !r.records.empty()) {
    const auto finals = final_returns(r.records, 20);
    double m = 0.0;
    for (double x : finals) m += x;
    std::cout << "mean final-20 return " << m / static_cast<double>(finals.size()) << '\n';
  }
  std::cout << r.dir.string() << '\n';
  return r.ok() ? 0 : 1;
}

int cmd_matrix(const std::string& path, const std::string& axis,
               const std::vector<std::string>& values,
               const std::vector<std::string>& overrides) {
  const ExperimentConfig config = load_config(path, overrides);
  const MatrixResult r = run_matrix(config, parse_axis(axis), values);
  int failed = 0;
  for (std::size_t i = 0; i < r.run_dirs.size(); ++i) {
    std::cout << (r.errors[i].empty() ? "ok     " : "failed ") << r.run_dirs[i].string();
    if (!r.errors[i].empty()) {
      std::cout << "  (" << r.errors[i] << ')';
      ++failed;
    }
    std::cout << '\n';
  }
  std::cout << (r.root / "manifest.json").string() << '\n';
  return failed ? 1 : 0;
}

int cmd_variance(const std::vector<std::string>& runs) {
  for (const auto& run : runs) {
    const fs::path dir(run);
    const ExperimentConfig config = config_for_run_dir(dir);
    const QGridReport report = prediction_variance(config, load_checkpoints(dir));
    std::ostringstream os;
    write_qgrid_csv(os, report);
    write_file_atomic(dir / "qgrid.csv", os.str());
    const double med_given = quantile(report.stds(true), 0.5);
    const double med_pi = quantile(report.stds(false), 0.5);
    std::cout << dir.string() << ": median std given " << med_given << ", pi " << med_pi
              << '\n';
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& runs, const std::string& out) {
  std::vector<fs::path> dirs(runs.begin(), runs.end());
  for (const auto& p : emit_plots(dirs, out)) std::cout << p.string() << '\n';
  return 0;
}

int cmd_audit(const std::string& run) {
  const fs::path dir(run);
  const ExperimentConfig config = config_for_run_dir(dir);
  int bad = 0;
  std::size_t graphs = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path graph_file = entry.path() / "graph.txt";
    if (!entry.is_directory() || !fs::exists(graph_file)) continue;
    ++graphs;
    std::ifstream in(graph_file);
    GraphConfig gc = config.graph_config(3);
    // Restored graphs may exceed a capacity recorded for a different cell.
    gc.capacity.reset();
    const DataGraph graph = DataGraph::restore(in, gc);
    const auto problems = graph.audit();
    std::cout << graph_file.string() << ": " << graph.num_edges() << " edges, "
              << problems.size() << " violations\n";
    for (const auto& p : problems) std::cout << "  " << p << '\n';
    bad += problems.empty() ? 0 : 1;
  }
  if (graphs == 0) {
    std::cerr << "no graph.txt found under " << dir.string() << " (run with dump_graph = true)\n";
    return 2;
  }
  return bad ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Q-graph bounded Q-learning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "run one experiment configuration");
  run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--override", overrides, "key=value override (repeatable)");

  std::string axis;
  std::vector<std::string> values;
  auto* matrix = app.add_subcommand("matrix", "run a configuration over one axis");
  matrix->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  matrix->add_option("--axis", axis, "lr | presets | capacity | noise | variant")->required();
  matrix->add_option("--values", values, "axis values (defaults per axis)");
  matrix->add_option("--override", overrides, "key=value override (repeatable)");

  std::vector<std::string> runs;
  auto* variance = app.add_subcommand("variance", "write qgrid.csv for point-mass run directories");
  variance->add_option("--runs", runs, "run directories")->required()->check(CLI::ExistingDirectory);

  std::string out_dir;
  auto* plot = app.add_subcommand("plot", "emit SVG learning curves and box plots");
  plot->add_option("--runs", runs, "run directories")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--out", out_dir, "output directory")->required();

  std::string audit_dir;
  auto* audit = app.add_subcommand("audit", "re-check graph invariants of dumped graphs");
  audit->add_option("--run", audit_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, overrides);
    if (*matrix) return cmd_matrix(config_path, axis, values, overrides);
    if (*variance) return cmd_variance(runs);
    if (*plot) return cmd_plot(runs, out_dir);
    if (*audit) return cmd_audit(audit_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
