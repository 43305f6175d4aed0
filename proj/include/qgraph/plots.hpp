#pragma once

// SVG learning curves (mean with a +-sigma/sqrt(n) band) and box plots of
// prediction standard deviations.

#include <filesystem>
#include <string>
#include <vector>

#include "qgraph/harness.hpp"

namespace qgraph {

struct CurveSeries {
  std::string label;
  std::vector<double> mean;  // per episode
  std::vector<double> sem;   // sigma / sqrt(n); 0 with a single seed
};

CurveSeries learning_curve(const std::string& label,
                           const std::vector<EpisodeRecord>& records);

// Quartiles by linear interpolation; whiskers reach the most extreme samples
// within 1.5 IQR of the box; everything beyond is an outlier.
struct BoxStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

double quantile(std::vector<double> values, double p);
BoxStats box_stats(const std::vector<double>& values);

struct BoxGroup {
  std::string label;
  BoxStats stats;
};

std::string learning_curve_svg(const std::vector<CurveSeries>& series);
std::string box_plot_svg(const std::vector<BoxGroup>& groups);

// Writes learning_curves.svg for every run directory holding episodes.csv
// and qgrid_box.svg for those holding qgrid.csv. Returns the written files.
std::vector<std::filesystem::path> emit_plots(
    const std::vector<std::filesystem::path>& run_dirs,
    const std::filesystem::path& out_dir);

}  // namespace qgraph
