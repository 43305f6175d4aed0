#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "qgraph/plots.hpp"

namespace fs = std::filesystem;
using namespace qgraph;

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({3.0, 1.0, 2.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({3.0, 1.0, 2.0, 4.0}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile({3.0, 1.0, 2.0, 4.0}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({7.0}, 0.3), 7.0);
  EXPECT_THROW(quantile({}, 0.5), std::invalid_argument);
}

TEST(BoxStats, WhiskersStopAtFences) {
  const auto b = box_stats({1, 2, 3, 4, 5, 6, 7, 8, 9, 100});
  EXPECT_DOUBLE_EQ(b.median, 5.5);
  EXPECT_DOUBLE_EQ(b.q1, 3.25);
  EXPECT_DOUBLE_EQ(b.q3, 7.75);
  EXPECT_DOUBLE_EQ(b.whisker_low, 1.0);
  EXPECT_DOUBLE_EQ(b.whisker_high, 9.0);
  ASSERT_EQ(b.outliers.size(), 1u);
  EXPECT_DOUBLE_EQ(b.outliers[0], 100.0);
  EXPECT_THROW(box_stats({}), std::invalid_argument);
}

TEST(LearningCurve, MeanAndStandardError) {
  std::vector<EpisodeRecord> recs{{0, 0, -1.0}, {1, 0, -3.0}, {0, 1, 2.0}, {1, 1, 2.0}};
  const auto c = learning_curve("x", recs);
  ASSERT_EQ(c.mean.size(), 2u);
  EXPECT_DOUBLE_EQ(c.mean[0], -2.0);
  // Sample std sqrt(2) over sqrt(2) seeds.
  EXPECT_DOUBLE_EQ(c.sem[0], 1.0);
  EXPECT_DOUBLE_EQ(c.sem[1], 0.0);

  const auto single = learning_curve("y", {{4, 0, -5.0}, {4, 1, -4.0}});
  EXPECT_EQ(single.sem, (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(learning_curve("z", {}), std::invalid_argument);
}

TEST(Svg, WellFormedOutput) {
  const auto curve = learning_curve("qgraph", {{0, 0, -1.0}, {0, 1, -0.5}, {1, 0, -2.0}, {1, 1, -0.2}});
  const std::string a = learning_curve_svg({curve});
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  EXPECT_NE(a.find("qgraph"), std::string::npos);

  const std::string b = box_plot_svg({{"vanilla", box_stats({0.1, 0.2, 0.3, 5.0})}});
  EXPECT_EQ(b.rfind("<svg", 0), 0u);
  EXPECT_NE(b.find("</svg>"), std::string::npos);
  EXPECT_NE(b.find("vanilla"), std::string::npos);
}

TEST(EmitPlots, WritesFilesPerAvailableInput) {
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("qgraph_plots_" + std::to_string(rd()));
  const fs::path run = root / "run_a";
  fs::create_directories(run);
  {
    std::ofstream out(run / "episodes.csv");
    write_episodes_csv(out, {{0, 0, -3.0}, {0, 1, -1.0}});
  }
  const auto curves_only = emit_plots({run}, root / "plots");
  ASSERT_EQ(curves_only.size(), 1u);
  EXPECT_EQ(curves_only[0].filename(), "learning_curves.svg");
  EXPECT_TRUE(fs::exists(curves_only[0]));

  QGridReport report;
  report.rows = {{0, {0, 0, 0}, {0, 0, 0}, true, 1.0}, {1, {0, 0, 0}, {0, 0, 0}, true, 2.0},
                 {0, {0, 0, 0}, {1, 0, 0}, false, 0.5}, {1, {0, 0, 0}, {1, 0, 0}, false, 0.7}};
  {
    std::ofstream out(run / "qgrid.csv");
    write_qgrid_csv(out, report);
  }
  const auto both = emit_plots({run}, root / "plots");
  ASSERT_EQ(both.size(), 2u);
  EXPECT_EQ(both[1].filename(), "qgrid_box.svg");

  EXPECT_THROW(emit_plots({}, root / "plots"), std::invalid_argument);
  EXPECT_THROW(emit_plots({root / "empty"}, root / "plots"), std::invalid_argument);
  fs::remove_all(root);
}
