#include "qgraph/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace qgraph {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 20.0;
constexpr double kBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

std::string tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const {
    return kLeft + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (kHeight - kTop - kBottom);
  }
};

void axes(std::ostringstream& svg, const Frame& f, const std::string& xlabel,
          const std::string& ylabel, bool x_ticks) {
  const double bottom = kHeight - kBottom;
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << bottom << "\" x2=\"" << kWidth - kRight
      << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(y) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << tick(y) << "</text>\n";
    if (x_ticks) {
      const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
      svg << "<text x=\"" << num(f.px(x)) << "\" y=\"" << bottom + 16
          << "\" font-size=\"11\" text-anchor=\"middle\">" << tick(x) << "</text>\n";
    }
  }
  svg << "<text x=\"" << num((kLeft + kWidth - kRight) / 2) << "\" y=\"" << kHeight - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  svg << "<text x=\"14\" y=\"" << num((kTop + kHeight - kBottom) / 2)
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << num((kTop + kHeight - kBottom) / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

std::string header() {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return s.str();
}

}  // namespace

CurveSeries learning_curve(const std::string& label,
                           const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw std::invalid_argument("learning_curve: no records");
  std::map<std::size_t, std::vector<double>> by_episode;
  for (const auto& r : records) by_episode[r.episode].push_back(r.ret);
  CurveSeries c;
  c.label = label;
  for (const auto& [ep, rets] : by_episode) {
    const double n = static_cast<double>(rets.size());
    double m = 0.0;
    for (double x : rets) m += x;
    m /= n;
    double var = 0.0;
    for (double x : rets) var += (x - m) * (x - m);
    c.mean.push_back(m);
    c.sem.push_back(rets.size() > 1 ? std::sqrt(var / (n - 1.0)) / std::sqrt(n) : 0.0);
  }
  return c;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

BoxStats box_stats(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("box_stats: empty sample");
  BoxStats b;
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo_fence = b.q1 - 1.5 * iqr;
  const double hi_fence = b.q3 + 1.5 * iqr;
  b.whisker_low = std::numeric_limits<double>::infinity();
  b.whisker_high = -std::numeric_limits<double>::infinity();
  for (double x : values) {
    if (x < lo_fence || x > hi_fence) {
      b.outliers.push_back(x);
    } else {
      b.whisker_low = std::min(b.whisker_low, x);
      b.whisker_high = std::max(b.whisker_high, x);
    }
  }
  std::sort(b.outliers.begin(), b.outliers.end());
  return b;
}

std::string learning_curve_svg(const std::vector<CurveSeries>& series) {
  if (series.empty()) throw std::invalid_argument("learning_curve_svg: no series");
  Frame f{0.0, 1.0, std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  for (const auto& s : series) {
    if (s.mean.empty()) throw std::invalid_argument("learning_curve_svg: empty series");
    f.x1 = std::max(f.x1, static_cast<double>(s.mean.size() - 1));
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      f.y0 = std::min(f.y0, s.mean[i] - s.sem[i]);
      f.y1 = std::max(f.y1, s.mean[i] + s.sem[i]);
    }
  }
  if (f.y1 - f.y0 < 1e-12) {
    f.y0 -= 1.0;
    f.y1 += 1.0;
  }

  std::ostringstream svg;
  svg << header();
  axes(svg, f, "episode", "return", true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      svg << num(f.px(static_cast<double>(i))) << ',' << num(f.py(s.mean[i] + s.sem[i])) << ' ';
    }
    for (std::size_t i = s.mean.size(); i-- > 0;) {
      svg << num(f.px(static_cast<double>(i))) << ',' << num(f.py(s.mean[i] - s.sem[i])) << ' ';
    }
    svg << "\"/>\n<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      svg << num(f.px(static_cast<double>(i))) << ',' << num(f.py(s.mean[i])) << ' ';
    }
    svg << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(k) + 10.0;
    svg << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly << "\" x2=\""
        << kWidth - kRight + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n<text x=\"" << kWidth - kRight + 35 << "\" y=\"" << ly + 4
        << "\" font-size=\"11\">" << escape(s.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string box_plot_svg(const std::vector<BoxGroup>& groups) {
  if (groups.empty()) throw std::invalid_argument("box_plot_svg: no groups");
  Frame f{0.0, static_cast<double>(groups.size()), std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};
  for (const auto& g : groups) {
    f.y0 = std::min(f.y0, g.stats.whisker_low);
    f.y1 = std::max(f.y1, g.stats.whisker_high);
    for (double o : g.stats.outliers) {
      f.y0 = std::min(f.y0, o);
      f.y1 = std::max(f.y1, o);
    }
  }
  if (f.y1 - f.y0 < 1e-12) {
    f.y0 -= 1.0;
    f.y1 += 1.0;
  }

  std::ostringstream svg;
  svg << header();
  axes(svg, f, "", "std of predicted Q over seeds", false);
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(groups.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const auto& b = groups[k].stats;
    const double cx = f.px(static_cast<double>(k) + 0.5);
    const double half = slot * 0.25;
    svg << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(b.whisker_low)) << "\" x2=\""
        << num(cx) << "\" y2=\"" << num(f.py(b.q1)) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(b.q3)) << "\" x2=\"" << num(cx)
        << "\" y2=\"" << num(f.py(b.whisker_high)) << "\" stroke=\"black\"/>\n";
    for (double w : {b.whisker_low, b.whisker_high}) {
      svg << "<line x1=\"" << num(cx - half / 2) << "\" y1=\"" << num(f.py(w)) << "\" x2=\""
          << num(cx + half / 2) << "\" y2=\"" << num(f.py(w)) << "\" stroke=\"black\"/>\n";
    }
    svg << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(f.py(b.q3)) << "\" width=\""
        << num(2 * half) << "\" height=\"" << num(f.py(b.q1) - f.py(b.q3))
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(f.py(b.median)) << "\" x2=\""
        << num(cx + half) << "\" y2=\"" << num(f.py(b.median))
        << "\" stroke=\"#ff7f0e\" stroke-width=\"2\"/>\n";
    for (double o : b.outliers) {
      svg << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(f.py(o))
          << "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
    }
    svg << "<text x=\"" << num(cx) << "\" y=\"" << kHeight - kBottom + 16
        << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(groups[k].label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<fs::path> emit_plots(const std::vector<fs::path>& run_dirs,
                                 const fs::path& out_dir) {
  if (run_dirs.empty()) throw std::invalid_argument("emit_plots: no run directories");
  std::vector<CurveSeries> curves;
  std::vector<BoxGroup> boxes;
  for (const auto& dir : run_dirs) {
    const std::string label = dir.filename().empty() ? dir.parent_path().filename().string()
                                                     : dir.filename().string();
    if (fs::exists(dir / "episodes.csv")) {
      const auto records = read_episodes_csv(dir / "episodes.csv");
      if (records.empty()) throw std::invalid_argument("emit_plots: empty records in " + dir.string());
      curves.push_back(learning_curve(label, records));
    }
    if (fs::exists(dir / "qgrid.csv")) {
      std::ifstream in(dir / "qgrid.csv");
      const QGridReport report = read_qgrid_csv(in);
      for (bool given : {true, false}) {
        const auto stds = report.stds(given);
        if (!stds.empty()) {
          boxes.push_back({label + (given ? " given" : " pi"), box_stats(stds)});
        }
      }
    }
  }
  if (curves.empty() && boxes.empty()) {
    throw std::invalid_argument("emit_plots: no episodes.csv or qgrid.csv found");
  }
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  if (!curves.empty()) {
    written.push_back(out_dir / "learning_curves.svg");
    write_file_atomic(written.back(), learning_curve_svg(curves));
  }
  if (!boxes.empty()) {
    written.push_back(out_dir / "qgrid_box.svg");
    write_file_atomic(written.back(), box_plot_svg(boxes));
  }
  return written;
}

}  // namespace qgraph
