#include "fhcac/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace fhcac {
namespace {

const char* const kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double x) {
    if (!std::isfinite(x)) return;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  void settle() {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

// Row indices to draw: every row if few, else an even thinning that keeps the last row.
std::vector<std::size_t> thin(std::size_t n, std::size_t max_points) {
  std::vector<std::size_t> idx;
  if (n == 0) return idx;
  const std::size_t stride = std::max<std::size_t>(1, (n + max_points - 1) / std::max<std::size_t>(1, max_points));
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  if (idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

struct Panel {
  std::string title;
  std::string column;
  int top = 0;
};

}  // namespace

void write_svg_plot(std::ostream& out, const std::vector<PlotSeries>& series, const PlotOptions& options) {
  if (!series.empty()) {
    for (const auto& s : series)
      if (s.table.header != series.front().table.header)
        throw std::invalid_argument("plot: CSV schema mismatch between '" + series.front().label + "' and '" +
                                    s.label + "'");
  }
  const std::string cost_col = "ma_cost_" + std::to_string(options.constraint);
  for (const auto& s : series) {
    if (s.table.column("episode") < 0 || s.table.column("ma_return") < 0)
      throw std::invalid_argument("plot: '" + s.label + "' lacks episode/ma_return columns");
    if (s.table.column(cost_col) < 0) throw std::invalid_argument("plot: '" + s.label + "' has no " + cost_col);
  }

  const int margin_left = 70, margin_right = 20, margin_top = 30, gap = 50;
  const int plot_w = options.width - margin_left - margin_right;
  const int ph = options.panel_height;
  const int height = margin_top + 2 * ph + gap + 40;
  const Panel panels[2] = {{"Average return", "ma_return", margin_top},
                           {"Average constraint cost", cost_col, margin_top + ph + gap}};

  Range xr;
  xr.add(0.0);
  for (const auto& s : series) {
    const int c = s.table.column("episode");
    for (const auto& row : s.table.rows) xr.add(row[c]);
  }
  xr.settle();

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << options.width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int p = 0; p < 2; ++p) {
    const Panel& panel = panels[p];
    Range yr;
    for (const auto& s : series) {
      const int c = s.table.column(panel.column);
      for (const auto& row : s.table.rows) yr.add(row[c]);
    }
    const bool draw_threshold = p == 1 && options.threshold.has_value();
    if (draw_threshold) yr.add(*options.threshold);
    yr.settle();
    const double pad = 0.05 * (yr.hi - yr.lo);
    yr.lo -= pad;
    yr.hi += pad;

    auto px = [&](double x) { return margin_left + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto py = [&](double y) { return panel.top + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    out << "<g class=\"panel\" id=\"panel-" << p << "\">\n";
    out << "<text x=\"" << margin_left << "\" y=\"" << panel.top - 8 << "\" font-family=\"sans-serif\" font-size=\"14\">"
        << escape(panel.title) << "</text>\n";
    out << "<rect x=\"" << margin_left << "\" y=\"" << panel.top << "\" width=\"" << plot_w << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    // Axis labels at the ends of each range.
    out << "<text x=\"" << margin_left - 6 << "\" y=\"" << panel.top + 10
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(yr.hi) << "</text>\n";
    out << "<text x=\"" << margin_left - 6 << "\" y=\"" << panel.top + ph
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(yr.lo) << "</text>\n";
    out << "<text x=\"" << margin_left << "\" y=\"" << panel.top + ph + 16
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << num(xr.lo) << "</text>\n";
    out << "<text x=\"" << margin_left + plot_w << "\" y=\"" << panel.top + ph + 16
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(xr.hi) << "</text>\n";

    if (draw_threshold) {
      const std::string y = num(py(*options.threshold));
      out << "<line class=\"threshold\" x1=\"" << margin_left << "\" y1=\"" << y << "\" x2=\"" << margin_left + plot_w
          << "\" y2=\"" << y << "\" stroke=\"red\" stroke-dasharray=\"6,4\" data-value=\"" << num(*options.threshold)
          << "\"/>\n";
    }

    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& t = series[i].table;
      if (t.rows.empty()) continue;
      const int xc = t.column("episode"), yc = t.column(panel.column);
      out << "<polyline fill=\"none\" stroke=\"" << kColors[i % std::size(kColors)]
          << "\" stroke-width=\"1.2\" points=\"";
      bool first = true;
      for (std::size_t r : thin(t.rows.size(), options.max_points)) {
        out << (first ? "" : " ") << num(px(t.rows[r][xc])) << ',' << num(py(t.rows[r][yc]));
        first = false;
      }
      out << "\"><title>" << escape(series[i].label) << "</title></polyline>\n";
    }
    out << "</g>\n";
  }
  out << "<text x=\"" << margin_left + plot_w / 2 << "\" y=\"" << height - 6
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">episode</text>\n";
  out << "</svg>\n";
}

}  // namespace fhcac
