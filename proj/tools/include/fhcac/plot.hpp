#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fhcac/metrics.hpp"

namespace fhcac {

struct PlotOptions {
  std::optional<double> threshold = 25.0;  // dashed line on the cost panel
  int constraint = 1;                      // which ma_cost_k to draw
  std::size_t max_points = 2000;           // per polyline, after thinning
  int width = 900;
  int panel_height = 320;
};

struct PlotSeries {
  std::string label;
  MetricTable table;
};

// Two stacked panels (ma_return and ma_cost_k against episode), one polyline
// per series with at least one row. Throws std::invalid_argument when the
// series headers differ or the requested cost column is missing.
void write_svg_plot(std::ostream& out, const std::vector<PlotSeries>& series, const PlotOptions& options = {});

}  // namespace fhcac
