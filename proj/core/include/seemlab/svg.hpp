#pragma once

#include <string>
#include <vector>

#include "seemlab/diagnostics.hpp"

namespace seemlab {

struct PlotSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 640;
  int height = 400;
};

/// Self-contained SVG line chart. Non-finite points (and non-positive ones
/// on a log axis) are skipped.
std::string line_plot_svg(const std::vector<PlotSeries>& series, const PlotOptions& options);

/// Heatmap of a max-normalized NTK map on a diverging blue-white-red scale,
/// with the reference point marked.
std::string heatmap_svg(const NtkMap& map, const std::string& title);

}  // namespace seemlab
