#include "seemlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace seemlab {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

// Blue (-1) through white (0) to red (+1).
std::string diverging_color(double v) {
  v = std::clamp(v, -1.0, 1.0);
  int r = 255;
  int g = 255;
  int b = 255;
  if (v >= 0) {
    g = b = static_cast<int>(std::lround(255 * (1 - v)));
  } else {
    r = g = static_cast<int>(std::lround(255 * (1 + v)));
  }
  std::ostringstream os;
  os << "rgb(" << r << ',' << g << ',' << b << ')';
  return os.str();
}

}  // namespace

std::string line_plot_svg(const std::vector<PlotSeries>& series, const PlotOptions& o) {
  const double left = 70, right = 20, top = 40, bottom = 50;
  const double pw = o.width - left - right;
  const double ph = o.height - top - bottom;

  auto ty = [&](double y) { return o.log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!o.log_y || y > 0);
  };

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const PlotSeries& s : series) {
    for (std::size_t i = 0; i < std::min(s.xs.size(), s.ys.size()); ++i) {
      if (!usable(s.xs[i], s.ys[i])) continue;
      xmin = std::min(xmin, s.xs[i]);
      xmax = std::max(xmax, s.xs[i]);
      ymin = std::min(ymin, ty(s.ys[i]));
      ymax = std::max(ymax, ty(s.ys[i]));
    }
  }
  if (!(xmin <= xmax)) xmin = 0, xmax = 1;
  if (!(ymin <= ymax)) ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1 - (ty(y) - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << o.width << "\" height=\""
     << o.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << o.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(o.title) << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 4.0;
    const double fy = ymin + (ymax - ymin) * k / 4.0;
    const double gx = left + pw * k / 4.0;
    const double gy = top + ph * (1 - k / 4.0);
    os << "<text x=\"" << gx << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << fx
       << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">"
       << (o.log_y ? "1e" : "") << fy << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << o.height - 10
     << "\" text-anchor=\"middle\">" << escape(o.x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << top + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape(o.y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kPalette[si % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.xs.size(), s.ys.size()); ++i) {
      if (!usable(s.xs[i], s.ys[i])) continue;
      os << px(s.xs[i]) << ',' << py(s.ys[i]) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << left + 8 << "\" y=\"" << top + 16 + 14 * si << "\" fill=\"" << color
       << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heatmap_svg(const NtkMap& map, const std::string& title) {
  const std::size_t n = map.axis.size();
  const double cell = n > 0 ? std::max(2.0, 480.0 / static_cast<double>(n)) : 1.0;
  const double size = cell * static_cast<double>(n);
  const double margin = 40;
  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin
     << "\" height=\"" << size + 2 * margin << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << margin + size / 2 << "\" y=\"24\" text-anchor=\"middle\">"
     << escape(title) << "</text>\n";
  for (std::size_t iy = 0; iy < n; ++iy) {
    for (std::size_t ix = 0; ix < n; ++ix) {
      // Row 0 of the image is the largest y.
      os << "<rect x=\"" << margin + cell * static_cast<double>(ix) << "\" y=\""
         << margin + cell * static_cast<double>(n - 1 - iy) << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"" << diverging_color(map.at(ix, iy))
         << "\"/>\n";
    }
  }
  if (n > 1 && map.x0.size() == 2) {
    const double lo = map.axis.front();
    const double hi = map.axis.back();
    const double cx = margin + (map.x0[0] - lo) / (hi - lo) * (size - cell) + cell / 2;
    const double cy = margin + (1 - (map.x0[1] - lo) / (hi - lo)) * (size - cell) + cell / 2;
    os << "<circle cx=\"" << cx << "\" cy=\"" << cy
       << "\" r=\"4\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace seemlab
