#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace facadealign {

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;
};

struct PlotSeries {
  std::string name;
  std::vector<PlotPoint> points;
  bool connect = false;  // draw a polyline through the points in order
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  /// Horizontal reference line (e.g. the 100% baseline); NaN for none.
  double reference_y = std::numeric_limits<double>::quiet_NaN();
};

/// Self-contained SVG with axes, ticks, legend and point labels. Non-finite
/// points are skipped.
void write_svg(std::ostream& out, const Plot& plot);

}  // namespace facadealign
