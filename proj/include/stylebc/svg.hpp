#pragma once

// Minimal deterministic SVG output for trajectory bundles and training curves.

#include <string>
#include <vector>

#include "stylebc/trajectory.hpp"

namespace stylebc {

struct PathBundle {
  std::string label;
  std::string color;  // any SVG color
  std::vector<std::vector<Point2>> paths;
  double opacity = 0.35;
  double width = 0.6;
};

/// All bundles on shared equal-aspect axes. Throws UsageError if there is nothing to draw.
std::string trajectories_svg(const std::vector<PathBundle>& bundles, const std::string& title);

/// Line chart of values against their index. Throws UsageError on an empty series.
std::string curve_svg(const std::vector<double>& values, const std::string& title, const std::string& y_label);

/// The four style colors used in every trajectory plot.
const std::vector<std::string>& style_colors();

}  // namespace stylebc
