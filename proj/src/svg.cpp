#include "stylebc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "stylebc/error.hpp"

namespace stylebc {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 640.0;
constexpr double kMargin = 48.0;

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
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, escape(title));
}

}  // namespace

const std::vector<std::string>& style_colors() {
  static const std::vector<std::string> colors{"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors;
}

std::string trajectories_svg(const std::vector<PathBundle>& bundles, const std::string& title) {
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x;
  std::size_t points = 0;
  for (const auto& b : bundles) {
    for (const auto& path : b.paths) {
      for (const auto& p : path) {
        lo_x = std::min(lo_x, p.x);
        hi_x = std::max(hi_x, p.x);
        lo_y = std::min(lo_y, p.y);
        hi_y = std::max(hi_y, p.y);
        ++points;
      }
    }
  }
  if (points == 0) throw UsageError("trajectory plot: no rollouts to draw");
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const double scale = (kWidth - 2 * kMargin) / (1.05 * span);
  auto sx = [&](double x) { return kWidth / 2 + (x - cx) * scale; };
  auto sy = [&](double y) { return kHeight / 2 - (y - cy) * scale; };

  std::string out = header(title);
  // Axes through the origin when it is in view.
  if (lo_x <= 0.0 && hi_x >= 0.0) {
    out += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"#ccc\"/>\n", sx(0.0),
                       kMargin, kHeight - kMargin);
  }
  if (lo_y <= 0.0 && hi_y >= 0.0) {
    out += fmt::format("<line x1=\"{1}\" y1=\"{0:.2f}\" x2=\"{2}\" y2=\"{0:.2f}\" stroke=\"#ccc\"/>\n", sy(0.0),
                       kMargin, kWidth - kMargin);
  }
  for (const auto& b : bundles) {
    out += fmt::format("<g stroke=\"{}\" stroke-opacity=\"{}\" stroke-width=\"{}\" fill=\"none\">\n", b.color,
                       b.opacity, b.width);
    for (const auto& path : b.paths) {
      if (path.empty()) continue;
      out += "<polyline points=\"";
      for (std::size_t i = 0; i < path.size(); ++i) {
        out += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", sx(path[i].x), sy(path[i].y));
      }
      out += "\"/>\n";
    }
    out += "</g>\n";
  }
  double ly = kHeight - kMargin / 2;
  double lx = kMargin;
  for (const auto& b : bundles) {
    if (b.label.empty()) continue;
    out += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"{}\"/>"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        lx, ly - 9, b.color, lx + 14, ly, escape(b.label));
    lx += 24 + 7.0 * static_cast<double>(b.label.size());
  }
  out += "</svg>\n";
  return out;
}

std::string curve_svg(const std::vector<double>& values, const std::string& title, const std::string& y_label) {
  if (values.empty()) throw UsageError("curve plot: empty series");
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw UsageError("curve plot: non-finite values");
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double n = static_cast<double>(std::max<std::size_t>(values.size() - 1, 1));
  auto sx = [&](double i) { return kMargin + i / n * (kWidth - 2 * kMargin); };
  auto sy = [&](double v) { return kHeight - kMargin - (v - lo) / (hi - lo) * (kHeight - 2 * kMargin); };

  std::string out = header(title);
  out += fmt::format("<rect x=\"{0}\" y=\"{0}\" width=\"{1}\" height=\"{2}\" fill=\"none\" stroke=\"#888\"/>\n",
                     kMargin, kWidth - 2 * kMargin, kHeight - 2 * kMargin);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    out += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{:.3f}</text>\n",
        kMargin - 4, sy(v) + 3, v);
  }
  out += fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">iteration "
      "(0..{})</text>\n",
      kWidth / 2, kHeight - 12, values.size() - 1);
  out += fmt::format(
      "<text x=\"14\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 {:.1f})\" "
      "text-anchor=\"middle\">{}</text>\n",
      kHeight / 2, kHeight / 2, escape(y_label));
  out += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"";
  // Thin long series to at most ~2000 vertices; the stride is deterministic.
  const std::size_t stride = std::max<std::size_t>(1, values.size() / 2000);
  bool first = true;
  for (std::size_t i = 0; i < values.size(); i += stride) {
    out += fmt::format("{}{:.2f},{:.2f}", first ? "" : " ", sx(static_cast<double>(i)), sy(values[i]));
    first = false;
  }
  out += "\"/>\n</svg>\n";
  return out;
}

}  // namespace stylebc
