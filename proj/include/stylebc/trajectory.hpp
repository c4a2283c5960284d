#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace stylebc {

inline constexpr std::size_t kObsDim = 10;

using Observation = std::array<double, kObsDim>;

struct Step {
  Observation observation{};
  std::uint16_t action_bin = 0;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::uint32_t episode_index = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct Trajectory {
  std::uint32_t style_id = 0;
  std::vector<Step> steps;
  Provenance provenance;

  /// Agent position at each step (the newest entry of the position history).
  std::vector<Point2> positions() const {
    std::vector<Point2> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back({s.observation[kObsDim - 2], s.observation[kObsDim - 1]});
    return out;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace stylebc
