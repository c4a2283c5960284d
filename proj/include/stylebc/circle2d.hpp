#pragma once

// Circle 2D: a point agent moving at constant speed on the plane. Each of the
// four expert styles translates along its own heading for a fixed number of
// steps and then turns at a constant rate until the episode ends.

#include <array>
#include <cstdint>
#include <numbers>
#include <vector>

#include "stylebc/rng.hpp"
#include "stylebc/trajectory.hpp"

namespace stylebc::circle2d {

inline constexpr int kHorizon = 300;
inline constexpr int kActionBins = 72;
inline constexpr int kHistory = 5;
inline constexpr int kTranslationSteps = 75;
inline constexpr double kSpeed = 0.1;
inline constexpr double kBinWidth = 2.0 * std::numbers::pi / kActionBins;

struct EnvState {
  Point2 position;
  int time_step = 0;
  std::array<Point2, kHistory> history{};  // oldest first; history.back() == position

  Observation observation() const;
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct DirectionAction {
  int bin = 0;

  double heading() const { return bin * kBinWidth; }
  /// Nearest of the 72 bins to an arbitrary angle.
  static DirectionAction nearest(double heading);
};

struct StyleSpec {
  std::uint32_t style_id = 0;
  double translation_heading = 0.0;  // radians
  double angular_velocity = 0.0;     // radians per step, signed
  int translation_steps = kTranslationSteps;
};

struct NoiseConfig {
  double action_angle_sigma = 0.05;
  double position_sigma = 0.01;
  std::uint64_t seed = 0;

  static NoiseConfig none(std::uint64_t seed = 0) { return {0.0, 0.0, seed}; }
};

/// Four styles: headings 45/135/225/315 degrees, turn rates +5/-5/+10/-10 degrees per step.
std::vector<StyleSpec> default_styles();

/// Throws UsageError if a spec breaks the style invariants (id range, full loop before the horizon).
void validate_styles(const std::vector<StyleSpec>& specs, double speed = kSpeed);

EnvState reset(std::uint64_t seed = 0);

/// Advances one step. Throws EpisodeOverError at the horizon.
EnvState step(const EnvState& state, DirectionAction action, const NoiseConfig& noise, Rng& rng,
              double speed = kSpeed);

/// Noise-free heading the expert aims for at `time_step`.
double expert_heading(const StyleSpec& spec, int time_step);

DirectionAction expert_action(const StyleSpec& spec, const EnvState& state, const NoiseConfig& noise, Rng& rng);

/// One full expert episode; the RNG is derived from (noise.seed, style_id, episode_index).
Trajectory expert_episode(const StyleSpec& spec, std::uint32_t episode_index, const NoiseConfig& noise,
                          double speed = kSpeed);

/// episodes_per_style episodes for every spec, ordered by spec then episode.
std::vector<Trajectory> generate_demos(const std::vector<StyleSpec>& specs, std::size_t episodes_per_style,
                                       const NoiseConfig& noise, double speed = kSpeed, unsigned threads = 1);

/// Radius of the regular polygon traced by constant-speed, constant-turn motion.
double turning_radius(double speed, double angular_velocity);

}  // namespace stylebc::circle2d
