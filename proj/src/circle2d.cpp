#include "stylebc/circle2d.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "stylebc/error.hpp"
#include "stylebc/parallel.hpp"

namespace stylebc::circle2d {

namespace {
constexpr double deg(double d) { return d * std::numbers::pi / 180.0; }
}  // namespace

Observation EnvState::observation() const {
  Observation obs{};
  for (int i = 0; i < kHistory; ++i) {
    obs[2 * i] = history[i].x;
    obs[2 * i + 1] = history[i].y;
  }
  return obs;
}

DirectionAction DirectionAction::nearest(double heading) {
  const double turns = heading / kBinWidth;
  long bin = std::lround(turns) % kActionBins;
  if (bin < 0) bin += kActionBins;
  return {static_cast<int>(bin)};
}

std::vector<StyleSpec> default_styles() {
  return {
      {0, deg(45.0), deg(5.0), kTranslationSteps},
      {1, deg(135.0), deg(-5.0), kTranslationSteps},
      {2, deg(225.0), deg(10.0), kTranslationSteps},
      {3, deg(315.0), deg(-10.0), kTranslationSteps},
  };
}

void validate_styles(const std::vector<StyleSpec>& specs, double speed) {
  if (specs.empty()) throw UsageError("at least one style is required");
  if (!(speed > 0.0)) throw UsageError("speed must be positive");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.style_id != i) throw UsageError(fmt::format("style {} has id {}; ids must be 0..K-1 in order", i, s.style_id));
    if (s.translation_steps < 0 || s.translation_steps >= kHorizon) {
      throw UsageError(fmt::format("style {}: translation_steps must lie in [0, {})", i, kHorizon));
    }
    if (std::abs(s.angular_velocity) * (kHorizon - s.translation_steps) < 2.0 * std::numbers::pi - 1e-9) {
      throw UsageError(fmt::format("style {}: turn rate too small to close a loop before the horizon", i));
    }
  }
}

EnvState reset(std::uint64_t /*seed*/) {
  EnvState s;
  s.position = {0.0, 0.0};
  s.time_step = 0;
  s.history.fill(s.position);
  return s;
}

EnvState step(const EnvState& state, DirectionAction action, const NoiseConfig& noise, Rng& rng, double speed) {
  if (state.time_step >= kHorizon) throw EpisodeOverError("episode is over: cannot step past the horizon");
  if (action.bin < 0 || action.bin >= kActionBins) throw ShapeError(fmt::format("action bin {} out of range", action.bin));
  const double th = action.heading();
  Point2 p{state.position.x + speed * std::cos(th), state.position.y + speed * std::sin(th)};
  if (noise.position_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, noise.position_sigma);
    p.x += n(rng);
    p.y += n(rng);
  }
  EnvState next = state;
  next.position = p;
  next.time_step = state.time_step + 1;
  for (int i = 0; i + 1 < kHistory; ++i) next.history[i] = state.history[i + 1];
  next.history.back() = p;
  return next;
}

double expert_heading(const StyleSpec& spec, int time_step) {
  if (time_step < spec.translation_steps) return spec.translation_heading;
  return spec.translation_heading + spec.angular_velocity * (time_step - spec.translation_steps + 1);
}

DirectionAction expert_action(const StyleSpec& spec, const EnvState& state, const NoiseConfig& noise, Rng& rng) {
  double heading = expert_heading(spec, state.time_step);
  if (noise.action_angle_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, noise.action_angle_sigma);
    heading += n(rng);
  }
  return DirectionAction::nearest(heading);
}

Trajectory expert_episode(const StyleSpec& spec, std::uint32_t episode_index, const NoiseConfig& noise, double speed) {
  Rng rng(derive_seed(noise.seed, spec.style_id, episode_index));
  Trajectory traj;
  traj.style_id = spec.style_id;
  traj.provenance = {noise.seed, episode_index};
  traj.steps.reserve(kHorizon);
  EnvState state = reset(noise.seed);
  for (int t = 0; t < kHorizon; ++t) {
    const auto action = expert_action(spec, state, noise, rng);
    traj.steps.push_back({state.observation(), static_cast<std::uint16_t>(action.bin)});
    state = step(state, action, noise, rng, speed);
  }
  return traj;
}

std::vector<Trajectory> generate_demos(const std::vector<StyleSpec>& specs, std::size_t episodes_per_style,
                                       const NoiseConfig& noise, double speed, unsigned threads) {
  if (episodes_per_style == 0) throw UsageError("episodes_per_style must be at least 1");
  std::vector<Trajectory> out(specs.size() * episodes_per_style);
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const auto& spec = specs[i / episodes_per_style];
    out[i] = expert_episode(spec, static_cast<std::uint32_t>(i % episodes_per_style), noise, speed);
  });
  return out;
}

double turning_radius(double speed, double angular_velocity) {
  return speed / (2.0 * std::sin(std::abs(angular_velocity) / 2.0));
}

}  // namespace stylebc::circle2d
