#include "stylebc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "stylebc/error.hpp"
#include "stylebc/parallel.hpp"

namespace stylebc {

Actor policy_actor(std::shared_ptr<const Policy> policy, bool greedy) {
  return [policy = std::move(policy), greedy](const circle2d::EnvState& s, std::uint32_t style, Rng& rng) {
    std::optional<std::uint32_t> z;
    if (policy->conditioned()) z = style;
    return act(*policy, s.observation(), z, rng, greedy);
  };
}

Actor expert_actor(std::vector<circle2d::StyleSpec> specs, circle2d::NoiseConfig noise) {
  return [specs = std::move(specs), noise](const circle2d::EnvState& s, std::uint32_t style, Rng& rng) {
    return circle2d::expert_action(specs.at(style), s, noise, rng);
  };
}

RolloutSet rollout(const Actor& actor, const EnvConfig& env, std::uint32_t style, std::size_t episodes,
                   std::uint64_t seed, std::string policy_tag, unsigned threads) {
  RolloutSet set;
  set.intended_style = style;
  set.policy_tag = std::move(policy_tag);
  set.seed = seed;
  set.trajectories.resize(episodes);
  parallel_for(episodes, threads, [&](std::size_t e) {
    Rng rng(derive_seed(seed, style, e));
    Trajectory traj;
    traj.style_id = style;
    traj.provenance = {seed, static_cast<std::uint32_t>(e)};
    traj.steps.reserve(circle2d::kHorizon);
    auto state = circle2d::reset(seed);
    for (int t = 0; t < circle2d::kHorizon; ++t) {
      const auto a = actor(state, style, rng);
      traj.steps.push_back({state.observation(), static_cast<std::uint16_t>(a.bin)});
      state = circle2d::step(state, a, env.noise, rng, env.speed);
    }
    set.trajectories[e] = std::move(traj);
  });
  return set;
}

namespace {
double dist(const Point2& p, const Point2& q) {
  const double dx = p.x - q.x, dy = p.y - q.y;
  return std::sqrt(dx * dx + dy * dy);
}
}  // namespace

double dtw(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.empty() || b.empty()) throw ShapeError("dtw: sequences must be non-empty");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(b.size() + 1, inf), cur(b.size() + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = dist(a[i - 1], b[j - 1]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double euclid_dist(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.size() != b.size()) throw ShapeError(fmt::format("euclid_dist: lengths {} and {} differ", a.size(), b.size()));
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) total += dist(a[t], b[t]);
  return total;
}

std::size_t action_octant(std::uint16_t bin, std::size_t octants) {
  const std::size_t per = circle2d::kActionBins / octants;
  return ((bin + per / 2) % circle2d::kActionBins) / per;
}

GridBounds reference_bounds(std::span<const Trajectory> reference, double expand) {
  GridBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& t : reference) {
    for (const auto& p : t.positions()) {
      b.min_x = std::min(b.min_x, p.x);
      b.max_x = std::max(b.max_x, p.x);
      b.min_y = std::min(b.min_y, p.y);
      b.max_y = std::max(b.max_y, p.y);
    }
  }
  if (!std::isfinite(b.min_x)) throw EmptyDatasetError("reference set has no positions");
  // A degenerate extent (e.g. a single point) still needs a grid with positive width.
  const double wx = std::max(b.max_x - b.min_x, 1e-9), wy = std::max(b.max_y - b.min_y, 1e-9);
  b.min_x -= expand * wx;
  b.max_x += expand * wx;
  b.min_y -= expand * wy;
  b.max_y += expand * wy;
  return b;
}

std::vector<double> state_action_histogram(std::span<const Trajectory> trajs, const GridBounds& bounds,
                                           const KlConfig& cfg) {
  const std::size_t g = cfg.grid;
  std::vector<double> h(g * g * cfg.octants, cfg.smoothing);
  auto cell = [g](double v, double lo, double hi) {
    const double f = (v - lo) / (hi - lo) * static_cast<double>(g);
    return static_cast<std::size_t>(std::clamp(std::floor(f), 0.0, static_cast<double>(g - 1)));
  };
  double total = cfg.smoothing * static_cast<double>(h.size());
  for (const auto& t : trajs) {
    for (const auto& st : t.steps) {
      const double x = st.observation[kObsDim - 2], y = st.observation[kObsDim - 1];
      const std::size_t cx = cell(x, bounds.min_x, bounds.max_x);
      const std::size_t cy = cell(y, bounds.min_y, bounds.max_y);
      h[(cy * g + cx) * cfg.octants + action_octant(st.action_bin, cfg.octants)] += 1.0;
      total += 1.0;
    }
  }
  for (double& v : h) v /= total;
  return h;
}

double kl_state_action(std::span<const Trajectory> generated, std::span<const Trajectory> reference,
                       const KlConfig& cfg) {
  if (generated.empty() || reference.empty()) throw EmptyDatasetError("kl_state_action: empty trajectory set");
  if (!(cfg.smoothing > 0.0)) throw UsageError("kl_state_action: smoothing must be positive");
  if (cfg.grid == 0 || cfg.octants == 0 || circle2d::kActionBins % cfg.octants != 0) {
    throw UsageError("kl_state_action: grid must be positive and octants must divide 72");
  }
  const auto bounds = reference_bounds(reference, cfg.expand);
  const auto p = state_action_histogram(reference, bounds, cfg);
  const auto q = state_action_histogram(generated, bounds, cfg);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return std::max(kl, 0.0);
}

double calibration(const RolloutSet& rollouts, const LabelingFn& fn) {
  if (rollouts.trajectories.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& t : rollouts.trajectories) hits += fn(t) == rollouts.intended_style ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rollouts.trajectories.size());
}

}  // namespace stylebc
