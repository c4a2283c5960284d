#pragma once

// Rollouts and trajectory-level metrics: DTW, summed Euclidean distance,
// smoothed state-action histogram KL, and style calibration.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stylebc/circle2d.hpp"
#include "stylebc/dataset.hpp"
#include "stylebc/policy.hpp"

namespace stylebc {

/// Chooses an action for the given state under an intended style.
using Actor = std::function<circle2d::DirectionAction(const circle2d::EnvState&, std::uint32_t style, Rng&)>;

Actor policy_actor(std::shared_ptr<const Policy> policy, bool greedy = false);
Actor expert_actor(std::vector<circle2d::StyleSpec> specs, circle2d::NoiseConfig noise);

struct RolloutSet {
  std::vector<Trajectory> trajectories;
  std::uint32_t intended_style = 0;
  std::string policy_tag;
  std::uint64_t seed = 0;
};

struct EnvConfig {
  std::vector<circle2d::StyleSpec> styles = circle2d::default_styles();
  double speed = circle2d::kSpeed;
  circle2d::NoiseConfig noise;
};

/// `episodes` full-horizon episodes; episode e draws from derive_seed(seed, style, e).
RolloutSet rollout(const Actor& actor, const EnvConfig& env, std::uint32_t style, std::size_t episodes,
                   std::uint64_t seed, std::string policy_tag = {}, unsigned threads = 1);

/// Full-matrix dynamic time warping with Euclidean point cost.
double dtw(std::span<const Point2> a, std::span<const Point2> b);

/// Sum over t of |a_t - b_t|. Throws ShapeError on a length mismatch.
double euclid_dist(std::span<const Point2> a, std::span<const Point2> b);

struct KlConfig {
  std::size_t grid = 40;
  std::size_t octants = 8;
  double smoothing = 0.5;
  double expand = 0.05;
};

/// Octant of a 72-bin action, octant 0 centred on heading 0.
std::size_t action_octant(std::uint16_t bin, std::size_t octants = 8);

/// Histogram bounds of the reference set, grown by `expand` of the extent on each side.
struct GridBounds {
  double min_x, max_x, min_y, max_y;
};
GridBounds reference_bounds(std::span<const Trajectory> reference, double expand);

/// Smoothed joint histogram over (grid x grid) positions and action octants; points outside are clamped.
std::vector<double> state_action_histogram(std::span<const Trajectory> trajs, const GridBounds& bounds,
                                           const KlConfig& cfg);

/// KL(reference || generated) of the smoothed histograms.
double kl_state_action(std::span<const Trajectory> generated, std::span<const Trajectory> reference,
                       const KlConfig& cfg = {});

/// Fraction of rollouts the labeling function assigns to the intended style.
double calibration(const RolloutSet& rollouts, const LabelingFn& fn);

}  // namespace stylebc
