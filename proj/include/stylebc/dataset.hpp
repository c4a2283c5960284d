#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stylebc/circle2d.hpp"
#include "stylebc/rng.hpp"
#include "stylebc/trajectory.hpp"

namespace stylebc {

/// One (observation, action, style) triple plus where it came from.
struct Sample {
  const Observation* observation = nullptr;
  std::uint16_t action_bin = 0;
  std::uint32_t style_id = 0;
  std::uint32_t trajectory = 0;
  std::uint32_t step = 0;
};

struct StepRef {
  std::uint32_t trajectory = 0;
  std::uint32_t step = 0;

  friend bool operator==(const StepRef&, const StepRef&) = default;
};

class StyleDataset {
 public:
  StyleDataset() = default;
  /// Validates style ids against K and builds the flat index.
  StyleDataset(std::vector<Trajectory> trajectories, std::uint32_t num_styles);

  std::uint32_t num_styles() const { return k_; }
  std::size_t size() const { return flat_index_.size(); }
  bool empty() const { return flat_index_.empty(); }

  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const std::vector<StepRef>& flat_index() const { return flat_index_; }
  const std::vector<std::size_t>& style_counts() const { return style_counts_; }

  /// Sample at flat position i.
  Sample at(std::size_t i) const;

  friend bool operator==(const StyleDataset& a, const StyleDataset& b) {
    return a.k_ == b.k_ && a.trajectories_ == b.trajectories_;
  }

 private:
  std::vector<Trajectory> trajectories_;
  std::vector<StepRef> flat_index_;
  std::vector<std::size_t> style_counts_;
  std::uint32_t k_ = 0;
};

/// Empirical sample-level p(z). Throws EmptyDatasetError on an empty dataset.
std::vector<double> style_prior(const StyleDataset& ds);

/// Uniform draws with replacement over the flat index.
std::vector<Sample> sample_joint(const StyleDataset& ds, std::size_t batch, Rng& rng);

enum class MarginalStrategy { shuffle, prior_draw };

const char* to_string(MarginalStrategy s);
MarginalStrategy marginal_strategy_from_string(const std::string& name);

/// Styles paired with the joint batch's (s, a) to sample the product of marginals.
/// `prior` is only consulted for prior_draw.
std::vector<std::uint32_t> sample_marginal_styles(std::span<const Sample> joint_batch, MarginalStrategy strategy,
                                                  std::span<const double> prior, Rng& rng);

struct LabelingFn {
  std::string name;
  std::function<std::uint32_t(const Trajectory&)> fn;

  std::uint32_t operator()(const Trajectory& t) const { return fn(t); }
};

/// Throws LabelRangeError if fn produces an id >= K.
StyleDataset apply_labeling(const StyleDataset& ds, const LabelingFn& fn);

/// Labels a Circle 2D trajectory by the quadrant of its late-phase centroid, refined
/// by the sign of its net heading change, and maps that to the matching generation style.
LabelingFn circle2d_quadrant_label(const std::vector<circle2d::StyleSpec>& specs);

// File format "SBDS": u32 version, u32 K, u32 trajectory count, then per trajectory
// u32 style, u32 step count, u64 seed, u32 episode, and step records of
// 10 x f64 observation + u16 action. Little-endian throughout.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

void write_dataset(std::ostream& os, const StyleDataset& ds);
StyleDataset read_dataset(std::istream& is);
void save_dataset(const std::filesystem::path& path, const StyleDataset& ds);
StyleDataset load_dataset(const std::filesystem::path& path);

}  // namespace stylebc
