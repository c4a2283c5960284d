#include "stylebc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "stylebc/binio.hpp"
#include "stylebc/error.hpp"

namespace stylebc {

StyleDataset::StyleDataset(std::vector<Trajectory> trajectories, std::uint32_t num_styles)
    : trajectories_(std::move(trajectories)), style_counts_(num_styles, 0), k_(num_styles) {
  if (num_styles == 0) throw UsageError("a dataset needs at least one style");
  for (std::uint32_t t = 0; t < trajectories_.size(); ++t) {
    const auto& traj = trajectories_[t];
    if (traj.style_id >= k_) {
      throw LabelRangeError(fmt::format("trajectory {} has style {} but K = {}", t, traj.style_id, k_));
    }
    for (std::uint32_t s = 0; s < traj.steps.size(); ++s) {
      if (traj.steps[s].action_bin >= circle2d::kActionBins) {
        throw FormatError(fmt::format("trajectory {} step {}: action bin out of range", t, s));
      }
      flat_index_.push_back({t, s});
    }
    style_counts_[traj.style_id] += traj.steps.size();
  }
}

Sample StyleDataset::at(std::size_t i) const {
  const auto ref = flat_index_[i];
  const auto& traj = trajectories_[ref.trajectory];
  const auto& st = traj.steps[ref.step];
  return {&st.observation, st.action_bin, traj.style_id, ref.trajectory, ref.step};
}

std::vector<double> style_prior(const StyleDataset& ds) {
  if (ds.empty()) throw EmptyDatasetError("style_prior: dataset is empty");
  std::vector<double> prior(ds.num_styles());
  const double total = static_cast<double>(ds.size());
  for (std::size_t i = 0; i < prior.size(); ++i) prior[i] = static_cast<double>(ds.style_counts()[i]) / total;
  return prior;
}

std::vector<Sample> sample_joint(const StyleDataset& ds, std::size_t batch, Rng& rng) {
  if (ds.empty()) throw EmptyDatasetError("sample_joint: dataset is empty");
  if (batch == 0) throw UsageError("sample_joint: batch must be at least 1");
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  std::vector<Sample> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(ds.at(pick(rng)));
  return out;
}

const char* to_string(MarginalStrategy s) { return s == MarginalStrategy::shuffle ? "shuffle" : "prior_draw"; }

MarginalStrategy marginal_strategy_from_string(const std::string& name) {
  if (name == "shuffle") return MarginalStrategy::shuffle;
  if (name == "prior_draw") return MarginalStrategy::prior_draw;
  throw UsageError("unknown marginal strategy '" + name + "'");
}

std::vector<std::uint32_t> sample_marginal_styles(std::span<const Sample> joint_batch, MarginalStrategy strategy,
                                                  std::span<const double> prior, Rng& rng) {
  if (joint_batch.empty()) throw UsageError("sample_marginal_styles: empty joint batch");
  std::vector<std::uint32_t> out;
  out.reserve(joint_batch.size());
  if (strategy == MarginalStrategy::shuffle) {
    for (const auto& s : joint_batch) out.push_back(s.style_id);
    std::shuffle(out.begin(), out.end(), rng);
  } else {
    std::discrete_distribution<std::uint32_t> draw(prior.begin(), prior.end());
    for (std::size_t i = 0; i < joint_batch.size(); ++i) out.push_back(draw(rng));
  }
  return out;
}

StyleDataset apply_labeling(const StyleDataset& ds, const LabelingFn& fn) {
  std::vector<Trajectory> relabeled = ds.trajectories();
  for (std::size_t i = 0; i < relabeled.size(); ++i) {
    const auto label = fn(relabeled[i]);
    if (label >= ds.num_styles()) {
      throw LabelRangeError(fmt::format("labeling fn '{}' returned {} for trajectory {} (K = {})", fn.name, label, i,
                                        ds.num_styles()));
    }
    relabeled[i].style_id = label;
  }
  return StyleDataset(std::move(relabeled), ds.num_styles());
}

namespace {

// Steps 100..299 of the trajectory: the turning phase, well past the translation.
constexpr std::size_t kLabelWindowStart = 100;

int quadrant_code(double x, double y) { return 2 * (y < 0.0 ? 1 : 0) + (x < 0.0 ? 1 : 0); }

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace

LabelingFn circle2d_quadrant_label(const std::vector<circle2d::StyleSpec>& specs) {
  struct Signature {
    int quadrant;
    int turn_sign;
  };
  std::vector<Signature> sigs;
  for (const auto& s : specs) {
    // Centroid of the turning phase sits near the end of the translation leg.
    const double x = std::cos(s.translation_heading), y = std::sin(s.translation_heading);
    sigs.push_back({quadrant_code(x, y), s.angular_velocity >= 0.0 ? 1 : -1});
  }
  auto fn = [sigs](const Trajectory& traj) -> std::uint32_t {
    const auto pos = traj.positions();
    const std::size_t begin = std::min(kLabelWindowStart, pos.empty() ? 0 : pos.size() - 1);
    double cx = 0.0, cy = 0.0;
    for (std::size_t t = begin; t < pos.size(); ++t) {
      cx += pos[t].x;
      cy += pos[t].y;
    }
    const double n = static_cast<double>(pos.size() - begin);
    const int quadrant = n > 0 ? quadrant_code(cx / n, cy / n) : 0;
    // Net signed heading change over the window, from consecutive action headings.
    double turn = 0.0;
    for (std::size_t t = begin + 1; t < traj.steps.size(); ++t) {
      turn += wrap_angle((traj.steps[t].action_bin - traj.steps[t - 1].action_bin) * circle2d::kBinWidth);
    }
    const int turn_sign = turn >= 0.0 ? 1 : -1;
    std::uint32_t fallback = 0;
    bool have_fallback = false;
    for (std::uint32_t i = 0; i < sigs.size(); ++i) {
      if (sigs[i].quadrant != quadrant) continue;
      if (sigs[i].turn_sign == turn_sign) return i;
      if (!have_fallback) {
        fallback = i;
        have_fallback = true;
      }
    }
    return fallback;
  };
  return {"circle2d_quadrant_label", fn};
}

void write_dataset(std::ostream& os, const StyleDataset& ds) {
  binio::write_magic(os, "SBDS");
  binio::write_le<std::uint32_t>(os, kDatasetFormatVersion);
  binio::write_le<std::uint32_t>(os, ds.num_styles());
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.trajectories().size()));
  for (const auto& traj : ds.trajectories()) {
    binio::write_le<std::uint32_t>(os, traj.style_id);
    binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(traj.steps.size()));
    binio::write_le<std::uint64_t>(os, traj.provenance.seed);
    binio::write_le<std::uint32_t>(os, traj.provenance.episode_index);
    for (const auto& st : traj.steps) {
      for (double v : st.observation) binio::write_f64(os, v);
      binio::write_le<std::uint16_t>(os, st.action_bin);
    }
  }
}

StyleDataset read_dataset(std::istream& is) {
  binio::expect_magic(is, "SBDS");
  const auto version = binio::read_le<std::uint32_t>(is, "version");
  if (version != kDatasetFormatVersion) throw FormatError(fmt::format("unsupported SBDS version {}", version));
  const auto k = binio::read_le<std::uint32_t>(is, "K");
  const auto count = binio::read_le<std::uint32_t>(is, "trajectory count");
  if (count == 0) throw EmptyDatasetError("dataset file contains no trajectories");
  std::vector<Trajectory> trajs;
  trajs.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    Trajectory traj;
    traj.style_id = binio::read_le<std::uint32_t>(is, "style id");
    const auto steps = binio::read_le<std::uint32_t>(is, "step count");
    traj.provenance.seed = binio::read_le<std::uint64_t>(is, "provenance seed");
    traj.provenance.episode_index = binio::read_le<std::uint32_t>(is, "provenance episode");
    traj.steps.resize(steps);
    for (auto& st : traj.steps) {
      for (double& v : st.observation) v = binio::read_f64(is, "observation");
      st.action_bin = binio::read_le<std::uint16_t>(is, "action bin");
    }
    trajs.push_back(std::move(traj));
  }
  return StyleDataset(std::move(trajs), k);
}

void save_dataset(const std::filesystem::path& path, const StyleDataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(os, ds);
  if (!os) throw IoError("write failed for " + path.string());
}

StyleDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_dataset(is);
}

}  // namespace stylebc
