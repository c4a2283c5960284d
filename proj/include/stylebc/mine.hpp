#pragma once

// Donsker-Varadhan mutual information estimation between (state, action) and style.
//
// The statistics network T scores (s, a, z). Training maximizes
//   mean_joint T(s, a, z) - log mean_marginal exp T(s, a, z_bar)
// where z_bar comes from the style marginal. At the optimum T equals the
// pointwise mutual information log p(z|s,a)/p(z) up to an additive constant,
// which log_pmi removes using the running estimate of the marginal partition term.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stylebc/dataset.hpp"
#include "stylebc/nn.hpp"

namespace stylebc {

/// observation ++ (sin, cos) of the action heading ++ one-hot style.
std::vector<double> encode_mine_input(const Observation& obs, std::uint16_t action_bin, std::uint32_t style,
                                      std::uint32_t num_styles);
void encode_mine_input(const Observation& obs, std::uint16_t action_bin, std::uint32_t style,
                       std::uint32_t num_styles, std::span<double> out);

struct MineConfig {
  std::size_t iterations = 4000;
  std::size_t batch = 512;
  double lr = 1e-3;
  double ema_decay = 0.99;
  std::size_t hidden = 32;
  Activation activation = Activation::tanh;
  MarginalStrategy marginal = MarginalStrategy::shuffle;
  std::uint64_t seed = 0;
};

struct MineEstimator {
  MlpNet net;
  double ema_denominator = 0.0;
  double ema_decay = 0.99;
  std::uint32_t num_styles = 0;
  std::vector<double> mi_history;

  /// Raw statistic T(s, a, z).
  double statistic(const Observation& obs, std::uint16_t action_bin, std::uint32_t style) const;
};

/// Mini-batch DV bound with a max-shifted log-mean-exp. Batches must have equal size >= 2.
double dv_bound(const MineEstimator& est, std::span<const Sample> joint_batch,
                std::span<const std::uint32_t> marginal_styles);

/// Throws UsageError if fewer than two styles have samples, NumericError on divergence.
MineEstimator train_mine(const StyleDataset& ds, const MineConfig& config);

/// DV bound over `samples` fresh joint draws; a lower-variance read-out than mi_history.
double estimate_bound(const MineEstimator& est, const StyleDataset& ds, std::size_t samples, Rng& rng,
                      MarginalStrategy marginal = MarginalStrategy::shuffle);

/// T minus log(ema_denominator), so exp(log_pmi) averages to about 1 under the product of marginals.
double log_pmi(const MineEstimator& est, const Observation& obs, std::uint16_t action_bin, std::uint32_t style);

inline constexpr double kDefaultWeightClamp = 20.0;
inline constexpr double kNoWeightClamp = std::numeric_limits<double>::infinity();

/// exp(log_pmi) clamped to [0, w_max].
double pmi_weight(const MineEstimator& est, const Observation& obs, std::uint16_t action_bin, std::uint32_t style,
                  double w_max = kDefaultWeightClamp);

/// Writes `<stem>.sbnn` and the `<stem>.json` sidecar; `extra_json` fields are merged into the sidecar.
void save_estimator(const std::filesystem::path& stem, const MineEstimator& est, const std::string& extra_json = "{}");
MineEstimator load_estimator(const std::filesystem::path& stem);

}  // namespace stylebc
