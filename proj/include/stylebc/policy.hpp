#pragma once

// Style-conditioned and unconditioned behavioral cloning over 72 direction bins.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stylebc/circle2d.hpp"
#include "stylebc/dataset.hpp"
#include "stylebc/mine.hpp"
#include "stylebc/nn.hpp"

namespace stylebc {

enum class PolicyMode { bc, cond_bc, cbc_separate, bc_pmi };

const char* to_string(PolicyMode mode);
PolicyMode policy_mode_from_string(const std::string& name);

struct PolicyTrainConfig {
  int epochs = 10;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::size_t hidden = 32;
  std::size_t hidden_layers = 1;
  Activation activation = Activation::tanh;
  bool use_baseline = false;
  bool clip_negative = false;  // clamp (w - b) at zero; ablation only
  double baseline_decay = 0.99;
  double w_max = kDefaultWeightClamp;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

/// bc: one net over observations. cond_bc / bc_pmi: one net over observation ++ one-hot style.
/// cbc_separate: K unconditioned nets, one per style.
class Policy {
 public:
  Policy() = default;
  Policy(PolicyMode mode, std::uint32_t num_styles, std::vector<MlpNet> nets);

  PolicyMode mode() const { return mode_; }
  std::uint32_t num_styles() const { return k_; }
  bool conditioned() const { return mode_ != PolicyMode::bc; }
  const std::vector<MlpNet>& nets() const { return nets_; }

  /// Throws UsageError if a conditioned policy gets no style.
  std::vector<double> logits(const Observation& obs, std::optional<std::uint32_t> style) const;

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  PolicyMode mode_ = PolicyMode::bc;
  std::uint32_t k_ = 1;
  std::vector<MlpNet> nets_;
};

/// Policies read the raw 10-real position history.
inline constexpr std::size_t kPolicyFeatureDim = kObsDim;

std::size_t policy_input_dim(PolicyMode mode, std::uint32_t num_styles);
void encode_policy_input(const Observation& obs, std::optional<std::uint32_t> style, std::uint32_t num_styles,
                         bool conditioned, std::span<double> out);

/// Greedy: argmax with ties going to the lowest bin. Otherwise a softmax draw.
circle2d::DirectionAction act(const Policy& policy, const Observation& obs, std::optional<std::uint32_t> style,
                              Rng& rng, bool greedy);

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<double> batch_mean_effective_weight;
  std::vector<double> batch_baseline;
  std::size_t updates = 0;
};

Policy train_bc(const StyleDataset& ds, const PolicyTrainConfig& cfg, TrainLog* log = nullptr);
Policy train_cond_bc(const StyleDataset& ds, const PolicyTrainConfig& cfg, TrainLog* log = nullptr);
Policy train_cbc_separate(const StyleDataset& ds, const PolicyTrainConfig& cfg);

/// Per-sample exp-PMI weights from a frozen estimator, in flat-index order.
std::vector<double> precompute_weights(const MineEstimator& est, const StyleDataset& ds, double w_max,
                                       unsigned threads = 1);

/// Weighted CE with the given per-sample weights (flat-index order), optionally minus
/// a moving-average baseline of the batch-mean weight.
Policy train_bc_pmi(const StyleDataset& ds, std::span<const double> weights, const PolicyTrainConfig& cfg,
                    TrainLog* log = nullptr);
/// Throws UsageError on an estimator/dataset K mismatch.
Policy train_bc_pmi(const StyleDataset& ds, const MineEstimator& est, const PolicyTrainConfig& cfg,
                    TrainLog* log = nullptr);

/// Writes one `<stem>[.<i>].sbnn` per net; `sidecar` is merged into `<stem>.json`.
void save_policy(const std::filesystem::path& stem, const Policy& policy, const std::string& sidecar_json = "{}");
Policy load_policy(const std::filesystem::path& stem);

}  // namespace stylebc
