#pragma once

// Run configuration: one JSON document drives every CLI stage. Fields can be
// overridden by dotted path (e.g. "mine.iterations=500").

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "stylebc/circle2d.hpp"
#include "stylebc/eval.hpp"
#include "stylebc/mine.hpp"
#include "stylebc/policy.hpp"

namespace stylebc {

struct EnvSettings {
  double speed = circle2d::kSpeed;
  std::vector<double> headings_deg{45.0, 135.0, 225.0, 315.0};
  std::vector<double> angular_velocity_deg{5.0, -5.0, 10.0, -10.0};
  int translation_steps = circle2d::kTranslationSteps;
  double action_angle_sigma = 0.05;
  double position_sigma = 0.01;
};

struct DatasetSettings {
  std::size_t episodes_per_style = 1000;
};

struct MineSettings {
  std::size_t iterations = 4000;
  std::size_t batch = 512;
  double lr = 1e-3;
  double ema_decay = 0.99;
  std::size_t hidden = 32;
  std::string activation = "tanh";
  std::string marginal = "shuffle";
};

struct PolicySettings {
  std::string mode = "cond_bc";
  int epochs = 10;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::size_t hidden = 32;
  std::size_t hidden_layers = 1;
  std::string activation = "tanh";
  bool use_baseline = false;
  bool clip_negative = false;
  double baseline_decay = 0.99;
  double w_max = kDefaultWeightClamp;
};

struct EvalSettings {
  std::size_t seeds = 5;
  std::size_t episodes = 100;
  std::size_t grid = 40;
  std::size_t octants = 8;
  double smoothing = 0.5;
  double expand = 0.05;
  bool greedy = false;
};

struct RunConfig {
  std::string experiment = "circle2d";
  std::uint64_t seed = 0;
  std::string out = "runs/circle2d";
  unsigned threads = 1;
  EnvSettings env;
  DatasetSettings dataset;
  MineSettings mine;
  /// Policy variants in report order, keyed by variant name.
  std::vector<std::pair<std::string, PolicySettings>> policies = default_policies();
  EvalSettings eval;

  static std::vector<std::pair<std::string, PolicySettings>> default_policies();

  const PolicySettings& policy(const std::string& variant) const;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Strict: unknown keys and ill-typed values throw UsageError.
RunConfig config_from_json(const nlohmann::ordered_json& j);

/// Applies "a.b.c=value"; the value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::ordered_json& j, const std::string& assignment);

/// Throws UsageError on inconsistent settings.
void validate(const RunConfig& cfg);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

// Conversions into module configs. Sub-seeds come from the master seed and the run index.
EnvConfig env_config(const RunConfig& cfg);
circle2d::NoiseConfig dataset_noise(const RunConfig& cfg);
MineConfig mine_config(const RunConfig& cfg, std::size_t run);
PolicyTrainConfig policy_config(const RunConfig& cfg, const std::string& variant, std::size_t run);
KlConfig kl_config(const RunConfig& cfg);
std::uint64_t eval_seed(const RunConfig& cfg, std::size_t run);

}  // namespace stylebc
