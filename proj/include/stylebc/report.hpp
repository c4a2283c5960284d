#pragma once

// Aggregation of rollout metrics over seeds into a (policy, style, metric) table.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stylebc/eval.hpp"

namespace stylebc {

inline const std::vector<std::string> kMetricNames{"DTW", "ED", "KL", "calibration"};

struct MetricCell {
  std::string policy;
  std::uint32_t style = 0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation across seeds; 0 for a single seed
  std::size_t seeds = 0;
  std::size_t episodes = 0;
  std::vector<double> per_seed;
};

struct MetricTable {
  std::vector<MetricCell> cells;

  /// nullptr if absent.
  const MetricCell* find(const std::string& policy, std::uint32_t style, const std::string& metric) const;
  std::vector<std::string> policies() const;
  std::uint32_t num_styles() const;
};

/// Columns: policy, style, metric, mean, std, seeds, episodes.
void write_csv(std::ostream& os, const MetricTable& table);
nlohmann::ordered_json to_json(const MetricTable& table);
MetricTable table_from_json(const nlohmann::ordered_json& j);

/// A policy to evaluate, with one actor per evaluation seed (e.g. one trained model per seed).
struct PolicyUnderTest {
  std::string tag;
  std::vector<Actor> per_seed;
};

struct ReportConfig {
  EnvConfig env;
  std::vector<std::uint64_t> seeds;
  std::size_t episodes = 100;
  KlConfig kl;
  unsigned threads = 1;
};

/// For every seed and style: expert reference rollouts, then `episodes` rollouts per policy.
/// DTW and ED compare each rollout with the style's noise-free expert path and are averaged
/// over episodes; KL compares against the reference rollouts; calibration uses `label`.
/// Rollout seeds depend only on (seed, style), so results do not depend on policy order.
MetricTable build_report(const std::vector<PolicyUnderTest>& policies, const ReportConfig& cfg,
                         const LabelingFn& label);

/// Markdown table: one row per (style, metric), one column per policy, cells "mean ± std".
std::string summary_markdown(const MetricTable& table, const std::string& title);

}  // namespace stylebc
