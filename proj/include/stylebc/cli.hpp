#pragma once

// Pipeline stages behind the `stylebc` command. Every stage is a function of the
// resolved RunConfig and reads/writes files under cfg.out:
//
//   config.json                      resolved configuration
//   dataset.sbds, dataset.manifest.json
//   mine/run<r>/estimator.{sbnn,json}, mine/run<r>/mi_curve.csv
//   policies/run<r>/<variant>[.<i>].sbnn, policies/run<r>/<variant>.json
//   metrics.csv, report.json, summary.md
//   plots/<variant>.svg, plots/expert.svg, plots/mi_curve.svg
//   timings.json                     wall-clock seconds per stage (not deterministic)

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "stylebc/config.hpp"
#include "stylebc/report.hpp"

namespace stylebc {

struct StageOptions {
  bool force = false;
  std::optional<std::string> variant;  // train-policy: restrict to one variant
  std::ostream* log = nullptr;
};

namespace paths {
std::filesystem::path dataset(const RunConfig& cfg);
std::filesystem::path manifest(const RunConfig& cfg);
std::filesystem::path estimator_stem(const RunConfig& cfg, std::size_t run);
std::filesystem::path mi_curve(const RunConfig& cfg, std::size_t run);
std::filesystem::path policy_stem(const RunConfig& cfg, std::size_t run, const std::string& variant);
std::filesystem::path metrics_csv(const RunConfig& cfg);
std::filesystem::path report_json(const RunConfig& cfg);
std::filesystem::path summary(const RunConfig& cfg);
std::filesystem::path plots(const RunConfig& cfg);
}  // namespace paths

void cmd_gen(const RunConfig& cfg, const StageOptions& opt);
void cmd_train_mine(const RunConfig& cfg, const StageOptions& opt);
/// bc_pmi variants without a trained estimator are a usage error.
void cmd_train_policy(const RunConfig& cfg, const StageOptions& opt);
MetricTable cmd_eval(const RunConfig& cfg, const StageOptions& opt);
void cmd_plot(const RunConfig& cfg, const StageOptions& opt);
/// gen, train-mine, train-policy, eval, plot, then summary.md.
MetricTable cmd_repro(const RunConfig& cfg, const StageOptions& opt);

/// Parses argv and runs one command. Returns the process exit code:
/// 0 success, 2 usage error, 3 numeric failure, 4 I/O failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stylebc
