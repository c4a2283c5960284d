// Acceptance run: one PASS/FAIL line per criterion, exit code 1 if any fails.
// Usage: acceptance <work dir>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/core.h>

#include "oracles.hpp"
#include "stylebc/circle2d.hpp"
#include "stylebc/cli.hpp"
#include "stylebc/eval.hpp"
#include "stylebc/mine.hpp"

using namespace stylebc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << fmt::format("criterion {}: {} | {}", id, ok ? "PASS" : "FAIL", detail) << std::endl;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void gradients() {
  const auto t0 = Clock::now();
  const auto cases = oracle::gradient_suite(20);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    if (c.max_rel_error >= worst) {
      worst = c.max_rel_error;
      worst_name = c.name;
    }
  }
  report(1, worst < 1e-4 && secs < 10.0,
         fmt::format("{} heads/shapes x 20 instances, max rel error {:.2e} ({}), {:.1f} s", cases.size(), worst,
                     worst_name, secs));
}

void prop_independent() {
  const auto t = oracle::independent_tabular(1, 6, 4, 3);
  const auto r = oracle::check_prop1a(t);
  report(2, r.weights_exactly_one && r.max_weight_error <= 1e-12 && r.minimizer_equals_marginal,
         fmt::format("weights exactly 1: {}, max |w-1| {:.1e}, minimizer == p(a|s): {}", r.weights_exactly_one,
                     r.max_weight_error, r.minimizer_equals_marginal));
}

void prop_deterministic() {
  const auto t = oracle::deterministic_tabular(1);
  const double err = oracle::check_prop1b(t, 100, 1);
  report(3, err <= 1e-10, fmt::format("max loss gap over 100 policies {:.2e}", err));
}

void mine_oracles() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  const std::pair<double, std::uint64_t> cases[] = {{1.0, 1}, {0.0, 2}, {0.5, 3}};
  for (const auto& [purity, seed] : cases) {
    const auto t = oracle::mixture_tabular(purity, 4);
    const double mi = oracle::exact_mi(t);
    const auto ds = oracle::tabular_dataset(t);
    MineConfig cfg;
    cfg.seed = seed;
    const auto est = train_mine(ds, cfg);
    Rng rng(seed + 1);
    const double bound = estimate_bound(est, ds, 200000, rng);
    ok = ok && bound >= mi - 0.05 && bound <= mi + 0.02;
    detail += fmt::format("MI {:.4f} bound {:.4f}; ", mi, bound);
  }
  const double secs = seconds_since(t0);
  report(4, ok && secs < 120.0, detail + fmt::format("{:.1f} s", secs));
}

double best_cbc(const MetricTable& m, std::uint32_t z, const std::string& metric) {
  return std::min(m.find("cond_bc", z, metric)->mean, m.find("cbc_separate", z, metric)->mean);
}

void pattern_and_calibration(const MetricTable& m, double secs) {
  bool ratio_bc = true, ratio_pmi = true;
  int strictly_better = 0;
  std::string detail;
  for (std::uint32_t z = 0; z < 4; ++z) {
    const double bc = m.find("bc", z, "KL")->mean;
    const double pmi = m.find("bc_pmi", z, "KL")->mean;
    const double cbc = best_cbc(m, z, "KL");
    ratio_bc = ratio_bc && bc >= 10.0 * cbc;
    ratio_pmi = ratio_pmi && pmi <= 1.1 * cbc;
    if (pmi < m.find("cond_bc", z, "KL")->mean && pmi < m.find("cbc_separate", z, "KL")->mean) ++strictly_better;
    detail += fmt::format("z{} BC {:.3f} CBC-best {:.3f} BC-PMI {:.3f}; ", z + 1, bc, cbc, pmi);
  }
  report(5, ratio_bc && ratio_pmi && strictly_better >= 2 && secs < 600.0,
         detail + fmt::format("BC>=10x: {}, BC-PMI<=1.1x: {}, strictly better in {}/4, pipeline {:.0f} s", ratio_bc,
                              ratio_pmi, strictly_better, secs));

  bool ok = true;
  detail.clear();
  for (std::uint32_t z = 0; z < 4; ++z) {
    const double bc = m.find("bc", z, "calibration")->mean;
    const double pmi = m.find("bc_pmi", z, "calibration")->mean;
    const double c1 = m.find("cond_bc", z, "calibration")->mean;
    const double c2 = m.find("cbc_separate", z, "calibration")->mean;
    ok = ok && pmi >= 0.90 && pmi >= std::max(c1, c2) && std::min(c1, c2) > bc && bc <= 0.40;
    detail += fmt::format("z{} BC {:.3f} CBC {:.3f}/{:.3f} BC-PMI {:.3f}; ", z + 1, bc, c1, c2, pmi);
  }
  report(6, ok, detail);
}

void metric_oracles() {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  auto path = [&](std::size_t len) {
    std::vector<Point2> p(len);
    for (auto& q : p) q = {u(rng), u(rng)};
    return p;
  };
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const auto a = path(1 + rng() % 5);
    const auto b = path(1 + rng() % 5);
    if (dtw(a, b) != oracle::dtw_brute_force(a, b)) ++mismatches;
  }
  const auto specs = circle2d::default_styles();
  EnvConfig noisy;
  noisy.noise = {0.05, 0.01, 0};
  double worst_self = 0.0;
  for (std::uint32_t z = 0; z < 4; ++z) {
    const auto ref = rollout(expert_actor(specs, noisy.noise), noisy, z, 50, 1).trajectories;
    worst_self = std::max(worst_self, kl_state_action(ref, ref));
  }
  EnvConfig clean;
  clean.noise = circle2d::NoiseConfig::none();
  const auto label = circle2d_quadrant_label(specs);
  double worst_cal = 1.0;
  for (std::uint32_t z = 0; z < 4; ++z) {
    worst_cal = std::min(worst_cal, calibration(rollout(expert_actor(specs, clean.noise), clean, z, 20, 3), label));
  }
  report(7, mismatches == 0 && worst_self <= 0.01 && worst_cal == 1.0,
         fmt::format("DTW mismatches {}/200, max self-KL {:.2e} (floor 0.01), noise-free expert calibration {:.3f}",
                     mismatches, worst_self, worst_cal));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stylebc_acceptance";
  fs::create_directories(work);
  try {
    gradients();
    prop_independent();
    prop_deterministic();
    mine_oracles();

    StageOptions opt;
    opt.force = true;
    RunConfig a;
    a.out = (work / "repro_a").string();
    auto t0 = Clock::now();
    const auto table = cmd_repro(a, opt);
    const double secs = seconds_since(t0);
    pattern_and_calibration(table, secs);
    metric_oracles();

    RunConfig b = a;
    b.out = (work / "repro_b").string();
    cmd_repro(b, opt);
    const auto ca = slurp(paths::metrics_csv(a)), cb = slurp(paths::metrics_csv(b));
    report(8, !ca.empty() && ca == cb,
           fmt::format("metrics.csv {} bytes, identical across two runs: {}", ca.size(), ca == cb));
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
