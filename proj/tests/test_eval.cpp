#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "stylebc/circle2d.hpp"
#include "stylebc/error.hpp"
#include "stylebc/eval.hpp"
#include "stylebc/report.hpp"

using namespace stylebc;

namespace {

std::vector<Point2> random_path(std::mt19937_64& rng, std::size_t len) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Point2> p(len);
  for (auto& q : p) q = {u(rng), u(rng)};
  return p;
}

EnvConfig noisy_env() {
  EnvConfig env;
  env.noise = {0.05, 0.01, 0};
  return env;
}

}  // namespace

TEST_CASE("DTW equals brute-force enumeration of alignment paths") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_path(rng, 1 + rng() % 5);
    const auto b = random_path(rng, 1 + rng() % 5);
    CHECK(dtw(a, b) == oracle::dtw_brute_force(a, b));
  }
}

TEST_CASE("DTW and ED properties") {
  std::mt19937_64 rng(7);
  const auto a = random_path(rng, 30), b = random_path(rng, 30);
  CHECK(dtw(a, a) == 0.0);
  CHECK(euclid_dist(a, a) == 0.0);
  CHECK(dtw(a, b) == doctest::Approx(dtw(b, a)).epsilon(1e-14));
  CHECK(dtw(a, b) <= euclid_dist(a, b) + 1e-12);  // the diagonal is one admissible alignment

  const std::vector<Point2> p{{0, 0}, {1, 0}}, q{{0, 1}, {1, 1}};
  CHECK(euclid_dist(p, q) == doctest::Approx(2.0));
  const std::vector<Point2> r{{0, 0}};
  CHECK_THROWS_AS(euclid_dist(p, r), ShapeError);
}

TEST_CASE("KL of a set against itself is zero and disjoint sets are far apart") {
  const auto specs = circle2d::default_styles();
  const auto env = noisy_env();
  const auto ref = rollout(expert_actor(specs, env.noise), env, 0, 20, 1).trajectories;
  CHECK(kl_state_action(ref, ref) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  const auto other = rollout(expert_actor(specs, env.noise), env, 2, 20, 1).trajectories;
  CHECK(kl_state_action(other, ref) > 1.0);
  // Independent expert rollouts of the same style sit near the floor.
  const auto again = rollout(expert_actor(specs, env.noise), env, 0, 20, 99).trajectories;
  CHECK(kl_state_action(again, ref) < 0.2);

  // Same positions, every action reversed: the two histograms share no occupied cell.
  // 100 episodes is the per-cell evaluation size.
  const auto big = rollout(expert_actor(specs, env.noise), env, 0, 100, 1).trajectories;
  auto reversed = big;
  for (auto& t : reversed) {
    for (auto& s : t.steps) s.action_bin = static_cast<std::uint16_t>((s.action_bin + 36) % 72);
  }
  const double disjoint = kl_state_action(reversed, big);
  CHECK(disjoint > 2.0);
  CHECK(std::isfinite(disjoint));
}

TEST_CASE("a smaller smoothing constant lowers the floor between close sets") {
  const auto specs = circle2d::default_styles();
  const auto env = noisy_env();
  const auto ref = rollout(expert_actor(specs, env.noise), env, 1, 20, 1).trajectories;
  const auto gen = rollout(expert_actor(specs, env.noise), env, 1, 20, 2).trajectories;
  KlConfig coarse, fine;
  fine.smoothing = 0.05;
  CHECK(kl_state_action(ref, ref, fine) <= kl_state_action(ref, ref, coarse) + 1e-15);
  CHECK(kl_state_action(gen, ref, coarse) > 0.0);
}

TEST_CASE("KL rejects empty sets and bad grids") {
  const auto specs = circle2d::default_styles();
  const auto env = noisy_env();
  const auto ref = rollout(expert_actor(specs, env.noise), env, 0, 2, 1).trajectories;
  const std::vector<Trajectory> none;
  CHECK_THROWS_AS(kl_state_action(none, ref), EmptyDatasetError);
  KlConfig bad;
  bad.octants = 7;
  CHECK_THROWS_AS(kl_state_action(ref, ref, bad), UsageError);
  bad = {};
  bad.smoothing = 0.0;
  CHECK_THROWS_AS(kl_state_action(ref, ref, bad), UsageError);
}

TEST_CASE("histograms are smoothed probability vectors and clamp outside points") {
  const auto specs = circle2d::default_styles();
  const auto env = noisy_env();
  const auto ref = rollout(expert_actor(specs, env.noise), env, 1, 3, 1).trajectories;
  KlConfig cfg;
  const auto b = reference_bounds(ref, cfg.expand);
  const auto h = state_action_histogram(ref, b, cfg);
  CHECK(h.size() == cfg.grid * cfg.grid * cfg.octants);
  double sum = 0.0;
  for (double v : h) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0));
  const auto far = rollout(expert_actor(specs, env.noise), env, 3, 3, 1).trajectories;
  const auto hf = state_action_histogram(far, b, cfg);
  double sum_far = 0.0;
  for (double v : hf) sum_far += v;
  CHECK(sum_far == doctest::Approx(1.0));
}

TEST_CASE("action octants are centred on heading 0") {
  CHECK(action_octant(0) == 0);
  CHECK(action_octant(4) == 0);
  CHECK(action_octant(5) == 1);
  CHECK(action_octant(71) == 0);
  CHECK(action_octant(68) == 0);
  CHECK(action_octant(67) == 7);
  CHECK(action_octant(66) == 7);
  CHECK(action_octant(9) == 1);
}

TEST_CASE("calibration: noise-free experts are perfect, a style-blind actor is near chance") {
  const auto specs = circle2d::default_styles();
  const auto label = circle2d_quadrant_label(specs);
  EnvConfig clean;
  clean.noise = circle2d::NoiseConfig::none();
  for (std::uint32_t z = 0; z < 4; ++z) {
    CHECK(calibration(rollout(expert_actor(specs, clean.noise), clean, z, 10, 3), label) == 1.0);
  }
  const auto env = noisy_env();
  for (std::uint32_t z = 0; z < 4; ++z) {
    CHECK(calibration(rollout(expert_actor(specs, env.noise), env, z, 50, 3), label) == 1.0);
  }
  // Ignores the intended style and imitates a uniformly drawn expert per episode.
  const Actor blind = [specs, noise = env.noise](const circle2d::EnvState& s, std::uint32_t, Rng& rng) {
    // Picks a style at the first step and keeps it for the episode (rollouts run on one thread here).
    thread_local std::uint32_t pick = 0;
    if (s.time_step == 0) pick = static_cast<std::uint32_t>(rng() % 4);
    return circle2d::expert_action(specs[pick], s, noise, rng);
  };
  double mean = 0.0;
  for (std::uint32_t z = 0; z < 4; ++z) mean += calibration(rollout(blind, env, z, 400, 5), label) / 4.0;
  CHECK(mean == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("rollouts are deterministic and independent of the thread count") {
  const auto specs = circle2d::default_styles();
  const auto env = noisy_env();
  const auto a = rollout(expert_actor(specs, env.noise), env, 2, 8, 11, "x", 1);
  const auto b = rollout(expert_actor(specs, env.noise), env, 2, 8, 11, "x", 3);
  CHECK(a.trajectories == b.trajectories);
  const auto c = rollout(expert_actor(specs, env.noise), env, 2, 8, 12, "x", 1);
  CHECK_FALSE(a.trajectories == c.trajectories);
  for (const auto& t : a.trajectories) CHECK(t.steps.size() == circle2d::kHorizon);
}

TEST_CASE("report: every cell present, values independent of policy order, CSV and JSON round trip") {
  const auto specs = circle2d::default_styles();
  ReportConfig cfg;
  cfg.env = noisy_env();
  cfg.seeds = {1, 2};
  cfg.episodes = 4;
  const auto label = circle2d_quadrant_label(specs);
  const auto expert = expert_actor(specs, cfg.env.noise);
  const Actor lazy = [](const circle2d::EnvState&, std::uint32_t, Rng&) { return circle2d::DirectionAction{0}; };
  const PolicyUnderTest pe{"expert", {expert, expert}}, pl{"lazy", {lazy, lazy}};
  const auto t1 = build_report({pe, pl}, cfg, label);
  const auto t2 = build_report({pl, pe}, cfg, label);
  CHECK(t1.cells.size() == 2 * 4 * kMetricNames.size());
  for (const auto& c : t1.cells) {
    const auto* other = t2.find(c.policy, c.style, c.metric);
    REQUIRE(other != nullptr);
    CHECK(other->per_seed == c.per_seed);
    CHECK(c.seeds == 2);
    CHECK(c.episodes == 4);
  }
  for (std::uint32_t z = 0; z < 4; ++z) {
    CHECK(t1.find("expert", z, "calibration")->mean == 1.0);
    CHECK(t1.find("lazy", z, "KL")->mean > t1.find("expert", z, "KL")->mean);
    CHECK(t1.find("lazy", z, "DTW")->mean > t1.find("expert", z, "DTW")->mean);
  }
  const auto back = table_from_json(to_json(t1));
  CHECK(back.cells.size() == t1.cells.size());
  CHECK(back.cells[5].per_seed == t1.cells[5].per_seed);

  std::ostringstream csv;
  write_csv(csv, t1);
  CHECK(csv.str().rfind("policy,style,metric,mean,std,seeds,episodes\n", 0) == 0);

  const auto md = summary_markdown(t1, "t");
  CHECK(md.find("| Class 1 | KL |") != std::string::npos);
  CHECK(md.find("±") != std::string::npos);
}

TEST_CASE("sample standard deviation across seeds") {
  const auto specs = circle2d::default_styles();
  ReportConfig cfg;
  cfg.env = noisy_env();
  cfg.seeds = {1, 2, 3};
  cfg.episodes = 2;
  const auto expert = expert_actor(specs, cfg.env.noise);
  const auto t = build_report({{"expert", {expert, expert, expert}}}, cfg, circle2d_quadrant_label(specs));
  const auto* c = t.find("expert", 1, "DTW");
  REQUIRE(c);
  const double m = (c->per_seed[0] + c->per_seed[1] + c->per_seed[2]) / 3.0;
  double ss = 0.0;
  for (double v : c->per_seed) ss += (v - m) * (v - m);
  CHECK(c->mean == doctest::Approx(m));
  CHECK(c->std == doctest::Approx(std::sqrt(ss / 2.0)));
}
