#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stylebc/circle2d.hpp"
#include "stylebc/error.hpp"

using namespace stylebc;
using namespace stylebc::circle2d;

namespace {

Point2 circumcenter(Point2 a, Point2 b, Point2 c) {
  const double d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
  const double a2 = a.x * a.x + a.y * a.y, b2 = b.x * b.x + b.y * b.y, c2 = c.x * c.x + c.y * c.y;
  return {(a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d,
          (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d};
}

}  // namespace

TEST_CASE("reset puts the agent at the origin with a zero history") {
  const auto s = reset(123);
  CHECK(s.position == Point2{0.0, 0.0});
  CHECK(s.time_step == 0);
  for (const auto& p : s.history) CHECK(p == Point2{0.0, 0.0});
  CHECK(reset(123) == reset(123));
  CHECK(reset(1) == reset(2));
  for (double v : s.observation()) CHECK(v == 0.0);
}

TEST_CASE("noise-free steps follow unit geometry") {
  Rng rng(0);
  const auto none = NoiseConfig::none();
  const auto s1 = step(reset(), {0}, none, rng);
  CHECK(s1.position.x == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s1.position.y == 0.0);
  CHECK(s1.time_step == 1);
  CHECK(s1.history.back() == s1.position);
  CHECK(s1.history[3] == Point2{0.0, 0.0});

  const auto s2 = step(reset(), {18}, none, rng);
  CHECK(std::abs(s2.position.x) < 1e-12);
  CHECK(std::abs(s2.position.y - 0.1) < 1e-12);

  for (int bin : {0, 7, 18, 41}) {
    auto s = reset();
    for (int t = 0; t < kHorizon; ++t) s = step(s, {bin}, none, rng);
    const double th = bin * kBinWidth;
    CHECK(s.position.x == doctest::Approx(30.0 * std::cos(th)).epsilon(1e-9).scale(1.0));
    CHECK(s.position.y == doctest::Approx(30.0 * std::sin(th)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("stepping a terminal state is an episode-over error") {
  Rng rng(0);
  auto s = reset();
  for (int t = 0; t < kHorizon; ++t) s = step(s, {3}, NoiseConfig::none(), rng);
  CHECK(s.time_step == kHorizon);
  CHECK_THROWS_AS(step(s, {3}, NoiseConfig::none(), rng), EpisodeOverError);
  CHECK_THROWS_AS(step(reset(), {72}, NoiseConfig::none(), rng), ShapeError);
}

TEST_CASE("expert actions: translation bin and phase boundary") {
  const auto styles = default_styles();
  Rng rng(0);
  EnvState s = reset();
  s.time_step = 10;
  CHECK(expert_action(styles[0], s, NoiseConfig::none(), rng).bin == 9);

  for (const auto& spec : styles) {
    const double h74 = expert_heading(spec, 74), h75 = expert_heading(spec, 75);
    CHECK(h74 == spec.translation_heading);
    CHECK(h75 - h74 == doctest::Approx(spec.angular_velocity).epsilon(1e-15));
    CHECK(expert_heading(spec, 200) - expert_heading(spec, 199) == doctest::Approx(spec.angular_velocity));
  }
}

TEST_CASE("nearest bin wraps negative and large angles") {
  CHECK(DirectionAction::nearest(0.0).bin == 0);
  CHECK(DirectionAction::nearest(-kBinWidth).bin == 71);
  CHECK(DirectionAction::nearest(2.0 * std::numbers::pi + 2 * kBinWidth).bin == 2);
  CHECK(DirectionAction::nearest(0.49 * kBinWidth).bin == 0);
  CHECK(DirectionAction::nearest(0.51 * kBinWidth).bin == 1);
}

TEST_CASE("noise-free expert positions after the translation phase lie on the closed-form circle") {
  for (const auto& spec : default_styles()) {
    const auto traj = expert_episode(spec, 0, NoiseConfig::none());
    auto pos = traj.positions();
    // positions() holds pre-action positions; append the final one.
    Rng rng(0);
    const auto last = step(EnvState{pos.back(), kHorizon - 1, {}}, {traj.steps.back().action_bin},
                           NoiseConfig::none(), rng);
    pos.push_back(last.position);
    const double r = turning_radius(kSpeed, spec.angular_velocity);
    const Point2 c = circumcenter(pos[75], pos[76], pos[77]);
    double worst = 0.0;
    for (std::size_t t = 75; t < pos.size(); ++t) {
      worst = std::max(worst, std::abs(std::hypot(pos[t].x - c.x, pos[t].y - c.y) - r));
    }
    INFO("style " << spec.style_id << " radius " << r);
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("default styles close at least one loop and land in distinct quadrants") {
  const auto styles = default_styles();
  CHECK_NOTHROW(validate_styles(styles));
  for (const auto& spec : styles) {
    const auto pos = expert_episode(spec, 0, NoiseConfig::none()).positions();
    double cx = 0.0, cy = 0.0;
    for (std::size_t t = 75; t < pos.size(); ++t) {
      cx += pos[t].x;
      cy += pos[t].y;
    }
    CHECK(cx * std::cos(spec.translation_heading) > 0.0);
    CHECK(cy * std::sin(spec.translation_heading) > 0.0);
  }
  auto bad = styles;
  bad[1].style_id = 3;
  CHECK_THROWS_AS(validate_styles(bad), UsageError);
  bad = styles;
  bad[0].angular_velocity = 0.01;
  CHECK_THROWS_AS(validate_styles(bad), UsageError);
}

TEST_CASE("generate_demos counts, determinism and noise-free replay") {
  const auto styles = default_styles();
  const auto demos = generate_demos(styles, 1, NoiseConfig{0.05, 0.01, 7});
  REQUIRE(demos.size() == 4);
  std::size_t samples = 0;
  for (const auto& d : demos) {
    samples += d.steps.size();
    for (const auto& st : d.steps) CHECK(st.action_bin < kActionBins);
  }
  CHECK(samples == 1200);
  CHECK(generate_demos(styles, 2, NoiseConfig{0.05, 0.01, 7}, kSpeed, 3) ==
        generate_demos(styles, 2, NoiseConfig{0.05, 0.01, 7}, kSpeed, 1));

  const auto clean = generate_demos(styles, 2, NoiseConfig::none(9));
  for (std::size_t s = 0; s < 4; ++s) CHECK(clean[2 * s].steps == clean[2 * s + 1].steps);

  // Replaying stored actions reproduces stored positions exactly.
  Rng rng(0);
  for (const auto& traj : clean) {
    EnvState st = reset();
    for (const auto& step_rec : traj.steps) {
      CHECK(st.observation() == step_rec.observation);
      st = step(st, {step_rec.action_bin}, NoiseConfig::none(), rng);
    }
  }
}

TEST_CASE("noisy demonstrations stay close to the noise-free path on average") {
  const auto styles = default_styles();
  const NoiseConfig noise{0.05, 0.01, 2024};
  for (const auto& spec : styles) {
    const auto ref = expert_episode(spec, 0, NoiseConfig::none()).positions();
    std::vector<Point2> mean(ref.size());
    constexpr int episodes = 100;
    for (int e = 0; e < episodes; ++e) {
      const auto p = expert_episode(spec, static_cast<std::uint32_t>(e), noise).positions();
      for (std::size_t t = 0; t < p.size(); ++t) {
        mean[t].x += p[t].x / episodes;
        mean[t].y += p[t].y / episodes;
      }
    }
    double worst = 0.0;
    for (std::size_t t = 0; t < ref.size(); ++t) {
      worst = std::max(worst, std::hypot(mean[t].x - ref[t].x, mean[t].y - ref[t].y));
    }
    INFO("style " << spec.style_id);
    CHECK(worst < 0.5);
  }
}

TEST_CASE("distinct styles share only the initial state") {
  const auto styles = default_styles();
  std::vector<std::vector<Point2>> paths;
  for (const auto& s : styles) paths.push_back(expert_episode(s, 0, NoiseConfig::none()).positions());
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) {
      CHECK(paths[a][0] == paths[b][0]);
      for (std::size_t t = 1; t < 75; ++t) CHECK_FALSE(paths[a][t] == paths[b][t]);
    }
  }
}
