#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "stylebc/error.hpp"
#include "stylebc/nn.hpp"

using namespace stylebc;

TEST_CASE("every loss head matches central differences on every net shape") {
  auto shapes = oracle::default_policy_shapes();
  shapes.push_back({"conditioned policy 14-32-32-72", {14, 32, 32, 72}});  // policy.hidden_layers = 2
  for (const auto& c : oracle::gradient_suite(20, shapes)) {
    INFO(c.name);
    CHECK(c.max_rel_error < 1e-4);
  }
}

TEST_CASE("relu hidden layers also pass the gradient check") {
  std::mt19937_64 rng(3);
  const auto net = MlpNet::glorot({6, 16, 5}, Activation::relu, 11);
  const auto x = oracle::random_input(6, rng);
  const auto g = loss_and_grad_ce(net, x, 2, 1.7);
  const auto rep =
      gradient_check(net, [&](const MlpNet& n) { return -1.7 * log_softmax(n.forward(x))[2]; }, g.grads, 1e-4);
  CHECK(rep.passed);
}

TEST_CASE("batched forward equals per-sample forward, batched gradient equals summed per-sample gradients") {
  std::mt19937_64 rng(8);
  const auto net = MlpNet::glorot({14, 32, 32, 72}, Activation::tanh, 5);
  constexpr Eigen::Index b = 9;
  Eigen::MatrixXd x(14, b);
  std::vector<std::size_t> targets(b);
  std::vector<double> weights(b);
  GradBundle summed(net);
  NetWorkspace single(net);
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto col = oracle::random_input(14, rng, 3.0);
    for (Eigen::Index r = 0; r < 14; ++r) x(r, j) = col[static_cast<std::size_t>(r)];
    targets[static_cast<std::size_t>(j)] = rng() % 72;
    weights[static_cast<std::size_t>(j)] = 0.1 * static_cast<double>(j) - 0.3;
    accumulate_ce(net, single, col, targets[static_cast<std::size_t>(j)], weights[static_cast<std::size_t>(j)],
                  summed);
  }
  BatchWorkspace ws;
  const Eigen::MatrixXd out = ws.forward(net, x);
  for (Eigen::Index j = 0; j < b; ++j) {
    std::vector<double> col(14);
    for (Eigen::Index r = 0; r < 14; ++r) col[static_cast<std::size_t>(r)] = x(r, j);
    const auto ref = net.forward(col);
    for (Eigen::Index k = 0; k < 72; ++k) CHECK(out(k, j) == doctest::Approx(ref[static_cast<std::size_t>(k)]).epsilon(1e-12));
  }
  GradBundle batched(net);
  const double loss = accumulate_ce_batch(net, ws, x, targets, weights, batched);
  CHECK(loss == doctest::Approx(summed.loss).epsilon(1e-12));
  for (std::size_t i = 0; i < summed.grads.size(); ++i) {
    CHECK(std::abs(batched.grads[i] - summed.grads[i]) < 1e-12 + 1e-10 * std::abs(summed.grads[i]));
  }
}

TEST_CASE("adam first step moves every parameter by lr * sign(g)") {
  auto net = MlpNet::glorot({3, 4, 2}, Activation::tanh, 1);
  const auto before = std::vector<double>(net.params().begin(), net.params().end());
  AdamState st(net, 0.01);
  GradBundle g(net);
  for (std::size_t i = 0; i < g.grads.size(); ++i) g.grads[i] = (i % 2 ? 1.0 : -1.0) * (0.5 + static_cast<double>(i));
  adam_step(net, st, g);
  for (std::size_t i = 0; i < before.size(); ++i) {
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
    const double gi = g.grads[i];
    CHECK(net.params()[i] == doctest::Approx(before[i] - 0.01 * gi / (std::abs(gi) + 1e-8)).epsilon(1e-14));
  }
  CHECK(st.step_count == 1);
}

TEST_CASE("adam second step matches the bias-corrected closed form") {
  auto net = MlpNet({1, 1}, Activation::tanh);
  AdamState st(net, 0.1);
  GradBundle g(net);
  g.grads = {2.0, -1.0};
  adam_step(net, st, g);
  g.grads = {-4.0, 3.0};
  adam_step(net, st, g);
  for (int i = 0; i < 2; ++i) {
    const double g1 = i == 0 ? 2.0 : -1.0, g2 = i == 0 ? -4.0 : 3.0;
    const double step1 = 0.1 * g1 / (std::abs(g1) + 1e-8);
    const double m = 0.9 * 0.1 * g1 + 0.1 * g2;
    const double v = 0.999 * 0.001 * g1 * g1 + 0.001 * g2 * g2;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    const double expect = -step1 - 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(net.params()[static_cast<std::size_t>(i)] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("non-finite gradients are rejected before any parameter changes") {
  auto net = MlpNet::glorot({3, 4, 2}, Activation::tanh, 2);
  const MlpNet copy = net;
  AdamState st(net, 0.01);
  GradBundle g(net);
  g.grads[5] = std::nan("");
  CHECK_THROWS_AS(adam_step(net, st, g), NumericError);
  CHECK(net == copy);
  CHECK(st.step_count == 0);
}

TEST_CASE("non-finite activations are reported as numeric errors") {
  auto net = MlpNet::glorot({2, 3, 2}, Activation::tanh, 4);
  net.weight(0)[0] = std::numeric_limits<double>::infinity();
  NetWorkspace ws(net);
  const std::vector<double> x{1.0, 0.0};
  CHECK_THROWS_AS(ws.forward(net, x), NumericError);
  BatchWorkspace bw;
  Eigen::MatrixXd xm(2, 1);
  xm << 1.0, 0.0;
  CHECK_THROWS_AS(bw.forward(net, xm), NumericError);
}

TEST_CASE("shape mismatches throw") {
  const auto net = MlpNet::glorot({3, 4, 2}, Activation::tanh, 2);
  const std::vector<double> x{1.0, 2.0};
  CHECK_THROWS_AS(net.forward(x), ShapeError);
  const std::vector<double> ok{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(loss_and_grad_ce(net, ok, 2, 1.0), ShapeError);
  CHECK_THROWS_AS(loss_and_grad_scalar(net, ok, 1.0), ShapeError);
}

TEST_CASE("tanh of large pre-activations saturates to exactly +-1 in the batched path") {
  auto net = MlpNet({1, 1, 1}, Activation::tanh);
  net.weight(0)[0] = 1.0;
  net.weight(1)[0] = 1.0;
  BatchWorkspace ws;
  Eigen::MatrixXd x(1, 4);
  x << 1e6, -1e6, 0.0, 0.5;
  const auto& out = ws.forward(net, x);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == -1.0);
  CHECK(out(0, 2) == 0.0);
  CHECK(out(0, 3) == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("log_softmax is stable for huge logits") {
  const std::vector<double> l{1000.0, 0.0, -1000.0};
  const auto lp = log_softmax(l);
  CHECK(lp[0] == doctest::Approx(0.0));
  CHECK(lp[1] == doctest::Approx(-1000.0));
  const auto p = softmax(l);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
}

TEST_CASE("checkpoints round-trip bit-exactly and reject corruption") {
  const auto net = MlpNet::glorot({14, 32, 72}, Activation::tanh, 9);
  std::stringstream ss;
  write_net(ss, net);
  const std::string bytes = ss.str();
  std::stringstream in(bytes);
  CHECK(read_net(in) == net);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_net(truncated), FormatError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream bm(bad_magic);
  CHECK_THROWS_AS(read_net(bm), FormatError);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  std::stringstream bv(bad_version);
  CHECK_THROWS_AS(read_net(bv), FormatError);

  CHECK_THROWS_AS(load_net("/nonexistent/dir/net.sbnn"), IoError);
}

TEST_CASE("glorot init is seeded and bounded") {
  const auto a = MlpNet::glorot({10, 32, 72}, Activation::tanh, 1);
  const auto b = MlpNet::glorot({10, 32, 72}, Activation::tanh, 1);
  const auto c = MlpNet::glorot({10, 32, 72}, Activation::tanh, 2);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const double s0 = std::sqrt(6.0 / 42.0);
  for (double w : a.weight(0)) CHECK(std::abs(w) <= s0);
  for (double v : a.bias(1)) CHECK(v == 0.0);
}
