#include "stylebc/mine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stylebc/error.hpp"

namespace stylebc {

void encode_mine_input(const Observation& obs, std::uint16_t action_bin, std::uint32_t style,
                       std::uint32_t num_styles, std::span<double> out) {
  if (out.size() != kObsDim + 2 + num_styles) throw ShapeError("MINE input buffer has the wrong length");
  if (style >= num_styles) throw LabelRangeError(fmt::format("style {} out of range for K = {}", style, num_styles));
  std::copy(obs.begin(), obs.end(), out.begin());
  const double heading = action_bin * circle2d::kBinWidth;
  out[kObsDim] = std::sin(heading);
  out[kObsDim + 1] = std::cos(heading);
  std::fill(out.begin() + kObsDim + 2, out.end(), 0.0);
  out[kObsDim + 2 + style] = 1.0;
}

std::vector<double> encode_mine_input(const Observation& obs, std::uint16_t action_bin, std::uint32_t style,
                                      std::uint32_t num_styles) {
  std::vector<double> x(kObsDim + 2 + num_styles);
  encode_mine_input(obs, action_bin, style, num_styles, x);
  return x;
}

double MineEstimator::statistic(const Observation& obs, std::uint16_t action_bin, std::uint32_t style) const {
  return net.forward(encode_mine_input(obs, action_bin, style, num_styles))[0];
}

namespace {

/// log((1/n) sum exp(v)) with max shift.
double log_mean_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(v.size()));
}

}  // namespace

double dv_bound(const MineEstimator& est, std::span<const Sample> joint_batch,
                std::span<const std::uint32_t> marginal_styles) {
  if (joint_batch.size() != marginal_styles.size() || joint_batch.size() < 2) {
    throw ShapeError("dv_bound: joint and marginal batches must have the same size >= 2");
  }
  NetWorkspace ws(est.net);
  std::vector<double> x(kObsDim + 2 + est.num_styles);
  double joint_sum = 0.0;
  std::vector<double> marg(joint_batch.size());
  for (std::size_t i = 0; i < joint_batch.size(); ++i) {
    const auto& s = joint_batch[i];
    encode_mine_input(*s.observation, s.action_bin, s.style_id, est.num_styles, x);
    joint_sum += ws.forward(est.net, x)[0];
    encode_mine_input(*s.observation, s.action_bin, marginal_styles[i], est.num_styles, x);
    marg[i] = ws.forward(est.net, x)[0];
  }
  return joint_sum / static_cast<double>(joint_batch.size()) - log_mean_exp(marg);
}

MineEstimator train_mine(const StyleDataset& ds, const MineConfig& config) {
  if (ds.empty()) throw EmptyDatasetError("train_mine: dataset is empty");
  const auto populated = std::count_if(ds.style_counts().begin(), ds.style_counts().end(),
                                       [](std::size_t c) { return c > 0; });
  if (populated < 2) throw UsageError("train_mine: need samples from at least two styles");
  if (config.batch < 2) throw UsageError("train_mine: batch must be at least 2");
  if (!(config.ema_decay > 0.0 && config.ema_decay < 1.0)) throw UsageError("train_mine: ema_decay must lie in (0,1)");

  const std::uint32_t k = ds.num_styles();
  const std::size_t in_dim = kObsDim + 2 + k;
  MineEstimator est;
  est.num_styles = k;
  est.ema_decay = config.ema_decay;
  est.net = MlpNet::glorot({in_dim, config.hidden, 1}, config.activation, derive_seed(config.seed, "mine-init"));
  est.mi_history.reserve(config.iterations);

  Rng rng(derive_seed(config.seed, "mine-batches"));
  const auto prior = style_prior(ds);
  AdamState adam(est.net, config.lr);
  GradBundle grad(est.net);
  BatchWorkspace ws;
  const auto b = static_cast<Eigen::Index>(config.batch);
  // Columns [0, b) hold joint samples, [b, 2b) the same (s, a) with marginal styles.
  Eigen::MatrixXd x(static_cast<Eigen::Index>(in_dim), 2 * b);
  Eigen::MatrixXd upstream(1, 2 * b);
  std::vector<double> t_marg(config.batch);
  const double inv_b = 1.0 / static_cast<double>(config.batch);
  bool ema_ready = false;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const auto joint = sample_joint(ds, config.batch, rng);
    const auto zbar = sample_marginal_styles(joint, config.marginal, prior, rng);
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto& s = joint[static_cast<std::size_t>(i)];
      encode_mine_input(*s.observation, s.action_bin, s.style_id, k, std::span<double>(x.col(i).data(), in_dim));
      encode_mine_input(*s.observation, s.action_bin, zbar[static_cast<std::size_t>(i)], k,
                        std::span<double>(x.col(b + i).data(), in_dim));
    }
    grad.zero();
    double bound = 0.0;
    try {
      const auto& t = ws.forward(est.net, x);
      const double joint_mean = t.leftCols(b).sum() * inv_b;
      for (Eigen::Index i = 0; i < b; ++i) t_marg[static_cast<std::size_t>(i)] = t(0, b + i);
      const double lme = log_mean_exp(t_marg);
      const double batch_mean_exp = std::exp(lme);
      bound = joint_mean - lme;
      if (!std::isfinite(bound) || !std::isfinite(batch_mean_exp)) throw NumericError("non-finite bound");

      // Bias-corrected gradient of log E[e^T]: divide by the running mean instead of the batch mean.
      if (!ema_ready) {
        est.ema_denominator = batch_mean_exp;
        ema_ready = true;
      } else {
        est.ema_denominator = config.ema_decay * est.ema_denominator + (1.0 - config.ema_decay) * batch_mean_exp;
      }
      // Ascent on the bound == descent on its negation.
      upstream.leftCols(b).setConstant(-inv_b);
      for (Eigen::Index i = 0; i < b; ++i) {
        upstream(0, b + i) = std::exp(t(0, b + i)) * inv_b / est.ema_denominator;
      }
      ws.backward(est.net, upstream, grad);
      adam_step(est.net, adam, grad);
    } catch (const NumericError& e) {
      throw NumericError(fmt::format("MINE diverged at iteration {}: {}", it, e.what()));
    }
    est.mi_history.push_back(bound);
  }
  return est;
}

double estimate_bound(const MineEstimator& est, const StyleDataset& ds, std::size_t samples, Rng& rng,
                      MarginalStrategy marginal) {
  const auto joint = sample_joint(ds, samples, rng);
  const auto prior = style_prior(ds);
  const auto zbar = sample_marginal_styles(joint, marginal, prior, rng);
  return dv_bound(est, joint, zbar);
}

double log_pmi(const MineEstimator& est, const Observation& obs, std::uint16_t action_bin, std::uint32_t style) {
  return est.statistic(obs, action_bin, style) - std::log(est.ema_denominator);
}

double pmi_weight(const MineEstimator& est, const Observation& obs, std::uint16_t action_bin, std::uint32_t style,
                  double w_max) {
  return std::clamp(std::exp(log_pmi(est, obs, action_bin, style)), 0.0, w_max);
}

void save_estimator(const std::filesystem::path& stem, const MineEstimator& est, const std::string& extra_json) {
  auto net_path = stem;
  net_path += ".sbnn";
  save_net(net_path, est.net);
  nlohmann::json side = nlohmann::json::parse(extra_json);
  side["ema_denominator"] = est.ema_denominator;
  side["ema_decay"] = est.ema_decay;
  side["K"] = est.num_styles;
  side["mi_history"] = est.mi_history;
  auto side_path = stem;
  side_path += ".json";
  std::ofstream os(side_path);
  if (!os) throw IoError("cannot open " + side_path.string() + " for writing");
  os << side.dump(1) << '\n';
}

MineEstimator load_estimator(const std::filesystem::path& stem) {
  auto net_path = stem;
  net_path += ".sbnn";
  auto side_path = stem;
  side_path += ".json";
  MineEstimator est;
  est.net = load_net(net_path);
  std::ifstream is(side_path);
  if (!is) throw IoError("cannot open " + side_path.string());
  nlohmann::json side;
  try {
    is >> side;
    est.ema_denominator = side.at("ema_denominator").get<double>();
    est.ema_decay = side.at("ema_decay").get<double>();
    est.num_styles = side.at("K").get<std::uint32_t>();
    est.mi_history = side.at("mi_history").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side_path.string() + ": " + e.what());
  }
  if (est.net.output_dim() != 1 || est.net.input_dim() != kObsDim + 2 + est.num_styles) {
    throw FormatError("estimator network shape does not match its sidecar K");
  }
  if (!(est.ema_denominator > 0.0)) throw FormatError("estimator sidecar has a non-positive ema_denominator");
  return est;
}

}  // namespace stylebc
