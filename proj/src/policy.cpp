#include "stylebc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stylebc/error.hpp"
#include "stylebc/parallel.hpp"

namespace stylebc {

const char* to_string(PolicyMode mode) {
  switch (mode) {
    case PolicyMode::bc:
      return "bc";
    case PolicyMode::cond_bc:
      return "cond_bc";
    case PolicyMode::cbc_separate:
      return "cbc_separate";
    case PolicyMode::bc_pmi:
      return "bc_pmi";
  }
  return "?";
}

PolicyMode policy_mode_from_string(const std::string& name) {
  for (auto m : {PolicyMode::bc, PolicyMode::cond_bc, PolicyMode::cbc_separate, PolicyMode::bc_pmi}) {
    if (name == to_string(m)) return m;
  }
  throw UsageError("unknown policy mode '" + name + "'");
}

namespace {
bool uses_style_input(PolicyMode mode) { return mode == PolicyMode::cond_bc || mode == PolicyMode::bc_pmi; }
}  // namespace

std::size_t policy_input_dim(PolicyMode mode, std::uint32_t num_styles) {
  return kPolicyFeatureDim + (uses_style_input(mode) ? num_styles : 0);
}

void encode_policy_input(const Observation& obs, std::optional<std::uint32_t> style, std::uint32_t num_styles,
                         bool conditioned, std::span<double> out) {
  std::copy(obs.begin(), obs.end(), out.begin());
  if (!conditioned) return;
  if (!style || *style >= num_styles) throw UsageError("conditioned policy input needs a style in range");
  std::fill(out.begin() + kPolicyFeatureDim, out.end(), 0.0);
  out[kPolicyFeatureDim + *style] = 1.0;
}

Policy::Policy(PolicyMode mode, std::uint32_t num_styles, std::vector<MlpNet> nets)
    : mode_(mode), k_(num_styles), nets_(std::move(nets)) {
  const std::size_t expected_nets = mode == PolicyMode::cbc_separate ? num_styles : 1;
  if (nets_.size() != expected_nets) {
    throw ShapeError(fmt::format("{} policy needs {} nets, got {}", to_string(mode), expected_nets, nets_.size()));
  }
  for (const auto& n : nets_) {
    if (n.input_dim() != policy_input_dim(mode, num_styles) || n.output_dim() != circle2d::kActionBins) {
      throw ShapeError(fmt::format("{} policy net has shape {}->{}", to_string(mode), n.input_dim(), n.output_dim()));
    }
  }
}

std::vector<double> Policy::logits(const Observation& obs, std::optional<std::uint32_t> style) const {
  if (conditioned() && !style) throw UsageError(fmt::format("{} policy requires a style id", to_string(mode_)));
  if (style && *style >= k_ && conditioned()) throw UsageError(fmt::format("style {} out of range", *style));
  std::vector<double> x(policy_input_dim(mode_, k_));
  encode_policy_input(obs, style, k_, uses_style_input(mode_), x);
  return nets_[mode_ == PolicyMode::cbc_separate ? *style : 0].forward(x);
}

circle2d::DirectionAction act(const Policy& policy, const Observation& obs, std::optional<std::uint32_t> style,
                              Rng& rng, bool greedy) {
  const auto logits = policy.logits(obs, style);
  if (greedy) {
    // max_element returns the first maximum, i.e. the lowest bin on ties
    return {static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin())};
  }
  const auto p = softmax(logits);
  std::discrete_distribution<int> draw(p.begin(), p.end());
  return {draw(rng)};
}

namespace {

struct BaselineTracker {
  double value = 0.0;
  double decay = 0.99;
  bool initialized = false;

  void update(double batch_mean) {
    value = initialized ? decay * value + (1.0 - decay) * batch_mean : batch_mean;
    initialized = true;
  }
};

/// Minibatch Adam over `indices` (flat positions into ds) with per-sample weights.
MlpNet fit(const StyleDataset& ds, std::span<const std::size_t> indices, std::span<const double> weights,
           bool conditioned, const PolicyTrainConfig& cfg, std::uint64_t net_seed, TrainLog* log) {
  if (indices.empty()) throw EmptyDatasetError("policy training: no samples");
  if (cfg.batch == 0 || cfg.epochs < 0) throw UsageError("policy training: batch must be positive, epochs >= 0");
  const std::uint32_t k = ds.num_styles();
  const std::size_t in_dim = kPolicyFeatureDim + (conditioned ? k : 0);
  std::vector<std::size_t> dims{in_dim};
  for (std::size_t l = 0; l < std::max<std::size_t>(cfg.hidden_layers, 1); ++l) dims.push_back(cfg.hidden);
  dims.push_back(circle2d::kActionBins);
  MlpNet net = MlpNet::glorot(dims, cfg.activation, net_seed);
  AdamState adam(net, cfg.lr);
  GradBundle grad(net);
  BatchWorkspace ws;
  Rng rng(derive_seed(net_seed, "policy-shuffle"));
  // Encode every sample once; batches gather columns.
  const std::size_t total = indices.size();
  Eigen::MatrixXd features(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(total));
  std::vector<std::size_t> labels(total);
  for (std::size_t j = 0; j < total; ++j) {
    const Sample s = ds.at(indices[j]);
    encode_policy_input(*s.observation, s.style_id, k, conditioned,
                        std::span<double>(features.col(static_cast<Eigen::Index>(j)).data(), in_dim));
    labels[j] = s.action_bin;
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::MatrixXd x;
  std::vector<std::size_t> targets;
  std::vector<double> w;
  BaselineTracker baseline{0.0, cfg.baseline_decay, false};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < total; start += cfg.batch) {
      const std::size_t end = std::min(total, start + cfg.batch);
      const std::size_t n = end - start;
      const double inv_n = 1.0 / static_cast<double>(n);
      double mean_w = 0.0;
      for (std::size_t i = start; i < end; ++i) mean_w += weights[indices[order[i]]];
      mean_w *= inv_n;
      double shift = 0.0;
      if (cfg.use_baseline) {
        baseline.update(mean_w);
        shift = baseline.value;
      }
      x.resize(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(n));
      targets.resize(n);
      w.resize(n);
      double eff_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t local = order[start + j];
        double wj = weights[indices[local]] - shift;
        if (cfg.clip_negative) wj = std::max(wj, 0.0);
        eff_sum += wj;
        x.col(static_cast<Eigen::Index>(j)) = features.col(static_cast<Eigen::Index>(local));
        targets[j] = labels[local];
        w[j] = wj * inv_n;
      }
      grad.zero();
      try {
        accumulate_ce_batch(net, ws, x, targets, w, grad);
        adam_step(net, adam, grad);
      } catch (const NumericError& e) {
        throw NumericError(fmt::format("policy training epoch {} batch {}: {}", epoch, start / cfg.batch, e.what()));
      }
      epoch_loss += grad.loss * static_cast<double>(n);
      if (log) {
        log->batch_mean_effective_weight.push_back(eff_sum * inv_n);
        log->batch_baseline.push_back(baseline.value);
        ++log->updates;
      }
    }
    if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(total));
  }
  return net;
}

std::vector<std::size_t> all_indices(const StyleDataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

void require_nonempty(const StyleDataset& ds, const char* who) {
  if (ds.empty()) throw EmptyDatasetError(fmt::format("{}: dataset is empty", who));
}

}  // namespace

Policy train_bc(const StyleDataset& ds, const PolicyTrainConfig& cfg, TrainLog* log) {
  require_nonempty(ds, "train_bc");
  const std::vector<double> ones(ds.size(), 1.0);
  auto plain = cfg;
  plain.use_baseline = false;
  auto net = fit(ds, all_indices(ds), ones, false, plain, derive_seed(cfg.seed, "policy-init"), log);
  return Policy(PolicyMode::bc, ds.num_styles(), {std::move(net)});
}

Policy train_cond_bc(const StyleDataset& ds, const PolicyTrainConfig& cfg, TrainLog* log) {
  require_nonempty(ds, "train_cond_bc");
  const std::vector<double> ones(ds.size(), 1.0);
  auto plain = cfg;
  plain.use_baseline = false;
  auto net = fit(ds, all_indices(ds), ones, true, plain, derive_seed(cfg.seed, "policy-init"), log);
  return Policy(PolicyMode::cond_bc, ds.num_styles(), {std::move(net)});
}

Policy train_cbc_separate(const StyleDataset& ds, const PolicyTrainConfig& cfg) {
  require_nonempty(ds, "train_cbc_separate");
  const std::uint32_t k = ds.num_styles();
  std::vector<std::vector<std::size_t>> per_style(k);
  for (std::size_t i = 0; i < ds.size(); ++i) per_style[ds.at(i).style_id].push_back(i);
  const std::vector<double> ones(ds.size(), 1.0);
  auto plain = cfg;
  plain.use_baseline = false;
  std::vector<MlpNet> nets;
  for (std::uint32_t z = 0; z < k; ++z) {
    if (per_style[z].empty()) throw EmptyDatasetError(fmt::format("train_cbc_separate: style {} has no samples", z));
    nets.push_back(fit(ds, per_style[z], ones, false, plain, derive_seed(cfg.seed, "policy-init", z), nullptr));
  }
  return Policy(PolicyMode::cbc_separate, k, std::move(nets));
}

std::vector<double> precompute_weights(const MineEstimator& est, const StyleDataset& ds, double w_max,
                                       unsigned threads) {
  std::vector<double> w(ds.size());
  parallel_for(ds.size(), threads, [&](std::size_t i) {
    const Sample s = ds.at(i);
    w[i] = pmi_weight(est, *s.observation, s.action_bin, s.style_id, w_max);
  });
  return w;
}

Policy train_bc_pmi(const StyleDataset& ds, std::span<const double> weights, const PolicyTrainConfig& cfg,
                    TrainLog* log) {
  require_nonempty(ds, "train_bc_pmi");
  if (weights.size() != ds.size()) throw ShapeError("train_bc_pmi: one weight per sample is required");
  auto net = fit(ds, all_indices(ds), weights, true, cfg, derive_seed(cfg.seed, "policy-init"), log);
  return Policy(PolicyMode::bc_pmi, ds.num_styles(), {std::move(net)});
}

Policy train_bc_pmi(const StyleDataset& ds, const MineEstimator& est, const PolicyTrainConfig& cfg, TrainLog* log) {
  if (est.num_styles != ds.num_styles()) {
    throw UsageError(fmt::format("estimator was trained with K = {} but the dataset has K = {}", est.num_styles,
                                 ds.num_styles()));
  }
  const auto weights = precompute_weights(est, ds, cfg.w_max, cfg.threads);
  return train_bc_pmi(ds, weights, cfg, log);
}

void save_policy(const std::filesystem::path& stem, const Policy& policy, const std::string& sidecar_json) {
  nlohmann::json side = nlohmann::json::parse(sidecar_json);
  side["mode"] = to_string(policy.mode());
  side["K"] = policy.num_styles();
  std::vector<std::string> files;
  for (std::size_t i = 0; i < policy.nets().size(); ++i) {
    auto p = stem;
    p += policy.nets().size() == 1 ? std::string(".sbnn") : fmt::format(".{}.sbnn", i);
    save_net(p, policy.nets()[i]);
    files.push_back(p.filename().string());
  }
  side["nets"] = files;
  auto side_path = stem;
  side_path += ".json";
  std::ofstream os(side_path);
  if (!os) throw IoError("cannot open " + side_path.string() + " for writing");
  os << side.dump(2) << '\n';
}

Policy load_policy(const std::filesystem::path& stem) {
  auto side_path = stem;
  side_path += ".json";
  std::ifstream is(side_path);
  if (!is) throw IoError("cannot open " + side_path.string());
  nlohmann::json side;
  PolicyMode mode;
  std::uint32_t k;
  std::vector<std::string> files;
  try {
    is >> side;
    mode = policy_mode_from_string(side.at("mode").get<std::string>());
    k = side.at("K").get<std::uint32_t>();
    files = side.at("nets").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side_path.string() + ": " + e.what());
  } catch (const UsageError& e) {
    throw FormatError(side_path.string() + ": " + e.what());
  }
  std::vector<MlpNet> nets;
  for (const auto& f : files) nets.push_back(load_net(side_path.parent_path() / f));
  try {
    return Policy(mode, k, std::move(nets));
  } catch (const ShapeError& e) {
    throw FormatError(side_path.string() + ": " + e.what());
  }
}

}  // namespace stylebc
