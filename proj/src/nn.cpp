#include "stylebc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include <fmt/format.h>

#include "stylebc/binio.hpp"
#include "stylebc/error.hpp"

namespace stylebc {

const char* to_string(Activation act) {
  switch (act) {
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw UsageError("unknown activation '" + name + "'");
}

MlpNet::MlpNet(std::vector<std::size_t> layer_dims, Activation act) : dims_(std::move(layer_dims)), act_(act) {
  if (dims_.size() < 2) throw ShapeError("an MlpNet needs at least an input and an output dimension");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] == 0 || dims_[l + 1] == 0) throw ShapeError("layer dimensions must be positive");
    offsets_.push_back(total);
    total += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

MlpNet MlpNet::glorot(std::vector<std::size_t> layer_dims, Activation act, std::uint64_t seed) {
  MlpNet net(std::move(layer_dims), act);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double s = std::sqrt(6.0 / static_cast<double>(net.dims_[l] + net.dims_[l + 1]));
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& w : net.weight(l)) w = dist(rng);
  }
  return net;
}

std::span<double> MlpNet::weight(std::size_t layer) {
  return std::span<double>(params_).subspan(weight_offset(layer), dims_[layer + 1] * dims_[layer]);
}
std::span<const double> MlpNet::weight(std::size_t layer) const {
  return std::span<const double>(params_).subspan(weight_offset(layer), dims_[layer + 1] * dims_[layer]);
}
std::span<double> MlpNet::bias(std::size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}
std::span<const double> MlpNet::bias(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}

std::vector<double> MlpNet::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw ShapeError(fmt::format("input has length {}, network expects {}", x.size(), input_dim()));
  }
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const std::size_t in = dims_[l], out = dims_[l + 1];
    auto w = weight(l);
    auto b = bias(l);
    next.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * cur[i];
      if (l + 1 < num_layers()) acc = act_ == Activation::tanh ? std::tanh(acc) : std::max(acc, 0.0);
      next[o] = acc;
    }
    cur.swap(next);
  }
  return cur;
}

void GradBundle::zero() {
  std::fill(grads.begin(), grads.end(), 0.0);
  loss = 0.0;
}

bool GradBundle::all_finite() const {
  return std::isfinite(loss) && std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); });
}

GradBundle& GradBundle::operator*=(double s) {
  for (double& g : grads) g *= s;
  loss *= s;
  return *this;
}

AdamState::AdamState(const MlpNet& net, double lr)
    : first_moment(net.num_params(), 0.0), second_moment(net.num_params(), 0.0), learning_rate(lr) {}

NetWorkspace::NetWorkspace(const MlpNet& net) {
  const auto& dims = net.layer_dims();
  for (std::size_t d : dims) acts_.emplace_back(d, 0.0);
  for (std::size_t l = 1; l < dims.size(); ++l) deltas_.emplace_back(dims[l], 0.0);
}

std::span<const double> NetWorkspace::forward(const MlpNet& net, std::span<const double> x) {
  if (x.size() != net.input_dim()) {
    throw ShapeError(fmt::format("input has length {}, network expects {}", x.size(), net.input_dim()));
  }
  std::copy(x.begin(), x.end(), acts_[0].begin());
  const auto& dims = net.layer_dims();
  const std::size_t layers = net.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    auto w = net.weight(l);
    auto b = net.bias(l);
    const auto& cur = acts_[l];
    auto& next = acts_[l + 1];
    const bool hidden = l + 1 < layers;
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * cur[i];
      if (!std::isfinite(acc)) throw NumericError(fmt::format("non-finite pre-activation at layer {}", l));
      if (hidden) acc = net.activation() == Activation::tanh ? std::tanh(acc) : std::max(acc, 0.0);
      next[o] = acc;
    }
  }
  return acts_.back();
}

void NetWorkspace::backward(const MlpNet& net, std::span<const double> d_out, GradBundle& acc) {
  const auto& dims = net.layer_dims();
  const std::size_t layers = net.num_layers();
  if (d_out.size() != dims.back()) throw ShapeError("upstream gradient does not match the output dimension");
  if (acc.grads.size() != net.num_params()) throw ShapeError("gradient bundle does not match the network");
  std::copy(d_out.begin(), d_out.end(), deltas_[layers - 1].begin());
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = dims[l], out = dims[l + 1];
    const auto& delta = deltas_[l];
    const auto& input = acts_[l];
    const std::size_t woff = net.weight_offset(l);
    const std::size_t boff = net.bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      acc.grads[boff + o] += d;
      if (d == 0.0) continue;
      double* grow = acc.grads.data() + woff + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * input[i];
    }
    if (l == 0) break;
    // delta for layer l-1 = (W^T delta) * act'(z)
    auto w = net.weight(l);
    auto& prev = deltas_[l - 1];
    std::fill(prev.begin(), prev.end(), 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    const auto& h = acts_[l];
    for (std::size_t i = 0; i < in; ++i) {
      if (net.activation() == Activation::tanh) {
        prev[i] *= 1.0 - h[i] * h[i];
      } else if (h[i] <= 0.0) {
        prev[i] = 0.0;
      }
    }
  }
}

const Eigen::MatrixXd& BatchWorkspace::forward(const MlpNet& net, const Eigen::MatrixXd& inputs) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (static_cast<std::size_t>(inputs.rows()) != net.input_dim()) {
    throw ShapeError(fmt::format("input has length {}, network expects {}", inputs.rows(), net.input_dim()));
  }
  const auto& dims = net.layer_dims();
  const std::size_t layers = net.num_layers();
  acts_.resize(layers + 1);
  w_.resize(layers);
  acts_[0] = inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    // Copy into Eigen-owned (fully aligned) storage: vectorized products over a Map peel a
    // number of scalar iterations that depends on the buffer address, which changes rounding.
    w_[l] = Eigen::Map<const RowMat>(net.weight(l).data(), dims[l + 1], dims[l]);
    Eigen::Map<const Eigen::VectorXd> b(net.bias(l).data(), dims[l + 1]);
    auto& z = acts_[l + 1];
    z.noalias() = w_[l] * acts_[l];
    z.colwise() += b;
    if (!z.allFinite()) throw NumericError(fmt::format("non-finite pre-activation at layer {}", l));
    if (l + 1 < layers) {
      if (net.activation() == Activation::tanh) {
        // Eigen's double tanh is scalar; this form vectorizes and is accurate to a few ulp absolute.
        // |z| is capped at 20 (tanh already rounds to +-1 there) so exp never produces subnormals.
        const Eigen::ArrayXXd t = (-2.0 * z.array().abs().min(20.0)).exp();
        z = ((1.0 - t) / (1.0 + t) * z.array().sign()).matrix();
      } else {
        z = z.cwiseMax(0.0);
      }
    }
  }
  return acts_.back();
}

void BatchWorkspace::backward(const MlpNet& net, const Eigen::MatrixXd& d_out, GradBundle& acc) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto& dims = net.layer_dims();
  const std::size_t layers = net.num_layers();
  if (static_cast<std::size_t>(d_out.rows()) != dims.back() || d_out.cols() != acts_[0].cols()) {
    throw ShapeError("upstream gradient does not match the last forward pass");
  }
  if (acc.grads.size() != net.num_params()) throw ShapeError("gradient bundle does not match the network");
  delta_ = d_out;
  for (std::size_t l = layers; l-- > 0;) {
    Eigen::Map<RowMat> gw(acc.grads.data() + net.weight_offset(l), dims[l + 1], dims[l]);
    Eigen::Map<Eigen::VectorXd> gb(acc.grads.data() + net.bias_offset(l), dims[l + 1]);
    // Reduce into owned temporaries; the elementwise add into the flat buffer is alignment-independent.
    gw_tmp_.noalias() = delta_ * acts_[l].transpose();
    gb_tmp_ = delta_.rowwise().sum();
    gw += gw_tmp_;
    gb += gb_tmp_;
    if (l == 0) break;
    prev_delta_.noalias() = w_[l].transpose() * delta_;
    const auto& h = acts_[l];
    if (net.activation() == Activation::tanh) {
      prev_delta_.array() *= 1.0 - h.array().square();
    } else {
      prev_delta_.array() *= (h.array() > 0.0).cast<double>();
    }
    std::swap(delta_, prev_delta_);
  }
}

double accumulate_ce_batch(const MlpNet& net, BatchWorkspace& ws, const Eigen::MatrixXd& inputs,
                           std::span<const std::size_t> targets, std::span<const double> weights, GradBundle& acc) {
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (targets.size() != n || weights.size() != n) throw ShapeError("accumulate_ce_batch: one target and weight per column");
  for (std::size_t j = 0; j < n; ++j) {
    if (targets[j] >= net.output_dim()) {
      throw ShapeError(fmt::format("target class {} out of range for {} outputs", targets[j], net.output_dim()));
    }
    if (!std::isfinite(weights[j])) throw NumericError("non-finite sample weight");
  }
  const auto& logits = ws.forward(net, inputs);
  Eigen::MatrixXd d_out(logits.rows(), logits.cols());
  double loss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    const auto t = static_cast<Eigen::Index>(targets[j]);
    const auto col = logits.col(c);
    const double m = col.maxCoeff();
    auto e = d_out.col(c);
    e = (col.array() - m).max(-700.0).exp().matrix();  // no subnormals: they are very slow
    const double sum = e.sum();
    loss += -weights[j] * (col(t) - m - std::log(sum));
    e *= weights[j] / sum;
    e(t) -= weights[j];
  }
  if (!std::isfinite(loss)) throw NumericError(fmt::format("non-finite loss at layer {}", net.num_layers() - 1));
  ws.backward(net, d_out, acc);
  acc.loss += loss;
  return loss;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& v : out) v = std::exp(v);
  return out;
}

double accumulate_ce(const MlpNet& net, NetWorkspace& ws, std::span<const double> x, std::size_t target_class,
                     double weight, GradBundle& acc) {
  if (target_class >= net.output_dim()) {
    throw ShapeError(fmt::format("target class {} out of range for {} outputs", target_class, net.output_dim()));
  }
  if (!std::isfinite(weight)) throw NumericError("non-finite sample weight");
  auto logits = ws.forward(net, x);
  auto logp = log_softmax(logits);
  const double loss = -weight * logp[target_class];
  if (!std::isfinite(loss)) throw NumericError(fmt::format("non-finite loss at layer {}", net.num_layers() - 1));
  if (weight == 0.0) return 0.0;
  // d(-w log p_t)/dlogit_k = w (p_k - 1[k == t])
  std::vector<double> d_out(logp.size());
  for (std::size_t k = 0; k < logp.size(); ++k) d_out[k] = weight * (std::exp(logp[k]) - (k == target_class ? 1.0 : 0.0));
  ws.backward(net, d_out, acc);
  acc.loss += loss;
  return loss;
}

double accumulate_scalar(const MlpNet& net, NetWorkspace& ws, std::span<const double> x, double upstream,
                         GradBundle& acc) {
  if (net.output_dim() != 1) {
    throw ShapeError(fmt::format("scalar head needs output dimension 1, got {}", net.output_dim()));
  }
  if (!std::isfinite(upstream)) throw NumericError("non-finite upstream derivative");
  const double t = ws.forward(net, x)[0];
  if (upstream != 0.0) {
    const double d_out[1] = {upstream};
    ws.backward(net, d_out, acc);
  }
  return t;
}

GradBundle loss_and_grad_ce(const MlpNet& net, std::span<const double> x, std::size_t target_class, double weight) {
  GradBundle g(net);
  NetWorkspace ws(net);
  g.loss = 0.0;
  accumulate_ce(net, ws, x, target_class, weight, g);
  return g;
}

GradBundle loss_and_grad_scalar(const MlpNet& net, std::span<const double> x, double upstream) {
  GradBundle g(net);
  NetWorkspace ws(net);
  g.loss = accumulate_scalar(net, ws, x, upstream, g);
  return g;
}

void adam_step(MlpNet& net, AdamState& state, const GradBundle& grads) {
  const std::size_t n = net.num_params();
  if (grads.grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ShapeError("adam_step: parameter, moment and gradient shapes differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads.grads[i])) throw NumericError(fmt::format("non-finite gradient at parameter {}", i));
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto p = net.params();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads.grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

GradCheckReport gradient_check(const MlpNet& net, const std::function<double(const MlpNet&)>& loss_fn,
                               std::span<const double> analytic, double tolerance, double h) {
  if (analytic.size() != net.num_params()) throw ShapeError("gradient_check: analytic gradient has wrong length");
  GradCheckReport report;
  MlpNet probe = net;
  auto p = probe.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = loss_fn(probe);
    p[i] = orig - h;
    const double down = loss_fn(probe);
    p[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-7);
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_rel_error || !std::isfinite(rel)) {
      report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
      report.worst_index = i;
    }
    ++report.checked;
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

void write_net(std::ostream& os, const MlpNet& net) {
  binio::write_magic(os, "SBNN");
  binio::write_le<std::uint32_t>(os, kNetFormatVersion);
  binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.num_layers()));
  for (std::size_t d : net.layer_dims()) binio::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  binio::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(net.activation()));
  for (double v : net.params()) binio::write_f64(os, v);
}

MlpNet read_net(std::istream& is) {
  binio::expect_magic(is, "SBNN");
  const auto version = binio::read_le<std::uint32_t>(is, "version");
  if (version != kNetFormatVersion) throw FormatError(fmt::format("unsupported SBNN version {}", version));
  const auto layers = binio::read_le<std::uint32_t>(is, "layer count");
  if (layers == 0 || layers > 64) throw FormatError(fmt::format("implausible layer count {}", layers));
  std::vector<std::size_t> dims;
  for (std::uint32_t l = 0; l <= layers; ++l) dims.push_back(binio::read_le<std::uint32_t>(is, "layer dims"));
  const auto tag = binio::read_le<std::uint8_t>(is, "activation");
  if (tag > 1) throw FormatError(fmt::format("unknown activation tag {}", tag));
  MlpNet net(dims, static_cast<Activation>(tag));
  for (double& v : net.params()) {
    v = binio::read_f64(is, "parameters");
    if (!std::isfinite(v)) throw FormatError("checkpoint contains non-finite parameters");
  }
  return net;
}

void save_net(const std::filesystem::path& path, const MlpNet& net) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_net(os, net);
  if (!os) throw IoError("write failed for " + path.string());
}

MlpNet load_net(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_net(is);
}

}  // namespace stylebc
