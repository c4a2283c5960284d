#pragma once

// Dense feed-forward networks with hand-written backprop and Adam.
//
// Parameters live in one flat buffer. Layer l occupies a row-major weight
// block of shape (dims[l+1], dims[l]) followed by a bias block of length
// dims[l+1]. Hidden layers use the configured activation; the output layer
// is linear.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stylebc {

enum class Activation : std::uint8_t { tanh = 0, relu = 1 };

const char* to_string(Activation act);
Activation activation_from_string(const std::string& name);

class MlpNet {
 public:
  MlpNet() = default;
  /// All-zero parameters.
  MlpNet(std::vector<std::size_t> layer_dims, Activation act);

  /// Uniform init in [-s, s], s = sqrt(6 / (fan_in + fan_out)); biases zero.
  static MlpNet glorot(std::vector<std::size_t> layer_dims, Activation act, std::uint64_t seed);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  Activation activation() const { return act_; }
  std::size_t num_layers() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::span<double> weight(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  /// Output-layer pre-activation.
  std::vector<double> forward(std::span<const double> x) const;

  friend bool operator==(const MlpNet&, const MlpNet&) = default;

 private:
  friend class NetWorkspace;
  friend class BatchWorkspace;
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + dims_[layer + 1] * dims_[layer]; }

  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  Activation act_ = Activation::tanh;
  std::vector<double> params_;
};

/// Gradient buffer shape-matched to one MlpNet.
struct GradBundle {
  std::vector<double> grads;
  double loss = 0.0;

  GradBundle() = default;
  explicit GradBundle(const MlpNet& net) : grads(net.num_params(), 0.0) {}
  void zero();
  bool all_finite() const;
  GradBundle& operator*=(double s);
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(const MlpNet& net, double lr);
};

/// Scratch buffers for repeated forward/backward passes through one net shape.
/// Owned by a single thread; reuse avoids per-sample allocation in training loops.
class NetWorkspace {
 public:
  explicit NetWorkspace(const MlpNet& net);

  /// Runs forward, caching activations. Returns the output pre-activation.
  /// Throws NumericError naming the layer if anything non-finite appears.
  std::span<const double> forward(const MlpNet& net, std::span<const double> x);

  /// Backprop `d_out` (dLoss/dOutput) through the last forward pass, adding into `acc`.
  void backward(const MlpNet& net, std::span<const double> d_out, GradBundle& acc);

 private:
  std::vector<std::vector<double>> acts_;  // acts_[0] = input, acts_[l+1] = post-activation of layer l
  std::vector<std::vector<double>> deltas_;
};

/// Column-batched forward/backward: each column of the input matrix is one sample.
/// Same arithmetic as NetWorkspace, organized as matrix products for training throughput.
class BatchWorkspace {
 public:
  /// Output pre-activations, (output_dim x batch). Throws NumericError naming the layer on non-finite values.
  const Eigen::MatrixXd& forward(const MlpNet& net, const Eigen::MatrixXd& inputs);

  /// Backprop `d_out` (output_dim x batch) through the last forward pass, adding into `acc`.
  void backward(const MlpNet& net, const Eigen::MatrixXd& d_out, GradBundle& acc);

 private:
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<Eigen::MatrixXd> acts_;
  std::vector<RowMat> w_;  // aligned copies of the weights seen by the last forward pass
  Eigen::MatrixXd delta_, prev_delta_;
  RowMat gw_tmp_;
  Eigen::VectorXd gb_tmp_;
};

/// Sum over columns j of weights[j] * CE(column j, targets[j]); accumulates gradients and returns the loss.
double accumulate_ce_batch(const MlpNet& net, BatchWorkspace& ws, const Eigen::MatrixXd& inputs,
                           std::span<const std::size_t> targets, std::span<const double> weights, GradBundle& acc);

/// Weighted softmax cross-entropy; accumulates into `acc` and returns the loss term.
double accumulate_ce(const MlpNet& net, NetWorkspace& ws, std::span<const double> x, std::size_t target_class,
                     double weight, GradBundle& acc);

/// Scalar-output head with externally supplied dLoss/dOutput. Returns the network output.
double accumulate_scalar(const MlpNet& net, NetWorkspace& ws, std::span<const double> x, double upstream,
                         GradBundle& acc);

/// loss = weight * -log softmax(forward(x))[target_class], with exact gradients.
GradBundle loss_and_grad_ce(const MlpNet& net, std::span<const double> x, std::size_t target_class, double weight);

/// grads = upstream * dT(x)/dparams for a scalar-output net; loss holds T(x).
GradBundle loss_and_grad_scalar(const MlpNet& net, std::span<const double> x, double upstream);

/// Bias-corrected Adam update. Non-finite gradients throw before anything is modified.
void adam_step(MlpNet& net, AdamState& state, const GradBundle& grads);

/// Numerically stable log-softmax.
std::vector<double> log_softmax(std::span<const double> logits);
std::vector<double> softmax(std::span<const double> logits);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Compares `analytic` against central differences of `loss_fn` on every parameter.
GradCheckReport gradient_check(const MlpNet& net, const std::function<double(const MlpNet&)>& loss_fn,
                               std::span<const double> analytic, double tolerance, double h = 1e-5);

// Checkpoint format: "SBNN", u32 version, u32 layer count, u32 dims[layers+1],
// u8 activation, then f64 parameters (row-major W then b per layer), all little-endian.
inline constexpr std::uint32_t kNetFormatVersion = 1;

void write_net(std::ostream& os, const MlpNet& net);
MlpNet read_net(std::istream& is);
void save_net(const std::filesystem::path& path, const MlpNet& net);
MlpNet load_net(const std::filesystem::path& path);

}  // namespace stylebc
