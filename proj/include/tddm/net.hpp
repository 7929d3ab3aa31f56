#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tddm/common.hpp"
#include "tddm/rng.hpp"

namespace tddm::net {

/// Non-finite loss during training.
class Divergence : public Error {
 public:
  Divergence(std::size_t batch_index, const std::string& what)
      : Error(ErrorCategory::numeric, what), batch_index_(batch_index) {}
  std::size_t batch_index() const noexcept { return batch_index_; }

 private:
  std::size_t batch_index_;
};

struct ConvLayerSpec {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct TensorShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  int spatial() const noexcept { return height * width; }
  int size() const noexcept { return channels * height * width; }
};

/// Conv x3 (ReLU) -> LSTM -> linear Q-head. Convolutions are valid, except
/// that the input is zero-padded at the bottom and right by less than one
/// stride when the kernel would otherwise skip the last rows or columns:
/// out = ceil((in - kernel) / stride) + 1.
struct NetworkSpec {
  int input_height = 32;
  int input_width = 32;
  std::array<ConvLayerSpec, 3> conv{{{8, 5, 2}, {16, 3, 2}, {16, 3, 1}}};
  int lstm_units = 64;
  int n_actions = 3;
  int unroll_length = 8;

  /// Throws ConfigError when any layer collapses below 1x1 or a count is
  /// non-positive.
  void validate() const;

  /// Input followed by the output of each conv layer.
  std::array<TensorShape, 4> shapes() const;
  /// Width of the LSTM input (flattened last conv output).
  int feature_size() const;
  /// Closed-form parameter count.
  std::size_t parameter_count() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;
using VectorView = Eigen::Map<Eigen::VectorXd>;
using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

/// All weights in one flat array, with typed views into it. Gradients use
/// the same type.
///
/// Layout: for each conv layer W[out][in*k*k] then b[out]; LSTM Wx[4U][D],
/// Wh[4U][U], b[4U] with gate blocks ordered input, forget, cell, output;
/// head W[A][U], b[A].
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(const NetworkSpec& spec);  // all zeros

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
  static NetworkParams random(const NetworkSpec& spec, SplitMix64& rng);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  MatrixView conv_weight(int layer);
  ConstMatrixView conv_weight(int layer) const;
  VectorView conv_bias(int layer);
  ConstVectorView conv_bias(int layer) const;
  MatrixView lstm_input_weight();
  ConstMatrixView lstm_input_weight() const;
  MatrixView lstm_recurrent_weight();
  ConstMatrixView lstm_recurrent_weight() const;
  VectorView lstm_bias();
  ConstVectorView lstm_bias() const;
  MatrixView head_weight();
  ConstMatrixView head_weight() const;
  VectorView head_bias();
  ConstVectorView head_bias() const;

  void set_zero();

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  struct Block {
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    friend bool operator==(const Block&, const Block&) = default;
  };
  struct Layout {
    std::array<Block, 3> conv_w{}, conv_b{};
    Block lstm_wx, lstm_wh, lstm_b, head_w, head_b;
    std::size_t total = 0;
    friend bool operator==(const Layout&, const Layout&) = default;
  };
  static Layout make_layout(const NetworkSpec& spec);

  MatrixView matrix(const Block& b) { return MatrixView(values_.data() + b.offset, b.rows, b.cols); }
  ConstMatrixView matrix(const Block& b) const {
    return ConstMatrixView(values_.data() + b.offset, b.rows, b.cols);
  }
  VectorView vector(const Block& b) { return VectorView(values_.data() + b.offset, b.rows); }
  ConstVectorView vector(const Block& b) const {
    return ConstVectorView(values_.data() + b.offset, b.rows);
  }

  NetworkSpec spec_;
  Layout layout_;
  std::vector<double> values_;
};

/// Recurrent carry (h, c); zero at the start of every sequence.
struct HiddenState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static HiddenState zeros(int units) {
    return {Eigen::VectorXd::Zero(units), Eigen::VectorXd::Zero(units)};
  }
  friend bool operator==(const HiddenState& a, const HiddenState& b) {
    return a.h.size() == b.h.size() && a.c.size() == b.c.size() && a.h == b.h && a.c == b.c;
  }
};

struct ForwardResult {
  /// One row per step, one column per action.
  Eigen::MatrixXd q;
  /// Hidden state after each step.
  std::vector<HiddenState> states;
  /// LSTM input (flattened conv output) at each step.
  std::vector<Eigen::VectorXd> features;
};

/// Flattened conv features of a single frame.
Eigen::VectorXd conv_features(const NetworkParams& params, const Frame& frame);

/// Pre-ReLU outputs of each conv layer for one frame, channel-major.
std::array<Eigen::VectorXd, 3> conv_preactivations(const NetworkParams& params, const Frame& frame);

/// One LSTM step followed by the head; returns Q and writes the new state.
Eigen::VectorXd lstm_step(const NetworkParams& params, const Eigen::VectorXd& features,
                          HiddenState& state);

/// Runs a sequence of at most unroll_length frames from `h0`.
ForwardResult forward(const NetworkParams& params, std::span<const Frame* const> frames,
                      const HiddenState& h0);
ForwardResult forward(const NetworkParams& params, std::span<const Frame> frames,
                      const HiddenState& h0);

/// Training batch. Sequences may have different lengths (1..unroll_length);
/// each starts from a zero hidden state and is scored at its last step.
struct Batch {
  std::vector<std::vector<const Frame*>> sequences;
  std::vector<int> actions;
  std::vector<double> targets;
};

/// Last-step Q rows for every sequence, zero initial state. Columns are
/// sequences.
Eigen::MatrixXd final_q(const NetworkParams& params,
                        const std::vector<std::vector<const Frame*>>& sequences);

struct LossAndGradient {
  double loss = 0.0;
  NetworkParams grads;
};

/// loss = mean over the batch of 0.5 (y_i - Q(seq_i, a_i))^2, and its exact
/// gradient through the head, all LSTM steps and all conv layers. Throws
/// Divergence naming the first sequence with a non-finite residual.
LossAndGradient loss_and_gradient(const NetworkParams& params, const Batch& batch);

struct RmsPropHyper {
  double learning_rate = 0.00025;
  /// Decay of the running mean of squared gradients.
  double squared_decay = 0.95;
  double momentum = 0.95;
  double epsilon = 1e-6;
  /// Element-wise clamp bound applied to gradients before anything else.
  double clip = 1.0;
  /// Learning rate multiplied by lr_decay every decay_interval steps.
  double lr_decay = 0.97;
  std::int64_t decay_interval = 10000;

  void validate() const;
};

struct OptimizerState {
  std::vector<double> mean_square;
  std::vector<double> velocity;
  std::int64_t step = 0;
  double learning_rate = 0.0;

  static OptimizerState for_params(const NetworkParams& params, const RmsPropHyper& hyper);
};

/// g = clamp(grad), ms = rho ms + (1-rho) g^2, v = mu v + lr g / sqrt(ms + eps),
/// p -= v; then the step counter advances and the learning-rate schedule
/// applies.
void rmsprop_step(NetworkParams& params, const NetworkParams& grads, OptimizerState& opt,
                  const RmsPropHyper& hyper);

// Checkpoint: "TDDMNET\0", u32 version, u32 endianness tag 0x01020304, fourteen
// i32 spec fields, u64 parameter count, raw IEEE-754 doubles.
void write_checkpoint(std::ostream& out, const NetworkParams& params);
NetworkParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::string& path);

}  // namespace tddm::net
