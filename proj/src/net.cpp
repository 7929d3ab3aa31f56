#include "tddm/net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tddm::net {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Valid convolution, with the input zero-padded on the bottom and right by
// less than one stride when needed so that no pixel is skipped.
int conv_out(int in, int kernel, int stride) { return (in - kernel + stride - 1) / stride + 1; }

// Output positions along one axis whose tap at offset `k` lands inside the
// unpadded input.
int inside(int out, int in, int k, int stride) { return std::min(out, (in - k + stride - 1) / stride); }

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

// Conv activations are row-major: row c is channel c, column f*HW + y*W + x
// holds pixel (x, y) of frame f, so each channel plane is contiguous.
RowMatrix im2col(const RowMatrix& act, const TensorShape& in, const ConvLayerSpec& layer,
                 const TensorShape& out, int frames) {
  const int k = layer.kernel;
  const int s = layer.stride;
  const Eigen::Index n_out = static_cast<Eigen::Index>(frames) * out.spatial();
  RowMatrix cols(static_cast<Eigen::Index>(in.channels) * k * k, n_out);
  for (int c = 0; c < in.channels; ++c) {
    const double* plane = act.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols.row((c * k + ky) * k + kx).data();
        const int ny = inside(out.height, in.height, ky, s);
        const int nx = inside(out.width, in.width, kx, s);
        for (int f = 0; f < frames; ++f) {
          const double* src = plane + static_cast<std::ptrdiff_t>(f) * in.spatial() + ky * in.width + kx;
          for (int oy = 0; oy < out.height; ++oy) {
            if (oy >= ny) {
              dst = std::fill_n(dst, out.width, 0.0);
              continue;
            }
            const double* row = src + oy * s * in.width;
            for (int ox = 0; ox < nx; ++ox) *dst++ = row[ox * s];
            dst = std::fill_n(dst, out.width - nx, 0.0);
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrix& dcols, const TensorShape& in, const ConvLayerSpec& layer,
                const TensorShape& out, int frames, RowMatrix& dact) {
  const int k = layer.kernel;
  const int s = layer.stride;
  for (int c = 0; c < in.channels; ++c) {
    double* plane = dact.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = dcols.row((c * k + ky) * k + kx).data();
        const int ny = inside(out.height, in.height, ky, s);
        const int nx = inside(out.width, in.width, kx, s);
        for (int f = 0; f < frames; ++f) {
          double* dst = plane + static_cast<std::ptrdiff_t>(f) * in.spatial() + ky * in.width + kx;
          for (int oy = 0; oy < out.height; ++oy) {
            if (oy >= ny) {
              src += out.width;
              continue;
            }
            double* row = dst + oy * s * in.width;
            for (int ox = 0; ox < nx; ++ox) row[ox * s] += *src++;
            src += out.width - nx;
          }
        }
      }
    }
  }
}

struct ConvCache {
  std::array<RowMatrix, 3> cols;
  // act[l+1] is the post-ReLU output of layer l.
  std::array<RowMatrix, 4> act;
  int frames = 0;
};

void check_frame(const NetworkSpec& spec, const Frame& frame) {
  if (frame.width() != spec.input_width || frame.height() != spec.input_height) {
    std::ostringstream msg;
    msg << "network expects " << spec.input_width << "x" << spec.input_height << " frames, got "
        << frame.width() << "x" << frame.height();
    throw ContractViolation(msg.str());
  }
}

// Features of `frames` as columns of a D x F matrix.
MatrixXd conv_forward(const NetworkParams& params, const std::vector<const Frame*>& frames,
                      ConvCache* cache, std::array<VectorXd, 3>* pre = nullptr) {
  const NetworkSpec& spec = params.spec();
  const auto shapes = spec.shapes();
  const int count = static_cast<int>(frames.size());
  RowMatrix act(1, static_cast<Eigen::Index>(count) * shapes[0].spatial());
  for (int f = 0; f < count; ++f) {
    check_frame(spec, *frames[f]);
    const auto pixels = frames[f]->values();
    std::copy(pixels.begin(), pixels.end(), act.data() + static_cast<std::size_t>(f) * pixels.size());
  }
  for (int l = 0; l < 3; ++l) {
    RowMatrix cols = im2col(act, shapes[l], spec.conv[l], shapes[l + 1], count);
    RowMatrix z = params.conv_weight(l) * cols;
    z.colwise() += params.conv_bias(l);
    if (pre) (*pre)[l] = z.reshaped<Eigen::RowMajor>();
    act = z.cwiseMax(0.0);
    if (cache) cache->cols[l] = std::move(cols);
    if (cache) cache->act[l + 1] = act;
  }
  const TensorShape& last = shapes[3];
  const int p_count = last.spatial();
  MatrixXd features(last.size(), count);
  for (int f = 0; f < count; ++f) {
    for (int c = 0; c < last.channels; ++c) {
      std::copy_n(act.row(c).data() + static_cast<std::ptrdiff_t>(f) * p_count, p_count,
                  features.col(f).data() + c * p_count);
    }
  }
  if (cache) cache->frames = count;
  return features;
}

void conv_backward(const NetworkParams& params, const ConvCache& cache, const MatrixXd& dfeatures,
                   NetworkParams& grads) {
  const NetworkSpec& spec = params.spec();
  const auto shapes = spec.shapes();
  const TensorShape& last = shapes[3];
  const int p_count = last.spatial();
  RowMatrix dact(last.channels, static_cast<Eigen::Index>(cache.frames) * p_count);
  for (int f = 0; f < cache.frames; ++f) {
    for (int c = 0; c < last.channels; ++c) {
      std::copy_n(dfeatures.col(f).data() + c * p_count, p_count,
                  dact.row(c).data() + static_cast<std::ptrdiff_t>(f) * p_count);
    }
  }
  for (int l = 2; l >= 0; --l) {
    // ReLU: the post-activation is zero exactly where the gate is closed.
    RowMatrix dz = (cache.act[l + 1].array() > 0.0).select(dact, 0.0);
    grads.conv_weight(l).noalias() += dz * cache.cols[l].transpose();
    grads.conv_bias(l) += dz.rowwise().sum();
    if (l == 0) break;
    RowMatrix dcols = params.conv_weight(l).transpose() * dz;
    RowMatrix dprev = RowMatrix::Zero(shapes[l].channels,
                                      static_cast<Eigen::Index>(cache.frames) * shapes[l].spatial());
    col2im_add(dcols, shapes[l], spec.conv[l], shapes[l + 1], cache.frames, dprev);
    dact = std::move(dprev);
  }
}

// Batched LSTM over right-aligned sequences: sequence b is active from step
// start[b] to the last step; before that its state is carried unchanged.
struct LstmCache {
  int steps = 0;
  int batch = 0;
  std::vector<int> start;
  std::vector<MatrixXd> x;  // D x B per step
  std::vector<MatrixXd> i, f, g, o;  // U x B per step
  std::vector<MatrixXd> c;  // U x B, index 0 = initial
  std::vector<MatrixXd> h;  // U x B, index 0 = initial
  std::vector<MatrixXd> tanh_c;
};

struct BatchLayout {
  int steps = 0;
  std::vector<int> start;
  std::vector<int> frame_offset;
  std::vector<const Frame*> frames;
};

BatchLayout layout_batch(const NetworkSpec& spec,
                         const std::vector<std::vector<const Frame*>>& sequences) {
  BatchLayout layout;
  for (const auto& seq : sequences) {
    if (seq.empty() || static_cast<int>(seq.size()) > spec.unroll_length) {
      throw ContractViolation("sequence length must be in [1, unroll_length]");
    }
    layout.steps = std::max(layout.steps, static_cast<int>(seq.size()));
  }
  for (const auto& seq : sequences) {
    layout.start.push_back(layout.steps - static_cast<int>(seq.size()));
    layout.frame_offset.push_back(static_cast<int>(layout.frames.size()));
    layout.frames.insert(layout.frames.end(), seq.begin(), seq.end());
  }
  return layout;
}

// Runs the LSTM over all steps; returns the final hidden state (U x B).
MatrixXd lstm_forward(const NetworkParams& params, const BatchLayout& layout,
                      const MatrixXd& features, LstmCache* cache) {
  const int units = params.spec().lstm_units;
  const int batch = static_cast<int>(layout.start.size());
  const int dim = static_cast<int>(features.rows());
  MatrixXd h = MatrixXd::Zero(units, batch);
  MatrixXd c = MatrixXd::Zero(units, batch);
  if (cache) {
    cache->steps = layout.steps;
    cache->batch = batch;
    cache->start = layout.start;
    cache->h.push_back(h);
    cache->c.push_back(c);
  }
  const auto wx = params.lstm_input_weight();
  const auto wh = params.lstm_recurrent_weight();
  const auto bias = params.lstm_bias();
  for (int t = 0; t < layout.steps; ++t) {
    MatrixXd x = MatrixXd::Zero(dim, batch);
    for (int b = 0; b < batch; ++b) {
      if (t >= layout.start[b]) x.col(b) = features.col(layout.frame_offset[b] + t - layout.start[b]);
    }
    MatrixXd z = wx * x + wh * h;
    z.colwise() += bias;
    MatrixXd gi = sigmoid(z.topRows(units));
    MatrixXd gf = sigmoid(z.middleRows(units, units));
    MatrixXd gg = z.middleRows(2 * units, units).array().tanh().matrix();
    MatrixXd go = sigmoid(z.bottomRows(units));
    MatrixXd c_new = gf.cwiseProduct(c) + gi.cwiseProduct(gg);
    MatrixXd tc = c_new.array().tanh().matrix();
    MatrixXd h_new = go.cwiseProduct(tc);
    for (int b = 0; b < batch; ++b) {
      if (t < layout.start[b]) {
        c_new.col(b) = c.col(b);
        h_new.col(b) = h.col(b);
      }
    }
    if (cache) {
      cache->x.push_back(std::move(x));
      cache->i.push_back(std::move(gi));
      cache->f.push_back(std::move(gf));
      cache->g.push_back(std::move(gg));
      cache->o.push_back(std::move(go));
      cache->tanh_c.push_back(std::move(tc));
      cache->c.push_back(c_new);
      cache->h.push_back(h_new);
    }
    h = std::move(h_new);
    c = std::move(c_new);
  }
  return h;
}

// Backpropagates dh at the last step through every step. Returns dfeatures
// (D x F).
MatrixXd lstm_backward(const NetworkParams& params, const BatchLayout& layout,
                       const LstmCache& cache, MatrixXd dh, NetworkParams& grads) {
  const int units = params.spec().lstm_units;
  const int batch = cache.batch;
  const auto wx = params.lstm_input_weight();
  const auto wh = params.lstm_recurrent_weight();
  MatrixXd dfeatures = MatrixXd::Zero(params.spec().feature_size(),
                                      static_cast<Eigen::Index>(layout.frames.size()));
  MatrixXd dc = MatrixXd::Zero(units, batch);
  MatrixXd dz(4 * units, batch);
  for (int t = cache.steps - 1; t >= 0; --t) {
    const MatrixXd& gi = cache.i[t];
    const MatrixXd& gf = cache.f[t];
    const MatrixXd& gg = cache.g[t];
    const MatrixXd& go = cache.o[t];
    const MatrixXd& tc = cache.tanh_c[t];
    const MatrixXd& c_prev = cache.c[t];
    dc.array() += dh.array() * go.array() * (1.0 - tc.array().square());
    dz.topRows(units) = (dc.array() * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
    dz.middleRows(units, units) =
        (dc.array() * c_prev.array() * gf.array() * (1.0 - gf.array())).matrix();
    dz.middleRows(2 * units, units) = (dc.array() * gi.array() * (1.0 - gg.array().square())).matrix();
    dz.bottomRows(units) = (dh.array() * tc.array() * go.array() * (1.0 - go.array())).matrix();
    MatrixXd dc_prev = dc.cwiseProduct(gf);
    // Inactive columns carry their state through unchanged.
    for (int b = 0; b < batch; ++b) {
      if (t < cache.start[b]) {
        dz.col(b).setZero();
        dc_prev.col(b) = dc.col(b);
      }
    }
    grads.lstm_input_weight().noalias() += dz * cache.x[t].transpose();
    grads.lstm_recurrent_weight().noalias() += dz * cache.h[t].transpose();
    grads.lstm_bias() += dz.rowwise().sum();
    MatrixXd dx = wx.transpose() * dz;
    MatrixXd dh_prev = wh.transpose() * dz;
    for (int b = 0; b < batch; ++b) {
      if (t >= cache.start[b]) {
        dfeatures.col(layout.frame_offset[b] + t - cache.start[b]) += dx.col(b);
      } else {
        dh_prev.col(b) = dh.col(b);
      }
    }
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
  return dfeatures;
}

}  // namespace

void NetworkSpec::validate() const {
  std::ostringstream errors;
  if (input_height < 1 || input_width < 1) errors << "input dimensions must be positive; ";
  for (int l = 0; l < 3; ++l) {
    if (conv[l].out_channels < 1 || conv[l].kernel < 1 || conv[l].stride < 1) {
      errors << "conv layer " << l << " needs positive channels, kernel and stride; ";
    }
  }
  if (lstm_units < 1) errors << "lstm_units must be >= 1; ";
  if (n_actions < 1) errors << "n_actions must be >= 1; ";
  if (unroll_length < 1) errors << "unroll_length must be >= 1; ";
  if (errors.str().empty()) {
    int h = input_height, w = input_width;
    for (int l = 0; l < 3; ++l) {
      h = h >= conv[l].kernel ? conv_out(h, conv[l].kernel, conv[l].stride) : 0;
      w = w >= conv[l].kernel ? conv_out(w, conv[l].kernel, conv[l].stride) : 0;
      if (h < 1 || w < 1) {
        errors << "spatial size collapses below 1x1 after conv layer " << l << "; ";
        break;
      }
    }
  }
  const std::string text = errors.str();
  if (!text.empty()) throw ConfigError("invalid network spec: " + text);
}

std::array<TensorShape, 4> NetworkSpec::shapes() const {
  std::array<TensorShape, 4> out{};
  out[0] = {1, input_height, input_width};
  for (int l = 0; l < 3; ++l) {
    out[l + 1] = {conv[l].out_channels, conv_out(out[l].height, conv[l].kernel, conv[l].stride),
                  conv_out(out[l].width, conv[l].kernel, conv[l].stride)};
  }
  return out;
}

int NetworkSpec::feature_size() const { return shapes()[3].size(); }

std::size_t NetworkSpec::parameter_count() const {
  std::size_t total = 0;
  int in_channels = 1;
  for (const auto& layer : conv) {
    total += static_cast<std::size_t>(layer.out_channels) *
             (static_cast<std::size_t>(in_channels) * layer.kernel * layer.kernel + 1);
    in_channels = layer.out_channels;
  }
  const std::size_t d = static_cast<std::size_t>(feature_size());
  const std::size_t u = static_cast<std::size_t>(lstm_units);
  total += 4 * u * (d + u + 1);
  total += static_cast<std::size_t>(n_actions) * (u + 1);
  return total;
}

NetworkParams::Layout NetworkParams::make_layout(const NetworkSpec& spec) {
  Layout layout;
  std::size_t offset = 0;
  auto take = [&](int rows, int cols) {
    Block b{offset, rows, cols};
    offset += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    return b;
  };
  int in_channels = 1;
  for (int l = 0; l < 3; ++l) {
    const auto& c = spec.conv[l];
    layout.conv_w[l] = take(c.out_channels, in_channels * c.kernel * c.kernel);
    layout.conv_b[l] = take(c.out_channels, 1);
    in_channels = c.out_channels;
  }
  const int u = spec.lstm_units;
  layout.lstm_wx = take(4 * u, spec.feature_size());
  layout.lstm_wh = take(4 * u, u);
  layout.lstm_b = take(4 * u, 1);
  layout.head_w = take(spec.n_actions, u);
  layout.head_b = take(spec.n_actions, 1);
  layout.total = offset;
  return layout;
}

NetworkParams::NetworkParams(const NetworkSpec& spec) : spec_(spec) {
  spec_.validate();
  layout_ = make_layout(spec_);
  values_.assign(layout_.total, 0.0);
}

NetworkParams NetworkParams::random(const NetworkSpec& spec, SplitMix64& rng) {
  NetworkParams params(spec);
  auto fill = [&](const Block& block, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const std::size_t n = static_cast<std::size_t>(block.rows) * static_cast<std::size_t>(block.cols);
    for (std::size_t i = 0; i < n; ++i) params.values_[block.offset + i] = rng.uniform(-bound, bound);
  };
  const Layout& l = params.layout_;
  for (int i = 0; i < 3; ++i) {
    fill(l.conv_w[i], l.conv_w[i].cols);
    fill(l.conv_b[i], l.conv_w[i].cols);
  }
  const int lstm_fan_in = spec.feature_size() + spec.lstm_units;
  fill(l.lstm_wx, lstm_fan_in);
  fill(l.lstm_wh, lstm_fan_in);
  fill(l.lstm_b, lstm_fan_in);
  fill(l.head_w, spec.lstm_units);
  fill(l.head_b, spec.lstm_units);
  return params;
}

MatrixView NetworkParams::conv_weight(int layer) { return matrix(layout_.conv_w.at(layer)); }
ConstMatrixView NetworkParams::conv_weight(int layer) const { return matrix(layout_.conv_w.at(layer)); }
VectorView NetworkParams::conv_bias(int layer) { return vector(layout_.conv_b.at(layer)); }
ConstVectorView NetworkParams::conv_bias(int layer) const { return vector(layout_.conv_b.at(layer)); }
MatrixView NetworkParams::lstm_input_weight() { return matrix(layout_.lstm_wx); }
ConstMatrixView NetworkParams::lstm_input_weight() const { return matrix(layout_.lstm_wx); }
MatrixView NetworkParams::lstm_recurrent_weight() { return matrix(layout_.lstm_wh); }
ConstMatrixView NetworkParams::lstm_recurrent_weight() const { return matrix(layout_.lstm_wh); }
VectorView NetworkParams::lstm_bias() { return vector(layout_.lstm_b); }
ConstVectorView NetworkParams::lstm_bias() const { return vector(layout_.lstm_b); }
MatrixView NetworkParams::head_weight() { return matrix(layout_.head_w); }
ConstMatrixView NetworkParams::head_weight() const { return matrix(layout_.head_w); }
VectorView NetworkParams::head_bias() { return vector(layout_.head_b); }
ConstVectorView NetworkParams::head_bias() const { return vector(layout_.head_b); }

void NetworkParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

VectorXd conv_features(const NetworkParams& params, const Frame& frame) {
  const std::vector<const Frame*> one{&frame};
  MatrixXd features = conv_forward(params, one, nullptr);
  return VectorXd(features.col(0));
}

std::array<VectorXd, 3> conv_preactivations(const NetworkParams& params, const Frame& frame) {
  std::array<VectorXd, 3> pre;
  conv_forward(params, {&frame}, nullptr, &pre);
  return pre;
}

VectorXd lstm_step(const NetworkParams& params, const VectorXd& features, HiddenState& state) {
  const int units = params.spec().lstm_units;
  if (features.size() != params.spec().feature_size()) {
    throw ContractViolation("lstm_step: feature width does not match the network");
  }
  if (state.h.size() != units || state.c.size() != units) {
    throw ContractViolation("lstm_step: hidden state width does not match the network");
  }
  VectorXd z = params.lstm_input_weight() * features;
  z.noalias() += params.lstm_recurrent_weight() * state.h;
  z += params.lstm_bias();
  const VectorXd gi = sigmoid(z.head(units));
  const VectorXd gf = sigmoid(z.segment(units, units));
  const VectorXd gg = z.segment(2 * units, units).array().tanh().matrix();
  const VectorXd go = sigmoid(z.tail(units));
  state.c = gf.cwiseProduct(state.c) + gi.cwiseProduct(gg);
  state.h = go.cwiseProduct(VectorXd(state.c.array().tanh().matrix()));
  VectorXd q = params.head_weight() * state.h;
  q += params.head_bias();
  return q;
}

ForwardResult forward(const NetworkParams& params, std::span<const Frame* const> frames,
                      const HiddenState& h0) {
  const NetworkSpec& spec = params.spec();
  if (frames.empty() || static_cast<int>(frames.size()) > spec.unroll_length) {
    throw ContractViolation("forward: sequence length must be in [1, unroll_length]");
  }
  ForwardResult result;
  result.q.resize(static_cast<Eigen::Index>(frames.size()), spec.n_actions);
  HiddenState state = h0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    VectorXd x = conv_features(params, *frames[t]);
    result.q.row(static_cast<Eigen::Index>(t)) = lstm_step(params, x, state).transpose();
    result.states.push_back(state);
    result.features.push_back(std::move(x));
  }
  return result;
}

ForwardResult forward(const NetworkParams& params, std::span<const Frame> frames,
                      const HiddenState& h0) {
  std::vector<const Frame*> pointers;
  for (const Frame& f : frames) pointers.push_back(&f);
  return forward(params, std::span<const Frame* const>(pointers), h0);
}

MatrixXd final_q(const NetworkParams& params, const std::vector<std::vector<const Frame*>>& sequences) {
  const BatchLayout layout = layout_batch(params.spec(), sequences);
  const MatrixXd features = conv_forward(params, layout.frames, nullptr);
  const MatrixXd h = lstm_forward(params, layout, features, nullptr);
  MatrixXd q = params.head_weight() * h;
  q.colwise() += params.head_bias();
  return q;
}

LossAndGradient loss_and_gradient(const NetworkParams& params, const Batch& batch) {
  const NetworkSpec& spec = params.spec();
  const std::size_t n = batch.sequences.size();
  if (n == 0 || batch.actions.size() != n || batch.targets.size() != n) {
    throw ContractViolation("batch needs one action and one target per sequence");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.actions[i] < 0 || batch.actions[i] >= spec.n_actions) {
      throw ContractViolation("batch action index out of range");
    }
  }
  const BatchLayout layout = layout_batch(spec, batch.sequences);
  ConvCache conv_cache;
  LstmCache lstm_cache;
  const MatrixXd features = conv_forward(params, layout.frames, &conv_cache);
  const MatrixXd h = lstm_forward(params, layout, features, &lstm_cache);
  MatrixXd q = params.head_weight() * h;
  q.colwise() += params.head_bias();

  LossAndGradient out{0.0, NetworkParams(spec)};
  const double scale = 1.0 / static_cast<double>(n);
  MatrixXd dq = MatrixXd::Zero(spec.n_actions, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double residual = batch.targets[i] - q(batch.actions[i], static_cast<Eigen::Index>(i));
    if (!std::isfinite(residual)) {
      throw Divergence(i, "non-finite TD residual at batch index " + std::to_string(i));
    }
    out.loss += 0.5 * residual * residual * scale;
    dq(batch.actions[i], static_cast<Eigen::Index>(i)) = -residual * scale;
  }
  if (!std::isfinite(out.loss)) throw Divergence(0, "non-finite loss");

  NetworkParams& g = out.grads;
  g.head_weight().noalias() += dq * h.transpose();
  g.head_bias() += dq.rowwise().sum();
  MatrixXd dh = params.head_weight().transpose() * dq;
  const MatrixXd dfeatures = lstm_backward(params, layout, lstm_cache, std::move(dh), g);
  conv_backward(params, conv_cache, dfeatures, g);
  return out;
}

void RmsPropHyper::validate() const {
  std::ostringstream errors;
  if (!(learning_rate > 0.0)) errors << "learning_rate must be > 0; ";
  if (!(squared_decay >= 0.0 && squared_decay < 1.0)) errors << "squared_decay must be in [0,1); ";
  if (!(momentum >= 0.0 && momentum < 1.0)) errors << "momentum must be in [0,1); ";
  if (!(epsilon > 0.0)) errors << "epsilon must be > 0; ";
  if (!(clip > 0.0)) errors << "clip must be > 0; ";
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) errors << "lr_decay must be in (0,1]; ";
  if (decay_interval < 1) errors << "decay_interval must be >= 1; ";
  const std::string text = errors.str();
  if (!text.empty()) throw ConfigError("invalid optimizer settings: " + text);
}

OptimizerState OptimizerState::for_params(const NetworkParams& params, const RmsPropHyper& hyper) {
  OptimizerState state;
  state.mean_square.assign(params.size(), 0.0);
  state.velocity.assign(params.size(), 0.0);
  state.learning_rate = hyper.learning_rate;
  return state;
}

void rmsprop_step(NetworkParams& params, const NetworkParams& grads, OptimizerState& opt,
                  const RmsPropHyper& hyper) {
  if (grads.size() != params.size() || opt.mean_square.size() != params.size() ||
      opt.velocity.size() != params.size()) {
    throw ContractViolation("rmsprop_step: parameter, gradient and state sizes differ");
  }
  auto p = params.values();
  auto g = grads.values();
  const double rho = hyper.squared_decay;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double clipped = std::clamp(g[k], -hyper.clip, hyper.clip);
    opt.mean_square[k] = rho * opt.mean_square[k] + (1.0 - rho) * clipped * clipped;
    opt.velocity[k] = hyper.momentum * opt.velocity[k] +
                      opt.learning_rate * clipped / std::sqrt(opt.mean_square[k] + hyper.epsilon);
    p[k] -= opt.velocity[k];
  }
  ++opt.step;
  if (opt.step % hyper.decay_interval == 0) opt.learning_rate *= hyper.lr_decay;
}

}  // namespace tddm::net
