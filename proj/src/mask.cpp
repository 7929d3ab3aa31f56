#include "tddm/mask.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tddm::mask {

namespace {

std::atomic<std::uint64_t> g_apply_mask_calls{0};

double max_value(std::span<const double> values) {
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  return hi;
}

}  // namespace

BinaryMask::BinaryMask(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw ContractViolation("mask dimensions must be non-negative");
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
               fill ? 1 : 0);
}

std::size_t BinaryMask::kept_count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void ThresholdPolicy::validate() const {
  std::ostringstream errors;
  if (!(floor >= 0.0)) errors << "floor must be >= 0; ";
  if (!(k >= 0.0)) errors << "k must be >= 0; ";
  if (bins < 2) errors << "bins must be >= 2; ";
  if (!(min_separability >= 0.0 && min_separability <= 1.0)) {
    errors << "min_separability must be in [0,1]; ";
  }
  if (!(min_keep_fraction >= 0.0 && min_keep_fraction <= 1.0)) {
    errors << "min_keep_fraction must be in [0,1]; ";
  }
  const std::string text = errors.str();
  if (!text.empty()) throw ConfigError("invalid threshold policy: " + text);
}

OtsuSplit otsu_split(std::span<const double> values, int bins) {
  if (bins < 2) throw ContractViolation("otsu_split: bins must be >= 2");
  const double hi = max_value(values);
  if (values.empty() || !(hi > 0.0)) return {};

  const double width = hi / bins;
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  for (double v : values) {
    const int b = std::clamp(static_cast<int>(v / hi * bins), 0, bins - 1);
    hist[b] += 1.0;
  }
  const double n = static_cast<double>(values.size());
  double total_mean = 0.0;
  for (int b = 0; b < bins; ++b) total_mean += hist[b] / n * (b + 0.5) * width;
  double total_var = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double d = (b + 0.5) * width - total_mean;
    total_var += hist[b] / n * d * d;
  }

  double best = -1.0;
  int best_bin = 0;
  double w0 = 0.0;
  double sum0 = 0.0;
  for (int b = 0; b < bins - 1; ++b) {
    w0 += hist[b] / n;
    sum0 += hist[b] / n * (b + 0.5) * width;
    const double w1 = 1.0 - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_mean - sum0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  OtsuSplit split;
  split.threshold = (best_bin + 1) * width;
  split.separability = (best > 0.0 && total_var > 0.0) ? std::min(1.0, best / total_var) : 0.0;
  return split;
}

double adaptive_threshold(const Plane& magnitudes, const ThresholdPolicy& policy) {
  const auto values = magnitudes.values();
  if (values.empty()) return 0.0;
  switch (policy.method) {
    case ThresholdMethod::otsu: {
      const OtsuSplit split = otsu_split(values, policy.bins);
      return split.separability >= policy.min_separability ? split.threshold : 0.0;
    }
    case ThresholdMethod::mean_plus_k_sigma: {
      const double n = static_cast<double>(values.size());
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      return mean + policy.k * std::sqrt(var / n);
    }
  }
  return 0.0;
}

BinaryMask threshold_mask(const Plane& magnitudes, const ThresholdPolicy& policy) {
  BinaryMask mask(magnitudes.width(), magnitudes.height());
  const auto values = magnitudes.values();
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ContractViolation("threshold_mask: magnitudes must be finite and non-negative");
    }
  }
  if (!(max_value(values) > 0.0)) return mask;

  double cut = std::max(adaptive_threshold(magnitudes, policy), policy.floor);
  if (policy.min_keep_fraction > 0.0) {
    const auto want = static_cast<std::size_t>(
        std::ceil(policy.min_keep_fraction * static_cast<double>(values.size())));
    const auto kept = static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [cut](double v) { return v >= cut; }));
    if (want > 0 && kept < want) {
      std::vector<double> sorted(values.begin(), values.end());
      std::nth_element(sorted.begin(), sorted.begin() + (sorted.size() - want), sorted.end());
      cut = sorted[sorted.size() - want];
    }
  }
  for (int y = 0; y < magnitudes.height(); ++y) {
    for (int x = 0; x < magnitudes.width(); ++x) mask.set(x, y, magnitudes.at(x, y) >= cut);
  }
  return mask;
}

Frame apply_mask(const Frame& frame, const BinaryMask& mask) {
  if (frame.width() != mask.width() || frame.height() != mask.height()) {
    throw ContractViolation("apply_mask: dimension mismatch");
  }
  g_apply_mask_calls.fetch_add(1, std::memory_order_relaxed);
  Plane out(frame.width(), frame.height());
  auto src = frame.values();
  auto bits = mask.bits();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = bits[i] ? src[i] : 0.0;
  return Frame(std::move(out));
}

double masking_amount(const BinaryMask& mask) {
  if (mask.size() == 0) return 0.0;
  return static_cast<double>(mask.size() - mask.kept_count()) / static_cast<double>(mask.size());
}

std::uint64_t apply_mask_calls() noexcept {
  return g_apply_mask_calls.load(std::memory_order_relaxed);
}

BinaryMask transition_mask(const Frame& prev, const Frame& curr, const flow::FlowParams& flow_params,
                           const ThresholdPolicy& policy) {
  const flow::FlowField field = flow::estimate_flow(prev, curr, flow_params);
  return threshold_mask(flow::magnitude(field), policy);
}

TddmResult tddm(const Frame& prev, const Frame& curr, const flow::FlowParams& flow_params,
                const ThresholdPolicy& policy) {
  BinaryMask mask = transition_mask(prev, curr, flow_params, policy);
  Frame masked = apply_mask(curr, mask);
  const double amount = masking_amount(mask);
  return {std::move(masked), std::move(mask), amount};
}

}  // namespace tddm::mask
