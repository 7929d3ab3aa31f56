#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tddm/common.hpp"
#include "tddm/flow.hpp"

namespace tddm::mask {

/// Keep/blank mask: 1 keeps the pixel, 0 blanks it.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, std::uint8_t fill = 0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool kept(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool keep) { bits_[index(x, y)] = keep ? 1 : 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t kept_count() const noexcept;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

enum class ThresholdMethod { otsu, mean_plus_k_sigma };

struct ThresholdPolicy {
  ThresholdMethod method = ThresholdMethod::otsu;
  /// Multiplier for mean_plus_k_sigma.
  double k = 1.0;
  /// Absolute magnitude (pixels) below which nothing is kept.
  double floor = 0.05;
  /// Histogram resolution for Otsu, over [0, max magnitude].
  int bins = 64;
  /// Otsu split is only trusted when between-class variance explains at
  /// least this share of the total variance. Below it the field is treated
  /// as a single motion population and only `floor` applies.
  double min_separability = 0.8;
  /// Optional guard against fully blanked frames: if fewer than this share
  /// of pixels survive, the strongest-moving pixels are kept up to it.
  /// 0 disables the guard. With the guard active `floor` may be undercut.
  double min_keep_fraction = 0.0;

  void validate() const;
};

struct OtsuSplit {
  /// Upper edge of the last bin assigned to the low class.
  double threshold = 0.0;
  /// Between-class over total variance, in [0,1]; 0 for a constant input.
  double separability = 0.0;
};

/// Classic Otsu over `bins` equal-width bins spanning [0, max(values)].
/// Ties between candidate splits go to the lowest one.
OtsuSplit otsu_split(std::span<const double> values, int bins);

/// Threshold produced by the policy's adaptive rule, before the floor.
double adaptive_threshold(const Plane& magnitudes, const ThresholdPolicy& policy);

/// mask[p] = 1 iff mag[p] >= max(adaptive_threshold, floor). An all-zero
/// field always produces an all-zero mask.
BinaryMask threshold_mask(const Plane& magnitudes, const ThresholdPolicy& policy);

/// Element-wise product of frame and mask.
Frame apply_mask(const Frame& frame, const BinaryMask& mask);

/// Share of blanked pixels, in [0,1].
double masking_amount(const BinaryMask& mask);

/// Number of apply_mask invocations in this process. Instrumentation for
/// checking which code paths filter observations.
std::uint64_t apply_mask_calls() noexcept;

/// Mask for the transition prev -> curr without applying it.
BinaryMask transition_mask(const Frame& prev, const Frame& curr, const flow::FlowParams& flow_params,
                           const ThresholdPolicy& policy);

struct TddmResult {
  Frame masked;
  BinaryMask mask;
  double masking_amount = 0.0;
};

/// estimate_flow -> magnitude -> threshold_mask -> apply_mask(curr, mask).
TddmResult tddm(const Frame& prev, const Frame& curr, const flow::FlowParams& flow_params,
                const ThresholdPolicy& policy);

}  // namespace tddm::mask
