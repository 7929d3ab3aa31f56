#pragma once

#include <vector>

#include "tddm/common.hpp"

namespace tddm::flow {

/// Local quadratic model f(p) ~ p'Ap + b'p + c around one pixel, with p = (x, y)
/// measured in pixels (x to the right, y downwards). A is symmetric and stored
/// as its three distinct entries.
struct PixelPoly {
  double c = 0.0;
  double bx = 0.0;
  double by = 0.0;
  double axx = 0.0;
  double ayy = 0.0;
  double axy = 0.0;
};

struct PolyCoeffs {
  int width = 0;
  int height = 0;
  std::vector<PixelPoly> pixels;

  const PixelPoly& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }
};

/// Per-pixel displacement in pixels; dx along columns, dy along rows.
struct FlowField {
  Plane dx;
  Plane dy;

  int width() const noexcept { return dx.width(); }
  int height() const noexcept { return dx.height(); }
};

struct FlowParams {
  int pyramid_levels = 3;
  double pyramid_scale = 0.5;
  int window_radius = 7;
  double expansion_sigma = 1.5;
  int iterations_per_level = 3;

  /// Throws ConfigError listing the violated field.
  void validate() const;
};

/// Tikhonov term for every 2x2 displacement solve: kRidge times the mean of
/// the diagonal, so it does not depend on the intensity scale, plus
/// kRidgeFloor, which keeps textureless regions at zero flow instead of
/// dividing by zero.
inline constexpr double kRidge = 1e-6;
inline constexpr double kRidgeFloor = 1e-12;

/// Neighborhood radius used for the polynomial fit at a given sigma.
int expansion_radius(double sigma);

/// Gaussian-weighted least-squares fit of {1, x, y, x^2, y^2, xy} over the
/// (2r+1)^2 window around every pixel, with replicate-edge padding.
PolyCoeffs polynomial_expansion(const Frame& frame, double sigma, int radius);
PolyCoeffs polynomial_expansion(const Plane& image, double sigma, int radius);

/// Dense displacement from `prev` to `next`, coarse to fine over an image
/// pyramid. Levels too small to hold one averaging window are skipped.
/// Pure function; throws ContractViolation on a shape mismatch.
FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowParams& params);

/// Per-pixel Euclidean length of the displacement.
Plane magnitude(const FlowField& field);

// Image helpers shared with tests and the debug tooling.
Plane gaussian_blur(const Plane& src, double sigma);
Plane resize_bilinear(const Plane& src, int width, int height);
/// Bilinear read at real coordinates, replicate-clamped outside the plane.
double sample_bilinear(const Plane& src, double x, double y);

}  // namespace tddm::flow
