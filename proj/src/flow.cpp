#include "tddm/flow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <utility>

namespace tddm::flow {

namespace {

// Separable Gaussian taps g[k], k in [-r, r], normalized to unit sum, plus the
// inverse of the (ridged) 6x6 normal matrix for the basis {1,x,y,x^2,y^2,xy}.
// The normal matrix does not depend on the pixel because padding is
// replicate-edge, so it is factored once per (sigma, radius).
struct ExpansionKernel {
  int radius = 0;
  std::vector<double> g;
  std::vector<double> xg;
  std::vector<double> xxg;
  Eigen::Matrix<double, 6, 6> inverse_normal;
};

std::shared_ptr<const ExpansionKernel> build_kernel(double sigma, int radius) {
  auto kernel = std::make_shared<ExpansionKernel>();
  kernel->radius = radius;
  const int taps = 2 * radius + 1;
  kernel->g.resize(taps);
  kernel->xg.resize(taps);
  kernel->xxg.resize(taps);

  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel->g[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    total += kernel->g[k + radius];
  }
  for (int k = -radius; k <= radius; ++k) {
    const double w = kernel->g[k + radius] / total;
    kernel->g[k + radius] = w;
    kernel->xg[k + radius] = k * w;
    kernel->xxg[k + radius] = k * k * w;
  }

  Eigen::Matrix<double, 6, 6> normal = Eigen::Matrix<double, 6, 6>::Zero();
  for (int y = -radius; y <= radius; ++y) {
    for (int x = -radius; x <= radius; ++x) {
      const double w = kernel->g[x + radius] * kernel->g[y + radius];
      const Eigen::Matrix<double, 6, 1> basis{1.0, double(x), double(y), double(x * x),
                                              double(y * y), double(x * y)};
      normal += w * basis * basis.transpose();
    }
  }
  kernel->inverse_normal = normal.ldlt().solve(Eigen::Matrix<double, 6, 6>::Identity());
  return kernel;
}

std::shared_ptr<const ExpansionKernel> cached_kernel(double sigma, int radius) {
  static std::mutex mutex;
  static std::map<std::pair<double, int>, std::shared_ptr<const ExpansionKernel>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{sigma, radius}];
  if (!slot) slot = build_kernel(sigma, radius);
  return slot;
}

// Per-pixel accumulators of the displacement normal equations: G = A'A and
// h = A'db, with G symmetric.
struct Moments {
  double g11 = 0.0;
  double g12 = 0.0;
  double g22 = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
};

PixelPoly sample_poly(const PolyCoeffs& poly, double x, double y) {
  const double cx = std::clamp(x, 0.0, double(poly.width - 1));
  const double cy = std::clamp(y, 0.0, double(poly.height - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, poly.width - 1);
  const int y1 = std::min(y0 + 1, poly.height - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy,
               w11 = fx * fy;
  const PixelPoly& p00 = poly.at(x0, y0);
  const PixelPoly& p10 = poly.at(x1, y0);
  const PixelPoly& p01 = poly.at(x0, y1);
  const PixelPoly& p11 = poly.at(x1, y1);
  auto mix = [&](double PixelPoly::*field) {
    return w00 * p00.*field + w10 * p10.*field + w01 * p01.*field + w11 * p11.*field;
  };
  PixelPoly out;
  out.c = mix(&PixelPoly::c);
  out.bx = mix(&PixelPoly::bx);
  out.by = mix(&PixelPoly::by);
  out.axx = mix(&PixelPoly::axx);
  out.ayy = mix(&PixelPoly::ayy);
  out.axy = mix(&PixelPoly::axy);
  return out;
}

// Certainty of an expansion along one axis: fits whose window reaches past
// the edge see replicated pixels and count for less.
double edge_certainty(int pos, int size, int radius) {
  const int inside = std::min(pos, size - 1 - pos) + 1;
  return std::min(1.0, double(inside) / (radius + 1));
}

std::vector<Moments> update_moments(const PolyCoeffs& first, const PolyCoeffs& second,
                                    const FlowField& flow, int poly_radius) {
  std::vector<Moments> moments(first.pixels.size());
  for (int y = 0; y < first.height; ++y) {
    for (int x = 0; x < first.width; ++x) {
      const double dx = flow.dx.at(x, y);
      const double dy = flow.dy.at(x, y);
      // A displaced point outside the image carries no constraint.
      if (!(x + dx >= 0.0 && x + dx <= first.width - 1 && y + dy >= 0.0 && y + dy <= first.height - 1)) {
        continue;
      }
      const PixelPoly& p0 = first.at(x, y);
      const PixelPoly p1 = sample_poly(second, x + dx, y + dy);

      const double a11 = 0.5 * (p0.axx + p1.axx);
      const double a22 = 0.5 * (p0.ayy + p1.ayy);
      const double a12 = 0.5 * (p0.axy + p1.axy);
      const double b1 = -0.5 * (p1.bx - p0.bx) + a11 * dx + a12 * dy;
      const double b2 = -0.5 * (p1.by - p0.by) + a12 * dx + a22 * dy;

      const double w = edge_certainty(x, first.width, poly_radius) * edge_certainty(y, first.height, poly_radius);
      Moments& m = moments[static_cast<std::size_t>(y) * first.width + x];
      m.g11 = w * (a11 * a11 + a12 * a12);
      m.g12 = w * a12 * (a11 + a22);
      m.g22 = w * (a22 * a22 + a12 * a12);
      m.h1 = w * (a11 * b1 + a12 * b2);
      m.h2 = w * (a12 * b1 + a22 * b2);
    }
  }
  return moments;
}

// Box average over (2r+1)^2 with replicate edges, separable, fixed summation
// order.
std::vector<Moments> box_average(const std::vector<Moments>& src, int width, int height,
                                 int radius) {
  const double norm = 1.0 / (2 * radius + 1);
  std::vector<Moments> tmp(src.size());
  std::vector<Moments> out(src.size());
  auto accumulate = [](Moments& acc, const Moments& m) {
    acc.g11 += m.g11;
    acc.g12 += m.g12;
    acc.g22 += m.g22;
    acc.h1 += m.h1;
    acc.h2 += m.h2;
  };
  auto scale = [norm](Moments& m) {
    m.g11 *= norm;
    m.g12 *= norm;
    m.g22 *= norm;
    m.h1 *= norm;
    m.h2 *= norm;
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Moments acc;
      for (int k = -radius; k <= radius; ++k) {
        const int yy = std::clamp(y + k, 0, height - 1);
        accumulate(acc, src[static_cast<std::size_t>(yy) * width + x]);
      }
      scale(acc);
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Moments acc;
      for (int k = -radius; k <= radius; ++k) {
        const int xx = std::clamp(x + k, 0, width - 1);
        accumulate(acc, tmp[static_cast<std::size_t>(y) * width + xx]);
      }
      scale(acc);
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

void solve_displacement(const std::vector<Moments>& moments, FlowField& flow) {
  const int width = flow.width();
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      const Moments& m = moments[static_cast<std::size_t>(y) * width + x];
      const double ridge = kRidge * 0.5 * (m.g11 + m.g22) + kRidgeFloor;
      const double g11 = m.g11 + ridge;
      const double g22 = m.g22 + ridge;
      const double det = g11 * g22 - m.g12 * m.g12;
      flow.dx.at(x, y) = (g22 * m.h1 - m.g12 * m.h2) / det;
      flow.dy.at(x, y) = (g11 * m.h2 - m.g12 * m.h1) / det;
    }
  }
}

int level_count(int width, int height, const FlowParams& params) {
  const int min_side =
      std::max(Frame::kMinSide, 2 * (params.window_radius + expansion_radius(params.expansion_sigma)) + 1);
  int levels = 1;
  double scale = 1.0;
  while (levels < params.pyramid_levels) {
    scale *= params.pyramid_scale;
    if (std::lround(width * scale) < min_side || std::lround(height * scale) < min_side) {
      break;
    }
    ++levels;
  }
  return levels;
}

}  // namespace

void FlowParams::validate() const {
  std::ostringstream errors;
  if (pyramid_levels < 1) errors << "pyramid_levels must be >= 1; ";
  if (!(pyramid_scale > 0.0 && pyramid_scale < 1.0)) errors << "pyramid_scale must be in (0,1); ";
  if (window_radius < 1) errors << "window_radius must be >= 1; ";
  if (!(expansion_sigma > 0.0) || !std::isfinite(expansion_sigma)) {
    errors << "expansion_sigma must be positive; ";
  }
  if (iterations_per_level < 1) errors << "iterations_per_level must be >= 1; ";
  const std::string text = errors.str();
  if (!text.empty()) throw ConfigError("invalid flow parameters: " + text);
}

int expansion_radius(double sigma) {
  return std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
}

PolyCoeffs polynomial_expansion(const Frame& frame, double sigma, int radius) {
  return polynomial_expansion(frame.plane(), sigma, radius);
}

PolyCoeffs polynomial_expansion(const Plane& image, double sigma, int radius) {
  if (radius < 1) throw ContractViolation("polynomial_expansion: radius must be >= 1");
  if (!(sigma > 0.0)) throw ContractViolation("polynomial_expansion: sigma must be positive");
  const auto kernel = cached_kernel(sigma, radius);
  const int width = image.width();
  const int height = image.height();
  const auto& g = kernel->g;
  const auto& xg = kernel->xg;
  const auto& xxg = kernel->xxg;
  const auto& inv = kernel->inverse_normal;

  PolyCoeffs out;
  out.width = width;
  out.height = height;
  out.pixels.resize(image.size());

  // Vertical pass keeps three column moments per pixel: sum g f, sum y g f,
  // sum y^2 g f.
  std::vector<std::array<double, 3>> column(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::array<double, 3> acc{0.0, 0.0, 0.0};
      for (int k = -radius; k <= radius; ++k) {
        const double f = image.clamped(x, y + k);
        acc[0] += g[k + radius] * f;
        acc[1] += xg[k + radius] * f;
        acc[2] += xxg[k + radius] * f;
      }
      column[x] = acc;
    }
    for (int x = 0; x < width; ++x) {
      Eigen::Matrix<double, 6, 1> m = Eigen::Matrix<double, 6, 1>::Zero();
      for (int k = -radius; k <= radius; ++k) {
        const auto& v = column[std::clamp(x + k, 0, width - 1)];
        m[0] += g[k + radius] * v[0];
        m[1] += xg[k + radius] * v[0];
        m[2] += g[k + radius] * v[1];
        m[3] += xxg[k + radius] * v[0];
        m[4] += g[k + radius] * v[2];
        m[5] += xg[k + radius] * v[1];
      }
      const Eigen::Matrix<double, 6, 1> r = inv * m;
      PixelPoly& p = out.pixels[static_cast<std::size_t>(y) * width + x];
      p.c = r[0];
      p.bx = r[1];
      p.by = r[2];
      p.axx = r[3];
      p.ayy = r[4];
      p.axy = 0.5 * r[5];
    }
  }
  return out;
}

Plane gaussian_blur(const Plane& src, double sigma) {
  if (!(sigma > 0.0)) return src;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
    total += taps[k + radius];
  }
  for (double& t : taps) t /= total;

  Plane tmp(src.width(), src.height());
  Plane out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * src.clamped(x, y + k);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * tmp.clamped(x + k, y);
      out.at(x, y) = acc;
    }
  }
  return out;
}

double sample_bilinear(const Plane& src, double x, double y) {
  const double cx = std::clamp(x, 0.0, double(src.width() - 1));
  const double cy = std::clamp(y, 0.0, double(src.height() - 1));
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, src.width() - 1);
  const int y1 = std::min(y0 + 1, src.height() - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  return (1 - fx) * (1 - fy) * src.at(x0, y0) + fx * (1 - fy) * src.at(x1, y0) +
         (1 - fx) * fy * src.at(x0, y1) + fx * fy * src.at(x1, y1);
}

Plane resize_bilinear(const Plane& src, int width, int height) {
  Plane out(width, height);
  const double sx = double(src.width()) / width;
  const double sy = double(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.at(x, y) = sample_bilinear(src, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    }
  }
  return out;
}

FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowParams& params) {
  require_same_shape(prev.plane(), next.plane(), "estimate_flow");
  params.validate();
  const int width = prev.width();
  const int height = prev.height();
  const int levels = level_count(width, height, params);
  const int poly_radius = expansion_radius(params.expansion_sigma);

  FlowField flow;
  for (int level = levels - 1; level >= 0; --level) {
    const double scale = std::pow(params.pyramid_scale, level);
    const int w = level == 0 ? width : static_cast<int>(std::lround(width * scale));
    const int h = level == 0 ? height : static_cast<int>(std::lround(height * scale));

    auto level_image = [&](const Frame& frame) {
      if (level == 0) return frame.plane();
      return resize_bilinear(gaussian_blur(frame.plane(), (1.0 / scale - 1.0) * 0.5), w, h);
    };
    const PolyCoeffs first =
        polynomial_expansion(level_image(prev), params.expansion_sigma, poly_radius);
    const PolyCoeffs second =
        polynomial_expansion(level_image(next), params.expansion_sigma, poly_radius);

    if (flow.dx.empty()) {
      flow.dx = Plane(w, h);
      flow.dy = Plane(w, h);
    } else {
      const double ux = double(w) / flow.width();
      const double uy = double(h) / flow.height();
      FlowField up{resize_bilinear(flow.dx, w, h), resize_bilinear(flow.dy, w, h)};
      for (double& v : up.dx.values()) v *= ux;
      for (double& v : up.dy.values()) v *= uy;
      flow = std::move(up);
    }

    for (int it = 0; it < params.iterations_per_level; ++it) {
      const auto moments = update_moments(first, second, flow, poly_radius);
      solve_displacement(box_average(moments, w, h, params.window_radius), flow);
    }
  }
  return flow;
}

Plane magnitude(const FlowField& field) {
  require_same_shape(field.dx, field.dy, "magnitude");
  Plane out(field.width(), field.height());
  auto dx = field.dx.values();
  auto dy = field.dy.values();
  auto mag = out.values();
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(dx[i], dy[i]);
  return out;
}

}  // namespace tddm::flow
