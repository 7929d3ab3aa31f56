#pragma once

#include <cmath>

#include "tddm/common.hpp"
#include "tddm/rng.hpp"

namespace tddm::test {

// Smooth random texture: a sum of sinusoids at spread orientations, mapped
// into [0.1, 0.9].
inline Plane smooth_texture(int width, int height, SplitMix64& rng, int waves = 6) {
  Plane p(width, height);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> ws;
  for (int i = 0; i < waves; ++i) {
    // Orientation spread over the half circle so motion is observable in
    // every direction.
    const double angle = 3.141592653589793 * (i + rng.uniform()) / waves;
    const double freq = rng.uniform(0.2, 0.6);
    ws.push_back({freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 6.283185307179586),
                  rng.uniform(0.5, 1.0)});
  }
  double total = 0.0;
  for (const auto& w : ws) total += w.amp;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 0.0;
      for (const auto& w : ws) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      p.at(x, y) = 0.5 + 0.4 * v / total;
    }
  }
  return p;
}

// Integer translation: out(x, y) = src(x - dx, y - dy), replicate edges.
inline Plane shifted(const Plane& src, int dx, int dy) {
  Plane out(src.width(), src.height());
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) out.at(x, y) = src.clamped(x - dx, y - dy);
  }
  return out;
}

inline Plane random_plane(int width, int height, SplitMix64& rng) {
  Plane p(width, height);
  for (double& v : p.values()) v = rng.uniform();
  return p;
}

}  // namespace tddm::test
