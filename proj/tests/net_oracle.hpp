#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tddm/net.hpp"

namespace tddm::test {

// Central finite difference of the batch loss in one parameter.
inline double fd_derivative(net::NetworkParams params, const net::Batch& batch, std::size_t index, double h) {
  const double base = params.values()[index];
  params.values()[index] = base + h;
  const double up = net::loss_and_gradient(params, batch).loss;
  params.values()[index] = base - h;
  const double down = net::loss_and_gradient(params, batch).loss;
  return (up - down) / (2.0 * h);
}

// Whether moving parameter `index` by +-h flips the sign of any conv
// pre-activation on the batch frames. A flip puts a ReLU kink inside the
// difference stencil, where the central difference does not estimate the
// derivative.
inline bool crosses_kink(net::NetworkParams params, const std::vector<const Frame*>& frames, std::size_t index,
                         double h) {
  auto signs = [&](double shift) {
    net::NetworkParams p = params;
    p.values()[index] += shift;
    std::vector<bool> out;
    for (const Frame* f : frames) {
      for (const auto& layer : net::conv_preactivations(p, *f)) {
        for (double v : layer) out.push_back(v > 0.0);
      }
    }
    return out;
  };
  return signs(h) != signs(-h);
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Sparse binary frame in the style of the catch game: one lit pixel and a
// three-pixel bar on the bottom row.
inline Frame sparse_frame(int size, SplitMix64& rng) {
  Plane p(size, size, 0.0);
  p.at(static_cast<int>(rng.below(size)), static_cast<int>(rng.below(size - 2))) = 1.0;
  const int bar = 1 + static_cast<int>(rng.below(size - 2));
  for (int x = bar - 1; x <= bar + 1; ++x) p.at(x, size - 1) = 1.0;
  return Frame(p);
}

}  // namespace tddm::test
