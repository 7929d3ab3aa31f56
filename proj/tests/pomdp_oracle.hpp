#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "tddm/pomdp.hpp"
#include "tddm/rng.hpp"

namespace tddm::test {

// Random row-stochastic tables; about one entry in five is forced to zero
// so that impossible observations occur.
inline pomdp::TabularPomdp random_pomdp(SplitMix64& rng, std::size_t states, std::size_t actions,
                                        std::size_t observations, double discount) {
  auto stochastic_row = [&](std::size_t n) {
    std::vector<double> row(n);
    for (;;) {
      for (double& v : row) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.05, 1.0);
      const double sum = std::accumulate(row.begin(), row.end(), 0.0);
      if (sum > 0.0) {
        for (double& v : row) v /= sum;
        return row;
      }
    }
  };
  pomdp::TabularPomdp::Tables t;
  for (std::size_t s = 0; s < states; ++s) t.states.push_back("s" + std::to_string(s));
  for (std::size_t a = 0; a < actions; ++a) t.actions.push_back("a" + std::to_string(a));
  for (std::size_t o = 0; o < observations; ++o) t.observations.push_back("o" + std::to_string(o));
  t.transition.assign(actions, {});
  t.observation.assign(actions, {});
  for (std::size_t a = 0; a < actions; ++a) {
    for (std::size_t s = 0; s < states; ++s) t.transition[a].push_back(stochastic_row(states));
    for (std::size_t s = 0; s < states; ++s) t.observation[a].push_back(stochastic_row(observations));
  }
  t.reward.assign(states, std::vector<double>(actions));
  for (auto& row : t.reward) {
    for (double& r : row) r = rng.uniform(-1.0, 1.0);
  }
  t.discount = discount;
  return pomdp::TabularPomdp(std::move(t));
}

// Depth-limited expectimax written directly from the Bayes filter, without
// any of the library's belief or value code.
inline double expectimax(const pomdp::TabularPomdp::Tables& t, const std::vector<double>& b, int depth) {
  if (depth == 0) return 0.0;
  const std::size_t ns = t.states.size();
  double best = -1e300;
  for (std::size_t a = 0; a < t.actions.size(); ++a) {
    double value = 0.0;
    for (std::size_t s = 0; s < ns; ++s) value += b[s] * t.reward[s][a];
    for (std::size_t o = 0; o < t.observations.size(); ++o) {
      std::vector<double> joint(ns, 0.0);
      for (std::size_t s2 = 0; s2 < ns; ++s2) {
        double pred = 0.0;
        for (std::size_t s = 0; s < ns; ++s) pred += b[s] * t.transition[a][s][s2];
        joint[s2] = pred * t.observation[a][s2][o];
      }
      const double p = std::accumulate(joint.begin(), joint.end(), 0.0);
      if (p <= 0.0) continue;
      for (double& v : joint) v /= p;
      value += t.discount * p * expectimax(t, joint, depth - 1);
    }
    best = std::max(best, value);
  }
  return best;
}

}  // namespace tddm::test
