#include "tddm/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <sstream>

namespace tddm::pomdp {

namespace {

std::string describe_index(const char* what, std::size_t i) {
  return std::string(what) + " " + std::to_string(i);
}

void check_distribution(const std::vector<double>& row, const std::string& where) {
  double sum = 0.0;
  for (double p : row) {
    if (!std::isfinite(p) || p < 0.0) {
      throw ContractViolation(where + ": probabilities must be finite and non-negative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << where << ": probabilities sum to " << sum << ", expected 1";
    throw ContractViolation(msg.str());
  }
}

}  // namespace

ImpossibleObservation::ImpossibleObservation(std::size_t action, std::size_t observation)
    : Error(ErrorCategory::model, "impossible observation " + std::to_string(observation) +
                                      " after action " + std::to_string(action)),
      action_(action),
      observation_(observation) {}

BeliefState::BeliefState(std::vector<double> probabilities) : p_(std::move(probabilities)) {
  if (p_.empty()) throw ContractViolation("belief must cover at least one state");
  check_distribution(p_, "belief");
}

BeliefState BeliefState::uniform(std::size_t states) {
  return BeliefState(std::vector<double>(states, 1.0 / static_cast<double>(states)));
}

BeliefState BeliefState::point(std::size_t states, std::size_t s) {
  std::vector<double> p(states, 0.0);
  p.at(s) = 1.0;
  return BeliefState(std::move(p));
}

double BeliefState::distance(const BeliefState& other) const {
  if (other.size() != size()) throw ContractViolation("belief size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p_.size(); ++i) d = std::max(d, std::abs(p_[i] - other.p_[i]));
  return d;
}

TabularPomdp::TabularPomdp(Tables tables) : t_(std::move(tables)) {
  const std::size_t ns = t_.states.size();
  const std::size_t na = t_.actions.size();
  const std::size_t no = t_.observations.size();
  if (ns == 0 || na == 0 || no == 0) {
    throw ContractViolation("model needs at least one state, action and observation");
  }
  if (!(t_.discount >= 0.0 && t_.discount < 1.0)) {
    throw ContractViolation("discount must be in [0,1)");
  }
  if (t_.transition.size() != na || t_.observation.size() != na || t_.reward.size() != ns) {
    throw ContractViolation("table shapes do not match the state/action/observation sets");
  }
  for (std::size_t a = 0; a < na; ++a) {
    if (t_.transition[a].size() != ns || t_.observation[a].size() != ns) {
      throw ContractViolation("table shapes do not match for " + describe_index("action", a));
    }
    for (std::size_t s = 0; s < ns; ++s) {
      if (t_.transition[a][s].size() != ns || t_.observation[a][s].size() != no) {
        throw ContractViolation("row length mismatch for " + describe_index("action", a));
      }
      check_distribution(t_.transition[a][s], "transition(" + describe_index("state", s) + ", " +
                                                  describe_index("action", a) + ")");
      check_distribution(t_.observation[a][s], "observation(" + describe_index("state", s) +
                                                   ", " + describe_index("action", a) + ")");
    }
  }
  for (std::size_t s = 0; s < ns; ++s) {
    if (t_.reward[s].size() != na) throw ContractViolation("reward row length mismatch");
    for (double r : t_.reward[s]) {
      if (!std::isfinite(r)) throw ContractViolation("rewards must be finite");
    }
  }
}

TabularPomdp TabularPomdp::with_scaled_rewards(double factor) const {
  Tables copy = t_;
  for (auto& row : copy.reward) {
    for (double& r : row) r *= factor;
  }
  return TabularPomdp(std::move(copy));
}

std::vector<double> predict(const TabularPomdp& m, const BeliefState& b, std::size_t a) {
  const std::size_t ns = m.num_states();
  if (b.size() != ns) throw ContractViolation("belief size does not match model");
  if (a >= m.num_actions()) throw ContractViolation("action index out of range");
  std::vector<double> next(ns, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    if (b[s] == 0.0) continue;
    for (std::size_t s2 = 0; s2 < ns; ++s2) next[s2] += m.transition(s, a, s2) * b[s];
  }
  return next;
}

double observation_prob(const TabularPomdp& m, const BeliefState& b, std::size_t a,
                        std::size_t o) {
  if (o >= m.num_observations()) throw ContractViolation("observation index out of range");
  const std::vector<double> next = predict(m, b, a);
  double p = 0.0;
  for (std::size_t s2 = 0; s2 < next.size(); ++s2) p += m.observation(s2, a, o) * next[s2];
  return p;
}

BeliefState belief_update(const TabularPomdp& m, const BeliefState& b, std::size_t a,
                          std::size_t o) {
  if (o >= m.num_observations()) throw ContractViolation("observation index out of range");
  std::vector<double> post = predict(m, b, a);
  double norm = 0.0;
  for (std::size_t s2 = 0; s2 < post.size(); ++s2) {
    post[s2] *= m.observation(s2, a, o);
    norm += post[s2];
  }
  if (!(norm > 0.0)) throw ImpossibleObservation(a, o);
  for (double& p : post) p /= norm;
  // Renormalize once more so the sum is 1 to the last ulp or two.
  const double again = std::accumulate(post.begin(), post.end(), 0.0);
  for (double& p : post) p /= again;
  return BeliefState(std::move(post));
}

double belief_reward(const TabularPomdp& m, const BeliefState& b, std::size_t a) {
  if (b.size() != m.num_states()) throw ContractViolation("belief size does not match model");
  if (a >= m.num_actions()) throw ContractViolation("action index out of range");
  double r = 0.0;
  for (std::size_t s = 0; s < b.size(); ++s) r += b[s] * m.reward(s, a);
  return r;
}

std::optional<std::size_t> BeliefGrid::find(const BeliefState& b) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() == b.size() && points[i].distance(b) <= kBeliefMatchTolerance) return i;
  }
  return std::nullopt;
}

BeliefGrid reachable_closure(const TabularPomdp& m, const BeliefState& start, int depth) {
  if (depth < 0) throw ContractViolation("closure depth must be >= 0");
  if (start.size() != m.num_states()) throw ContractViolation("belief size does not match model");
  BeliefGrid grid;
  grid.kind = GridKind::closure;
  grid.points.push_back(start);
  std::deque<std::pair<std::size_t, int>> frontier{{0, 0}};
  while (!frontier.empty()) {
    const auto [index, level] = frontier.front();
    frontier.pop_front();
    if (level == depth) continue;
    const BeliefState b = grid.points[index];
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
      for (std::size_t o = 0; o < m.num_observations(); ++o) {
        if (!(observation_prob(m, b, a, o) > 0.0)) continue;
        BeliefState next = belief_update(m, b, a, o);
        if (grid.find(next)) continue;
        grid.points.push_back(std::move(next));
        frontier.emplace_back(grid.points.size() - 1, level + 1);
      }
    }
  }
  return grid;
}

BeliefGrid simplex_grid(std::size_t states, int resolution) {
  if (states == 0) throw ContractViolation("simplex grid needs at least one state");
  if (resolution < 1) throw ContractViolation("simplex resolution must be >= 1");
  BeliefGrid grid;
  grid.kind = GridKind::simplex;
  grid.resolution = resolution;
  std::vector<int> counts(states, 0);
  // Enumerate compositions of `resolution` into `states` parts, lexicographic.
  auto emit = [&](auto&& self, std::size_t i, int remaining) -> void {
    if (i + 1 == states) {
      counts[i] = remaining;
      std::vector<double> p(states);
      for (std::size_t k = 0; k < states; ++k) p[k] = double(counts[k]) / resolution;
      // Exact rationals k/M can miss unit sum by an ulp; fold the residue into
      // the largest entry.
      const double sum = std::accumulate(p.begin(), p.end(), 0.0);
      *std::max_element(p.begin(), p.end()) += 1.0 - sum;
      grid.points.emplace_back(std::move(p));
      return;
    }
    for (int c = remaining; c >= 0; --c) {
      counts[i] = c;
      self(self, i + 1, remaining - c);
    }
  };
  emit(emit, 0, resolution);
  return grid;
}

std::vector<std::pair<std::size_t, double>> simplex_interpolation(const BeliefGrid& grid,
                                                                  const BeliefState& b) {
  if (grid.kind != GridKind::simplex) {
    throw ContractViolation("interpolation requires a simplex grid");
  }
  const std::size_t n = b.size();
  const int res = grid.resolution;
  if (n == 1) return {{0, 1.0}};

  // Freudenthal triangulation in cumulative coordinates x_i = M sum_{j>=i} b_j.
  std::vector<double> x(n);
  double tail = 0.0;
  for (std::size_t i = n; i-- > 1;) {
    tail += b[i];
    x[i] = std::clamp(res * tail, 0.0, double(res));
  }
  x[0] = res;
  std::vector<int> base(n);
  std::vector<double> frac(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    base[i] = std::min(static_cast<int>(std::floor(x[i])), res);
    frac[i] = x[i] - base[i];
  }
  std::vector<std::size_t> order(n - 1);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return frac[i] > frac[j]; });

  // Vertex lookup by integer composition.
  auto vertex_index = [&](const std::vector<int>& cumulative) -> std::size_t {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int next = i + 1 < n ? cumulative[i + 1] : 0;
      p[i] = double(cumulative[i] - next) / res;
    }
    double sum = std::accumulate(p.begin(), p.end(), 0.0);
    *std::max_element(p.begin(), p.end()) += 1.0 - sum;
    const auto found = grid.find(BeliefState(std::move(p)));
    if (!found) throw UnreachableBelief("interpolation vertex missing from simplex grid");
    return *found;
  };

  std::vector<std::pair<std::size_t, double>> weights;
  std::vector<int> vertex = base;
  double used = 0.0;
  std::vector<double> lambda(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double next = k + 2 < n ? frac[order[k + 1]] : 0.0;
    lambda[k + 1] = frac[order[k]] - next;
    used += lambda[k + 1];
  }
  lambda[0] = 1.0 - used;
  if (lambda[0] > 0.0) weights.emplace_back(vertex_index(vertex), lambda[0]);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    vertex[order[k]] += 1;
    if (lambda[k + 1] > 0.0) weights.emplace_back(vertex_index(vertex), lambda[k + 1]);
  }
  return weights;
}

BeliefValueTable::BeliefValueTable(BeliefGrid grid, std::vector<std::optional<double>> values,
                                   int sweeps)
    : grid_(std::move(grid)), values_(std::move(values)), sweeps_(sweeps) {
  if (grid_.points.empty()) throw ContractViolation("value table needs a non-empty grid");
  if (values_.size() != grid_.points.size()) {
    throw ContractViolation("value count does not match grid size");
  }
}

double BeliefValueTable::value(const BeliefState& b) const {
  if (sweeps_ == 0) return 0.0;
  if (const auto index = grid_.find(b)) {
    if (!values_[*index]) {
      throw UnreachableBelief("value at grid point " + std::to_string(*index) +
                              " depends on beliefs outside the closure");
    }
    return *values_[*index];
  }
  if (grid_.kind != GridKind::simplex) {
    throw UnreachableBelief("belief is not on the closure grid and interpolation is disabled");
  }
  double v = 0.0;
  for (const auto& [index, w] : simplex_interpolation(grid_, b)) {
    if (!values_[index]) throw UnreachableBelief("interpolation vertex has no value");
    v += w * *values_[index];
  }
  return v;
}

namespace {

// One (belief, action, observation) branch of the backup with its successor
// resolved to grid weights. An empty weight list marks an off-grid successor.
struct Branch {
  double probability = 0.0;
  std::vector<std::pair<std::size_t, double>> successor;
};

struct ActionBackup {
  double reward = 0.0;
  std::vector<Branch> branches;
};

}  // namespace

BeliefValueTable value_iteration(const TabularPomdp& m, const BeliefGrid& grid, int sweeps) {
  if (sweeps < 0) throw ContractViolation("sweep count must be >= 0");
  if (grid.points.empty()) throw ContractViolation("value iteration needs a non-empty grid");
  const std::size_t n = grid.points.size();
  const double gamma = m.discount();

  std::vector<std::vector<ActionBackup>> backups(n);
  for (std::size_t i = 0; i < n; ++i) {
    const BeliefState& b = grid.points[i];
    backups[i].resize(m.num_actions());
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
      ActionBackup& backup = backups[i][a];
      backup.reward = belief_reward(m, b, a);
      if (gamma == 0.0) continue;
      for (std::size_t o = 0; o < m.num_observations(); ++o) {
        const double p = observation_prob(m, b, a, o);
        if (!(p > 0.0)) continue;
        Branch branch;
        branch.probability = p;
        const BeliefState next = belief_update(m, b, a, o);
        if (const auto hit = grid.find(next)) {
          branch.successor = {{*hit, 1.0}};
        } else if (grid.kind == GridKind::simplex) {
          branch.successor = simplex_interpolation(grid, next);
        }
        backup.branches.push_back(std::move(branch));
      }
    }
  }

  std::vector<std::optional<double>> values(n, 0.0);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    std::vector<std::optional<double>> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::optional<double> best;
      bool defined = true;
      for (const ActionBackup& backup : backups[i]) {
        double future = 0.0;
        for (const Branch& branch : backup.branches) {
          if (sweep == 0) break;  // V_0 = 0 everywhere, on or off the grid.
          if (branch.successor.empty()) {
            defined = false;
            break;
          }
          double v = 0.0;
          for (const auto& [index, w] : branch.successor) {
            if (!values[index]) {
              defined = false;
              break;
            }
            v += w * *values[index];
          }
          if (!defined) break;
          future += branch.probability * v;
        }
        if (!defined) break;
        const double q = backup.reward + gamma * future;
        if (!best || q > *best) best = q;
      }
      if (defined) next[i] = best;
    }
    values = std::move(next);
  }
  return BeliefValueTable(grid, std::move(values), sweeps);
}

double belief_q(const TabularPomdp& m, const BeliefState& b, std::size_t a,
                const BeliefValueTable& v) {
  double q = belief_reward(m, b, a);
  if (m.discount() == 0.0) return q;
  double future = 0.0;
  for (std::size_t o = 0; o < m.num_observations(); ++o) {
    const double p = observation_prob(m, b, a, o);
    if (!(p > 0.0)) continue;
    future += p * v.value(belief_update(m, b, a, o));
  }
  return q + m.discount() * future;
}

std::size_t greedy_policy(const TabularPomdp& m, const BeliefState& b, const BeliefValueTable& v) {
  std::size_t best_action = 0;
  double best = belief_q(m, b, 0, v);
  for (std::size_t a = 1; a < m.num_actions(); ++a) {
    const double q = belief_q(m, b, a, v);
    if (q > best) {
      best = q;
      best_action = a;
    }
  }
  return best_action;
}

}  // namespace tddm::pomdp
