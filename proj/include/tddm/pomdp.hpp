#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tddm/common.hpp"

namespace tddm::pomdp {

/// P(o | a, b) is zero for the requested update.
class ImpossibleObservation : public Error {
 public:
  ImpossibleObservation(std::size_t action, std::size_t observation);
  std::size_t action() const noexcept { return action_; }
  std::size_t observation() const noexcept { return observation_; }

 private:
  std::size_t action_;
  std::size_t observation_;
};

/// A value was requested at a belief the table cannot answer for.
class UnreachableBelief : public Error {
 public:
  explicit UnreachableBelief(const std::string& what) : Error(ErrorCategory::model, what) {}
};

/// Probabilities must sum to one within this tolerance.
inline constexpr double kProbabilityTolerance = 1e-12;
/// Two beliefs closer than this in max-norm are the same grid point.
inline constexpr double kBeliefMatchTolerance = 1e-9;

class BeliefState {
 public:
  BeliefState() = default;
  /// Validates non-negativity and unit sum; throws ContractViolation.
  explicit BeliefState(std::vector<double> probabilities);

  static BeliefState uniform(std::size_t states);
  static BeliefState point(std::size_t states, std::size_t s);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t s) const { return p_[s]; }
  const std::vector<double>& probabilities() const noexcept { return p_; }

  /// Max-norm distance.
  double distance(const BeliefState& other) const;

 private:
  std::vector<double> p_;
};

/// Finite POMDP: transition tau(s,a,s'), observation O(s',a,o), reward r(s,a)
/// and discount gamma in [0,1). Immutable after construction.
class TabularPomdp {
 public:
  struct Tables {
    std::vector<std::string> states;
    std::vector<std::string> actions;
    std::vector<std::string> observations;
    /// transition[a][s][s']
    std::vector<std::vector<std::vector<double>>> transition;
    /// observation[a][s'][o]
    std::vector<std::vector<std::vector<double>>> observation;
    /// reward[s][a]
    std::vector<std::vector<double>> reward;
    double discount = 0.95;
  };

  /// Validates every table; throws ContractViolation describing the first
  /// malformed entry.
  explicit TabularPomdp(Tables tables);

  std::size_t num_states() const noexcept { return t_.states.size(); }
  std::size_t num_actions() const noexcept { return t_.actions.size(); }
  std::size_t num_observations() const noexcept { return t_.observations.size(); }

  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return t_.transition[a][s][next];
  }
  double observation(std::size_t next, std::size_t a, std::size_t o) const {
    return t_.observation[a][next][o];
  }
  double reward(std::size_t s, std::size_t a) const { return t_.reward[s][a]; }
  double discount() const noexcept { return t_.discount; }

  const Tables& tables() const noexcept { return t_; }

  /// Same model with every reward multiplied by `factor`.
  TabularPomdp with_scaled_rewards(double factor) const;

 private:
  Tables t_;
};

/// P(o | a, b) = sum_s' O(s',a,o) sum_s tau(s,a,s') b(s).
double observation_prob(const TabularPomdp& m, const BeliefState& b, std::size_t a,
                        std::size_t o);

/// Bayes posterior tau(b,a,o). Throws ImpossibleObservation when P(o|a,b) = 0.
BeliefState belief_update(const TabularPomdp& m, const BeliefState& b, std::size_t a,
                          std::size_t o);

/// r(b,a) = sum_s b(s) r(s,a).
double belief_reward(const TabularPomdp& m, const BeliefState& b, std::size_t a);

/// One-step push-forward sum_s tau(s,a,s') b(s), before any observation.
std::vector<double> predict(const TabularPomdp& m, const BeliefState& b, std::size_t a);

enum class GridKind {
  /// Beliefs reachable from a start belief; no interpolation.
  closure,
  /// Regular simplex grid with barycentric (Freudenthal) interpolation.
  simplex,
};

struct BeliefGrid {
  GridKind kind = GridKind::closure;
  std::vector<BeliefState> points;
  /// Subdivisions per axis, simplex grids only.
  int resolution = 0;

  /// Index of a grid point within kBeliefMatchTolerance, if any.
  std::optional<std::size_t> find(const BeliefState& b) const;
};

/// Breadth-first closure of `start` under belief_update over all (a, o) with
/// P(o|a,b) > 0, up to `depth` updates. The start belief is point 0.
BeliefGrid reachable_closure(const TabularPomdp& m, const BeliefState& start, int depth);

/// All beliefs k/resolution with integer k summing to resolution.
BeliefGrid simplex_grid(std::size_t states, int resolution);

/// Barycentric weights of `b` over grid vertices of a simplex grid.
std::vector<std::pair<std::size_t, double>> simplex_interpolation(const BeliefGrid& grid,
                                                                  const BeliefState& b);

/// V_n on a belief grid. A point's value is absent when computing it would
/// need V at a belief outside a closure grid; V_0 = 0 is known everywhere.
class BeliefValueTable {
 public:
  BeliefValueTable(BeliefGrid grid, std::vector<std::optional<double>> values, int sweeps);

  const BeliefGrid& grid() const noexcept { return grid_; }
  const std::vector<std::optional<double>>& values() const noexcept { return values_; }
  int sweeps() const noexcept { return sweeps_; }

  /// V(b): grid match, else interpolation on simplex grids. Throws
  /// UnreachableBelief for off-grid beliefs on closure grids and for grid
  /// points without a value.
  double value(const BeliefState& b) const;

 private:
  BeliefGrid grid_;
  std::vector<std::optional<double>> values_;
  int sweeps_;
};

/// `sweeps` synchronous applications of
/// V_{n+1}(b) = max_a [ r(b,a) + gamma sum_o P(o|b,a) V_n(tau(b,a,o)) ]
/// from V_0 = 0.
BeliefValueTable value_iteration(const TabularPomdp& m, const BeliefGrid& grid, int sweeps);

/// r(b,a) + gamma sum_o P(o|b,a) V(tau(b,a,o)).
double belief_q(const TabularPomdp& m, const BeliefState& b, std::size_t a,
                const BeliefValueTable& v);

/// argmax_a belief_q, ties to the lowest action index.
std::size_t greedy_policy(const TabularPomdp& m, const BeliefState& b, const BeliefValueTable& v);

/// Plain-text model description; see README for the grammar. Throws
/// ConfigError with a line number.
struct ModelFile {
  TabularPomdp model;
  std::optional<BeliefState> start;
};
ModelFile parse_model(std::istream& in);
std::string format_model(const TabularPomdp& m);

}  // namespace tddm::pomdp
