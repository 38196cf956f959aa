#pragma once

// Matching instability: the minimum total subsidy that turns a (matching,
// strategy profile) pair into an equilibrium, and its single-action special
// case, subset instability.
//
// The program minimizes sum(s) subject to
//   blocking:    s_p >= V_pa - U_p  or  s_a >= V_ap - U_a  for every cross pair
//   rationality: s_x >= U_x_outside - U_x
//   nash:        s_x >= V_x,m(x) - U_x          (matched agents only)
//   s_x >= 0.
// Unmatched agents hold utility U_x_outside. The last three constraints give a
// per-agent floor; the blocking disjunctions are resolved exactly by searching
// over per-agent thresholds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "matchlearn/errors.hpp"
#include "matchlearn/game.hpp"
#include "matchlearn/market.hpp"
#include "matchlearn/matrix.hpp"

namespace matchlearn {

/// Feasibility tolerance for every instability constraint.
inline constexpr double kInstabilityTolerance = 1e-9;

enum class BindingConstraint { None, IndividualRationality, NashRationality, BlockingCover };

struct SubsidyVector {
  std::vector<double> left;
  std::vector<double> right;
  double total = 0.0;
};

/// A cross pair whose blocking constraint is not met by the floors alone.
struct ActivePair {
  std::size_t left = 0;
  std::size_t right = 0;
  double left_gap = 0.0;
  double right_gap = 0.0;
  Side covered_by = Side::Left;
};

struct InstabilityReport {
  double value = 0.0;  // == subsidies.total
  SubsidyVector subsidies;
  std::vector<ActivePair> active_pairs;
  std::vector<BindingConstraint> left_binding;
  std::vector<BindingConstraint> right_binding;
};

namespace detail {

struct AgentFloor {
  double value = 0.0;
  BindingConstraint reason = BindingConstraint::None;
};

/// Floor from the rationality term and, for matched agents, the nash term.
/// Requirements within tolerance of zero are treated as met.
inline AgentFloor make_floor(double rationality, std::optional<double> nash) {
  AgentFloor floor;
  if (rationality > floor.value) {
    floor = {rationality, BindingConstraint::IndividualRationality};
  }
  if (nash && *nash > floor.value) floor = {*nash, BindingConstraint::NashRationality};
  if (floor.value <= kInstabilityTolerance) floor = {};
  return floor;
}

/// Per-agent floors plus blocking gaps indexed (left, right):
/// left_gap(p, a) = V_pa - U_p and right_gap(p, a) = V_ap - U_a.
struct CoverProblem {
  std::vector<AgentFloor> left_floor;
  std::vector<AgentFloor> right_floor;
  Matrix left_gap;
  Matrix right_gap;
};

/// One connected group of active pairs seen from the side being enumerated.
/// The other side's subsidies follow from the chosen thresholds.
class ComponentSearch {
 public:
  struct Edge {
    std::size_t other = 0;
    double chosen_gap = 0.0;
    double other_gap = 0.0;
  };

  ComponentSearch(std::vector<std::vector<double>> candidates,
                  std::vector<std::vector<Edge>> edges, std::vector<double> other_floor)
      : candidates_(std::move(candidates)),
        edges_(std::move(edges)),
        other_floor_(std::move(other_floor)),
        current_(candidates_.size()) {}

  void run() {
    floor_suffix_.assign(candidates_.size() + 1, 0.0);
    for (std::size_t i = candidates_.size(); i-- > 0;)
      floor_suffix_[i] = floor_suffix_[i + 1] + candidates_[i].front();
    search(0, 0.0, other_floor_);
  }

  const std::vector<double>& chosen() const noexcept { return best_chosen_; }
  const std::vector<double>& other() const noexcept { return best_other_; }

 private:
  void search(std::size_t depth, double partial, const std::vector<double>& other) {
    const double other_sum = std::accumulate(other.begin(), other.end(), 0.0);
    if (partial + floor_suffix_[depth] + other_sum >= best_) return;
    if (depth == candidates_.size()) {
      best_ = partial + other_sum;
      best_chosen_ = current_;
      best_other_ = other;
      return;
    }
    for (double v : candidates_[depth]) {
      std::vector<double> next = other;
      for (const Edge& e : edges_[depth])
        if (v < e.chosen_gap) next[e.other] = std::max(next[e.other], e.other_gap);
      current_[depth] = v;
      search(depth + 1, partial + v, next);
    }
  }

  std::vector<std::vector<double>> candidates_;  // ascending, floor first
  std::vector<std::vector<Edge>> edges_;
  std::vector<double> other_floor_;
  std::vector<double> current_;
  std::vector<double> floor_suffix_;
  double best_ = std::numeric_limits<double>::infinity();
  std::vector<double> best_chosen_;
  std::vector<double> best_other_;
};

inline BindingConstraint binding_of(double subsidy, const AgentFloor& floor) {
  if (subsidy > floor.value) return BindingConstraint::BlockingCover;
  return floor.value > 0.0 ? floor.reason : BindingConstraint::None;
}

inline std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline InstabilityReport solve_cover(const CoverProblem& problem, const Matching& matching) {
  const std::size_t left_n = problem.left_floor.size();
  const std::size_t right_n = problem.right_floor.size();

  InstabilityReport report;
  for (std::size_t p = 0; p < left_n; ++p) {
    for (std::size_t a = 0; a < right_n; ++a) {
      if (matching.is_pair(p, a)) continue;
      const double gl = problem.left_gap(p, a);
      const double gr = problem.right_gap(p, a);
      if (gl > problem.left_floor[p].value + kInstabilityTolerance &&
          gr > problem.right_floor[a].value + kInstabilityTolerance) {
        report.active_pairs.push_back({p, a, gl, gr, Side::Left});
      }
    }
  }

  // Union-find over agents; right agent a is node left_n + a.
  std::vector<std::size_t> parent(left_n + right_n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& ap : report.active_pairs) parent[find(ap.left)] = find(left_n + ap.right);

  std::vector<double> left_s(left_n);
  std::vector<double> right_s(right_n);
  for (std::size_t p = 0; p < left_n; ++p) left_s[p] = problem.left_floor[p].value;
  for (std::size_t a = 0; a < right_n; ++a) right_s[a] = problem.right_floor[a].value;

  std::vector<bool> done(left_n + right_n, false);
  for (const auto& seed : report.active_pairs) {
    const std::size_t root = find(seed.left);
    if (done[root]) continue;
    done[root] = true;

    std::vector<std::size_t> lefts;
    std::vector<std::size_t> rights;
    for (std::size_t p = 0; p < left_n; ++p)
      if (find(p) == root) lefts.push_back(p);
    for (std::size_t a = 0; a < right_n; ++a)
      if (find(left_n + a) == root) rights.push_back(a);

    std::vector<std::vector<double>> left_cand(lefts.size());
    std::vector<std::vector<double>> right_cand(rights.size());
    for (std::size_t i = 0; i < lefts.size(); ++i)
      left_cand[i].push_back(problem.left_floor[lefts[i]].value);
    for (std::size_t j = 0; j < rights.size(); ++j)
      right_cand[j].push_back(problem.right_floor[rights[j]].value);
    std::vector<std::pair<std::size_t, std::size_t>> local_edges;  // (i, j)
    std::vector<const ActivePair*> edge_pairs;
    for (const auto& ap : report.active_pairs) {
      if (find(ap.left) != root) continue;
      const auto i = static_cast<std::size_t>(
          std::find(lefts.begin(), lefts.end(), ap.left) - lefts.begin());
      const auto j = static_cast<std::size_t>(
          std::find(rights.begin(), rights.end(), ap.right) - rights.begin());
      left_cand[i].push_back(ap.left_gap);
      right_cand[j].push_back(ap.right_gap);
      local_edges.emplace_back(i, j);
      edge_pairs.push_back(&ap);
    }
    double left_combos = 1.0;
    double right_combos = 1.0;
    for (auto& c : left_cand) left_combos *= static_cast<double>((c = sorted_unique(c)).size());
    for (auto& c : right_cand) right_combos *= static_cast<double>((c = sorted_unique(c)).size());

    const bool enumerate_left = left_combos <= right_combos;
    const auto& chosen_cand = enumerate_left ? left_cand : right_cand;
    const std::size_t other_n = enumerate_left ? rights.size() : lefts.size();
    std::vector<std::vector<ComponentSearch::Edge>> edges(chosen_cand.size());
    for (std::size_t e = 0; e < local_edges.size(); ++e) {
      const auto [i, j] = local_edges[e];
      const ActivePair& ap = *edge_pairs[e];
      if (enumerate_left) {
        edges[i].push_back({j, ap.left_gap, ap.right_gap});
      } else {
        edges[j].push_back({i, ap.right_gap, ap.left_gap});
      }
    }
    std::vector<double> other_floor(other_n);
    for (std::size_t k = 0; k < other_n; ++k) {
      other_floor[k] = enumerate_left ? problem.right_floor[rights[k]].value
                                      : problem.left_floor[lefts[k]].value;
    }
    ComponentSearch search(chosen_cand, std::move(edges), std::move(other_floor));
    search.run();
    const auto& chosen = search.chosen();
    const auto& other = search.other();
    for (std::size_t i = 0; i < lefts.size(); ++i)
      left_s[lefts[i]] = enumerate_left ? chosen[i] : other[i];
    for (std::size_t j = 0; j < rights.size(); ++j)
      right_s[rights[j]] = enumerate_left ? other[j] : chosen[j];
  }

  for (auto& ap : report.active_pairs)
    ap.covered_by = left_s[ap.left] >= ap.left_gap ? Side::Left : Side::Right;

  report.left_binding.resize(left_n);
  report.right_binding.resize(right_n);
  for (std::size_t p = 0; p < left_n; ++p)
    report.left_binding[p] = binding_of(left_s[p], problem.left_floor[p]);
  for (std::size_t a = 0; a < right_n; ++a)
    report.right_binding[a] = binding_of(right_s[a], problem.right_floor[a]);

  report.subsidies.total = std::accumulate(left_s.begin(), left_s.end(), 0.0) +
                           std::accumulate(right_s.begin(), right_s.end(), 0.0);
  report.subsidies.left = std::move(left_s);
  report.subsidies.right = std::move(right_s);
  report.value = report.subsidies.total;
  return report;
}

}  // namespace detail

/// V*_{p,a} for every pair, from the left agent's view; the right view is the
/// negation.
inline Matrix compute_game_values(const MarketInstance& instance) {
  Matrix values(instance.left_count(), instance.right_count());
  for (std::size_t p = 0; p < instance.left_count(); ++p)
    for (std::size_t a = 0; a < instance.right_count(); ++a)
      values(p, a) = game_value(instance.game(p, a));
  return values;
}

/// Preferences induced by game values: left ranks by V*_{p,a}, right by
/// -V*_{p,a}, each truncated at its outside option.
inline PreferenceProfile value_preferences(const MarketInstance& instance, const Matrix& values) {
  if (values.rows() != instance.left_count() || values.cols() != instance.right_count()) {
    throw DimensionError("value table does not match the instance");
  }
  std::vector<std::vector<double>> left(instance.left_count(),
                                        std::vector<double>(instance.right_count()));
  std::vector<std::vector<double>> right(instance.right_count(),
                                         std::vector<double>(instance.left_count()));
  for (std::size_t p = 0; p < instance.left_count(); ++p) {
    for (std::size_t a = 0; a < instance.right_count(); ++a) {
      left[p][a] = values(p, a);
      right[a][p] = -values(p, a);
    }
  }
  return build_preferences(left, right, instance.left_outside_options(),
                           instance.right_outside_options());
}

/// Realized utilities: matched agents get their expected payoff, unmatched
/// agents their outside option.
struct RealizedUtilities {
  std::vector<double> left;
  std::vector<double> right;
};

inline RealizedUtilities realized_utilities(const MarketInstance& instance,
                                            const Matching& matching,
                                            const StrategyProfile& strategies) {
  validate_profile(instance, matching, strategies);
  RealizedUtilities u;
  u.left = instance.left_outside_options();
  u.right = instance.right_outside_options();
  for (const auto& [p, a] : matching.pairs()) {
    const double value = expected_payoff(instance.game(p, a), *strategies.get({Side::Left, p}),
                                         *strategies.get({Side::Right, a}));
    u.left[p] = value;
    u.right[a] = -value;
  }
  return u;
}

/// Same as below with precomputed game values (from compute_game_values).
inline InstabilityReport matching_instability(const MarketInstance& instance,
                                              const Matching& matching,
                                              const StrategyProfile& strategies,
                                              const Matrix& values) {
  if (values.rows() != instance.left_count() || values.cols() != instance.right_count()) {
    throw DimensionError("game value table does not match the instance");
  }
  const RealizedUtilities u = realized_utilities(instance, matching, strategies);
  detail::CoverProblem problem{{}, {}, Matrix(values.rows(), values.cols()),
                               Matrix(values.rows(), values.cols())};
  for (std::size_t p = 0; p < instance.left_count(); ++p) {
    const auto partner = matching.partner_of_left(p);
    std::optional<double> nash;
    if (partner) nash = values(p, *partner) - u.left[p];
    problem.left_floor.push_back(
        detail::make_floor(instance.outside_option({Side::Left, p}) - u.left[p], nash));
  }
  for (std::size_t a = 0; a < instance.right_count(); ++a) {
    const auto partner = matching.partner_of_right(a);
    std::optional<double> nash;
    if (partner) nash = -values(*partner, a) - u.right[a];
    problem.right_floor.push_back(
        detail::make_floor(instance.outside_option({Side::Right, a}) - u.right[a], nash));
  }
  for (std::size_t p = 0; p < instance.left_count(); ++p) {
    for (std::size_t a = 0; a < instance.right_count(); ++a) {
      problem.left_gap(p, a) = values(p, a) - u.left[p];
      problem.right_gap(p, a) = -values(p, a) - u.right[a];
    }
  }
  return detail::solve_cover(problem, matching);
}

/// Exact matching instability. Strategies must be given for exactly the
/// matched agents.
inline InstabilityReport matching_instability(const MarketInstance& instance,
                                              const Matching& matching,
                                              const StrategyProfile& strategies) {
  return matching_instability(instance, matching, strategies, compute_game_values(instance));
}

/// Exact subset instability of `matching` under fixed utilities.
inline InstabilityReport subset_instability(const UtilityTable& utilities,
                                            const Matching& matching) {
  utilities.validate(matching);
  const std::size_t left_n = utilities.left_count();
  const std::size_t right_n = utilities.right_count();
  detail::CoverProblem problem{{}, {}, Matrix(left_n, right_n), Matrix(left_n, right_n)};
  std::vector<double> left_u(left_n);
  std::vector<double> right_u(right_n);
  for (std::size_t p = 0; p < left_n; ++p) {
    left_u[p] = utilities.current(matching, {Side::Left, p});
    problem.left_floor.push_back(
        detail::make_floor(utilities.left_outside[p] - left_u[p], std::nullopt));
  }
  for (std::size_t a = 0; a < right_n; ++a) {
    right_u[a] = utilities.current(matching, {Side::Right, a});
    problem.right_floor.push_back(
        detail::make_floor(utilities.right_outside[a] - right_u[a], std::nullopt));
  }
  for (std::size_t p = 0; p < left_n; ++p) {
    for (std::size_t a = 0; a < right_n; ++a) {
      problem.left_gap(p, a) = utilities.left[p][a] - left_u[p];
      problem.right_gap(p, a) = utilities.right[a][p] - right_u[a];
    }
  }
  return detail::solve_cover(problem, matching);
}

/// Brute-force matching instability for markets with at most 3 agents per
/// side: every combination of per-agent candidate subsidies is checked
/// against the constraints directly.
inline double oracle_mi(const MarketInstance& instance, const Matching& matching,
                        const StrategyProfile& strategies) {
  if (instance.left_count() > 3 || instance.right_count() > 3) {
    throw SizeError("oracle_mi supports at most 3 agents per side");
  }
  validate_profile(instance, matching, strategies);
  const std::size_t left_n = instance.left_count();
  const std::size_t right_n = instance.right_count();
  const std::size_t n = left_n + right_n;
  constexpr double tol = kInstabilityTolerance;

  // Agent k < left_n is left agent k, otherwise right agent k - left_n.
  Matrix v(n, n, 0.0);  // v(x, y): value of x's game against y
  for (std::size_t p = 0; p < left_n; ++p) {
    for (std::size_t a = 0; a < right_n; ++a) {
      const PayoffMatrix& g = instance.game(p, a);
      v(p, left_n + a) = oracle_solve_game(g).value;
      v(left_n + a, p) = oracle_solve_game(g.opponent_view()).value;
    }
  }
  std::vector<double> outside(n);
  std::vector<double> u(n);
  std::vector<std::optional<std::size_t>> partner(n);
  for (std::size_t k = 0; k < n; ++k) {
    const AgentId id = k < left_n ? AgentId{Side::Left, k} : AgentId{Side::Right, k - left_n};
    outside[k] = instance.outside_option(id);
    u[k] = outside[k];
    if (auto m = matching.partner_index(id)) partner[k] = k < left_n ? left_n + *m : *m;
  }
  for (std::size_t p = 0; p < left_n; ++p) {
    if (!partner[p]) continue;
    const std::size_t a = *partner[p] - left_n;
    const PayoffMatrix& g = instance.game(p, a);
    const auto& xp = *strategies.get({Side::Left, p});
    const auto& xa = *strategies.get({Side::Right, a});
    u[p] = expected_payoff(g, xp, xa);
    u[left_n + a] = expected_payoff(g.opponent_view(), xa, xp);
  }

  std::vector<std::vector<double>> candidates(n);
  for (std::size_t k = 0; k < n; ++k) {
    double lower = std::max(0.0, outside[k] - u[k]);
    if (partner[k]) lower = std::max(lower, v(k, *partner[k]) - u[k]);
    candidates[k].push_back(lower);
    const std::size_t first = k < left_n ? left_n : 0;
    const std::size_t last = k < left_n ? n : left_n;
    for (std::size_t o = first; o < last; ++o) {
      const double gap = v(k, o) - u[k];
      if (gap > lower) candidates[k].push_back(gap);
    }
  }

  auto feasible = [&](const std::vector<double>& s) {
    for (std::size_t k = 0; k < n; ++k) {
      if (s[k] < 0.0) return false;
      if (u[k] - outside[k] + s[k] < -tol) return false;
      if (partner[k] && v(k, *partner[k]) - u[k] - s[k] > tol) return false;
    }
    for (std::size_t p = 0; p < left_n; ++p) {
      for (std::size_t k = left_n; k < n; ++k) {
        if (std::min(v(p, k) - u[p] - s[p], v(k, p) - u[k] - s[k]) > tol) return false;
      }
    }
    return true;
  };

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> digit(n, 0);
  std::vector<double> s(n);
  while (true) {
    for (std::size_t k = 0; k < n; ++k) s[k] = candidates[k][digit[k]];
    if (feasible(s)) best = std::min(best, std::accumulate(s.begin(), s.end(), 0.0));
    std::size_t k = 0;
    while (k < n && ++digit[k] == candidates[k].size()) digit[k++] = 0;
    if (k == n) break;
  }
  return best;
}

/// |V* - U| for a market of one left and one right agent matched together.
inline double single_pair_deviation(const MarketInstance& instance,
                                    const StrategyProfile& strategies) {
  if (instance.left_count() != 1 || instance.right_count() != 1) {
    throw InputError("single_pair_deviation needs exactly one agent per side");
  }
  Matching matching(1, 1);
  matching.match(0, 0);
  validate_profile(instance, matching, strategies);
  const PayoffMatrix& g = instance.game(0, 0);
  return std::abs(game_value(g) - expected_payoff(g, *strategies.get({Side::Left, 0}),
                                                  *strategies.get({Side::Right, 0})));
}

}  // namespace matchlearn
