#pragma once

// Dense two-phase primal simplex for small linear programs.
//
//   minimize    c^T x
//   subject to  A_i x (<=|=|>=) b_i     for every row i
//               x_j >= 0                unless variable j is free
//
// Bland's rule (lowest eligible index for both entering and leaving
// variables) guarantees termination on degenerate problems.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "matchlearn/errors.hpp"
#include "matchlearn/matrix.hpp"

namespace matchlearn {

enum class Relation { LessEqual, Equal, GreaterEqual };

enum class VariableBound { NonNegative, Free };

struct LinearProgram {
  std::vector<double> objective;  // minimized
  Matrix constraint_matrix;       // r x n
  std::vector<double> constraint_rhs;
  std::vector<Relation> constraint_kinds;
  std::vector<VariableBound> variable_lower_bounds;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> primal;  // empty unless Optimal
  double objective_value = std::numeric_limits<double>::quiet_NaN();
};

namespace lp_tolerance {
inline constexpr double kPivot = 1e-9;
inline constexpr double kZero = 1e-12;
}  // namespace lp_tolerance

namespace detail {

/// (rows + 1) x (cols + 1) simplex tableau. The last row holds reduced costs,
/// the last column holds the right-hand side.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), cells_(rows + 1, cols + 1) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& at(std::size_t r, std::size_t c) { return cells_(r, c); }
  double at(std::size_t r, std::size_t c) const { return cells_(r, c); }
  double& rhs(std::size_t r) { return cells_(r, cols_); }
  double rhs(std::size_t r) const { return cells_(r, cols_); }
  double& cost(std::size_t c) { return cells_(rows_, c); }

  void pivot(std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / cells_(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) cells_(pr, c) *= inv;
    cells_(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double factor = cells_(r, pc);
      if (factor == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) {
        double v = cells_(r, c) - factor * cells_(pr, c);
        if (std::abs(v) < lp_tolerance::kZero) v = 0.0;
        cells_(r, c) = v;
      }
      cells_(r, pc) = 0.0;
    }
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  Matrix cells_;
};

/// Loads `costs` into the objective row as reduced costs w.r.t. `basis`.
inline void load_costs(Tableau& t, const std::vector<std::size_t>& basis,
                       const std::vector<double>& costs) {
  double objective = 0.0;
  for (std::size_t c = 0; c < t.cols(); ++c) t.cost(c) = costs[c];
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double cb = costs[basis[r]];
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c < t.cols(); ++c) t.cost(c) -= cb * t.at(r, c);
    objective += cb * t.rhs(r);
  }
  t.at(t.rows(), t.cols()) = -objective;
}

enum class PhaseOutcome { Optimal, Unbounded };

inline PhaseOutcome run_simplex(Tableau& t, std::vector<std::size_t>& basis,
                                const std::vector<bool>& eligible) {
  // Bland's rule terminates; the cap only guards against numerical chatter.
  const std::size_t max_iterations = 50'000 + 100 * (t.rows() + t.cols());
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    std::size_t entering = t.cols();
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (eligible[c] && t.at(t.rows(), c) < -lp_tolerance::kPivot) {
        entering = c;
        break;
      }
    }
    if (entering == t.cols()) return PhaseOutcome::Optimal;

    std::size_t leaving = t.rows();
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, entering);
      if (a <= lp_tolerance::kPivot) continue;
      const double ratio = t.rhs(r) / a;
      if (leaving == t.rows() || ratio < best_ratio - lp_tolerance::kZero ||
          (ratio <= best_ratio + lp_tolerance::kZero &&
           basis[r] < basis[leaving])) {
        if (ratio < best_ratio) best_ratio = ratio;
        leaving = r;
      }
    }
    if (leaving == t.rows()) return PhaseOutcome::Unbounded;
    t.pivot(leaving, entering);
    basis[leaving] = entering;
  }
  throw std::logic_error("simplex iteration limit exceeded");
}

inline void validate(const LinearProgram& lp) {
  const std::size_t n = lp.objective.size();
  const std::size_t r = lp.constraint_rhs.size();
  if (lp.constraint_matrix.rows() != r || lp.constraint_kinds.size() != r) {
    throw DimensionError("linear program has " + std::to_string(r) +
                         " right-hand sides but a " +
                         std::to_string(lp.constraint_matrix.rows()) +
                         "-row matrix and " +
                         std::to_string(lp.constraint_kinds.size()) +
                         " relations");
  }
  if (r > 0 && lp.constraint_matrix.cols() != n) {
    throw DimensionError("constraint matrix has " +
                         std::to_string(lp.constraint_matrix.cols()) +
                         " columns, objective has " + std::to_string(n));
  }
  if (lp.variable_lower_bounds.size() != n) {
    throw DimensionError("expected one lower bound per variable");
  }
  for (double v : lp.objective)
    if (!std::isfinite(v)) throw InputError("non-finite objective coefficient");
  for (double v : lp.constraint_rhs)
    if (!std::isfinite(v)) throw InputError("non-finite right-hand side");
  if (!lp.constraint_matrix.all_finite())
    throw InputError("non-finite constraint coefficient");
}

}  // namespace detail

/// Solves `lp` exactly up to floating-point tolerance. Pure and
/// deterministic: identical input gives bit-identical output.
inline LpSolution solve_lp(const LinearProgram& lp) {
  detail::validate(lp);
  const std::size_t n = lp.objective.size();
  const std::size_t rows = lp.constraint_rhs.size();

  // Structural columns: one per variable, plus a negative part per free one.
  std::vector<std::size_t> negative_column(n, 0);
  std::size_t structural = n;
  for (std::size_t j = 0; j < n; ++j) {
    if (lp.variable_lower_bounds[j] == VariableBound::Free) {
      negative_column[j] = structural++;
    }
  }

  // Normalize every row to a non-negative right-hand side.
  std::vector<double> sign(rows, 1.0);
  std::vector<Relation> kind(lp.constraint_kinds);
  for (std::size_t i = 0; i < rows; ++i) {
    if (lp.constraint_rhs[i] < 0.0) {
      sign[i] = -1.0;
      if (kind[i] == Relation::LessEqual) {
        kind[i] = Relation::GreaterEqual;
      } else if (kind[i] == Relation::GreaterEqual) {
        kind[i] = Relation::LessEqual;
      }
    }
  }

  std::size_t slack_count = 0;
  std::size_t artificial_count = 0;
  for (Relation k : kind) {
    if (k != Relation::Equal) ++slack_count;
    if (k != Relation::LessEqual) ++artificial_count;
  }
  const std::size_t first_slack = structural;
  const std::size_t first_artificial = structural + slack_count;
  const std::size_t total_cols = first_artificial + artificial_count;

  detail::Tableau t(rows, total_cols);
  std::vector<std::size_t> basis(rows, 0);
  std::size_t next_slack = first_slack;
  std::size_t next_artificial = first_artificial;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = sign[i] * lp.constraint_matrix(i, j);
      t.at(i, j) = a;
      if (lp.variable_lower_bounds[j] == VariableBound::Free) {
        t.at(i, negative_column[j]) = -a;
      }
    }
    t.rhs(i) = sign[i] * lp.constraint_rhs[i];
    switch (kind[i]) {
      case Relation::LessEqual:
        t.at(i, next_slack) = 1.0;
        basis[i] = next_slack++;
        break;
      case Relation::GreaterEqual:
        t.at(i, next_slack++) = -1.0;
        t.at(i, next_artificial) = 1.0;
        basis[i] = next_artificial++;
        break;
      case Relation::Equal:
        t.at(i, next_artificial) = 1.0;
        basis[i] = next_artificial++;
        break;
    }
  }

  LpSolution solution;

  // Phase 1: drive the artificial variables to zero.
  if (artificial_count > 0) {
    std::vector<double> phase1_costs(total_cols, 0.0);
    for (std::size_t c = first_artificial; c < total_cols; ++c) phase1_costs[c] = 1.0;
    detail::load_costs(t, basis, phase1_costs);
    std::vector<bool> eligible(total_cols, true);
    detail::run_simplex(t, basis, eligible);
    double infeasibility = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (basis[r] >= first_artificial) infeasibility += t.rhs(r);
    }
    if (infeasibility > lp_tolerance::kPivot) {
      solution.status = LpStatus::Infeasible;
      return solution;
    }
    // Pivot degenerate artificials out of the basis; rows where that is
    // impossible are redundant and stay inert.
    for (std::size_t r = 0; r < rows; ++r) {
      if (basis[r] < first_artificial) continue;
      for (std::size_t c = 0; c < first_artificial; ++c) {
        if (std::abs(t.at(r, c)) > lp_tolerance::kPivot) {
          t.pivot(r, c);
          basis[r] = c;
          break;
        }
      }
    }
  }

  // Phase 2: the real objective over non-artificial columns.
  std::vector<double> costs(total_cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    costs[j] = lp.objective[j];
    if (lp.variable_lower_bounds[j] == VariableBound::Free) {
      costs[negative_column[j]] = -lp.objective[j];
    }
  }
  detail::load_costs(t, basis, costs);
  std::vector<bool> eligible(total_cols, false);
  for (std::size_t c = 0; c < first_artificial; ++c) eligible[c] = true;
  if (detail::run_simplex(t, basis, eligible) == detail::PhaseOutcome::Unbounded) {
    solution.status = LpStatus::Unbounded;
    return solution;
  }

  std::vector<double> column_value(total_cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) column_value[basis[r]] = t.rhs(r);
  solution.primal.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double v = column_value[j];
    if (lp.variable_lower_bounds[j] == VariableBound::Free) {
      v -= column_value[negative_column[j]];
    }
    if (std::abs(v) < lp_tolerance::kZero) v = 0.0;
    solution.primal[j] = v;
  }
  double objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) objective += lp.objective[j] * solution.primal[j];
  solution.status = LpStatus::Optimal;
  solution.objective_value = objective;
  return solution;
}

}  // namespace matchlearn
