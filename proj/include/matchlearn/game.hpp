#pragma once

// Two-player zero-sum matrix games: minimax value and strategies via linear
// programming, pure best responses, and a support-enumeration oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matchlearn/errors.hpp"
#include "matchlearn/lp.hpp"
#include "matchlearn/matrix.hpp"

namespace matchlearn {

/// Row player's utilities A(i, j) of a zero-sum game; the column player
/// receives -A(i, j). At least one action per side, all entries finite.
class PayoffMatrix {
 public:
  PayoffMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
      : PayoffMatrix(Matrix(rows, cols, std::move(entries))) {}

  explicit PayoffMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() == 0 || entries_.cols() == 0) {
      throw DimensionError("payoff matrix needs at least one action per side");
    }
    if (!entries_.all_finite()) throw InputError("payoff matrix has non-finite entries");
  }

  PayoffMatrix(std::initializer_list<std::initializer_list<double>> rows)
      : PayoffMatrix(Matrix(rows)) {}

  std::size_t rows() const noexcept { return entries_.rows(); }
  std::size_t cols() const noexcept { return entries_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  const Matrix& matrix() const noexcept { return entries_; }

  /// The same game seen by the column player: -A^T.
  PayoffMatrix opponent_view() const {
    Matrix t = entries_.transposed();
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (double& v : t.row(i)) v = -v;
    return PayoffMatrix(std::move(t));
  }

  PayoffMatrix shifted(double c) const {
    Matrix s = entries_;
    for (std::size_t i = 0; i < s.rows(); ++i)
      for (double& v : s.row(i)) v += c;
    return PayoffMatrix(std::move(s));
  }

  friend bool operator==(const PayoffMatrix&, const PayoffMatrix&) = default;

 private:
  Matrix entries_;
};

/// Probability distribution over an action set.
class MixedStrategy {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit MixedStrategy(std::vector<double> probabilities)
      : probabilities_(std::move(probabilities)) {
    if (probabilities_.empty()) throw DimensionError("empty mixed strategy");
    double sum = 0.0;
    for (double p : probabilities_) {
      if (!std::isfinite(p) || p < 0.0) {
        throw InputError("mixed strategy has a negative or non-finite component");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw InputError("mixed strategy sums to " + std::to_string(sum));
    }
  }

  MixedStrategy(std::initializer_list<double> probabilities)
      : MixedStrategy(std::vector<double>(probabilities)) {}

  static MixedStrategy pure(std::size_t actions, std::size_t index) {
    std::vector<double> p(actions, 0.0);
    p.at(index) = 1.0;
    return MixedStrategy(std::move(p));
  }

  static MixedStrategy uniform(std::size_t actions) {
    return MixedStrategy(std::vector<double>(actions, 1.0 / static_cast<double>(actions)));
  }

  /// Clamps round-off negatives to zero and rescales to unit mass.
  static MixedStrategy normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double& w : weights) {
      if (w < 0.0) w = 0.0;
      sum += w;
    }
    if (!(sum > 0.0)) throw InputError("cannot normalize a zero weight vector");
    for (double& w : weights) w /= sum;
    return MixedStrategy(std::move(weights));
  }

  std::size_t size() const noexcept { return probabilities_.size(); }
  double operator[](std::size_t i) const { return probabilities_[i]; }
  std::span<const double> probabilities() const noexcept { return probabilities_; }

  friend bool operator==(const MixedStrategy&, const MixedStrategy&) = default;

 private:
  std::vector<double> probabilities_;
};

struct GameSolution {
  double value;
  MixedStrategy row_strategy;
  MixedStrategy column_strategy;
};

/// x^T A y.
inline double expected_payoff(const PayoffMatrix& game, const MixedStrategy& row,
                              const MixedStrategy& column) {
  if (row.size() != game.rows() || column.size() != game.cols()) {
    throw DimensionError("strategy sizes do not match the game");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < game.rows(); ++i) {
    if (row[i] == 0.0) continue;
    double inner = 0.0;
    for (std::size_t j = 0; j < game.cols(); ++j) inner += game(i, j) * column[j];
    total += row[i] * inner;
  }
  return total;
}

/// Payoff of each pure row against `column`: A y.
inline std::vector<double> row_payoffs(const PayoffMatrix& game, const MixedStrategy& column) {
  if (column.size() != game.cols()) {
    throw DimensionError("opponent strategy has " + std::to_string(column.size()) +
                         " actions, game has " + std::to_string(game.cols()) + " columns");
  }
  std::vector<double> out(game.rows(), 0.0);
  for (std::size_t i = 0; i < game.rows(); ++i)
    for (std::size_t j = 0; j < game.cols(); ++j) out[i] += game(i, j) * column[j];
  return out;
}

/// Payoff of `row` against each pure column: x^T A.
inline std::vector<double> column_payoffs(const PayoffMatrix& game, const MixedStrategy& row) {
  if (row.size() != game.rows()) throw DimensionError("row strategy size mismatch");
  std::vector<double> out(game.cols(), 0.0);
  for (std::size_t i = 0; i < game.rows(); ++i)
    for (std::size_t j = 0; j < game.cols(); ++j) out[j] += row[i] * game(i, j);
  return out;
}

namespace detail {

struct MaximinResult {
  double value;
  MixedStrategy strategy;
};

// maximize v  s.t.  sum_i x_i A(i, j) >= v  for all j,  sum_i x_i = 1,  x >= 0.
inline MaximinResult maximin_lp(const PayoffMatrix& game) {
  const std::size_t m = game.rows();
  const std::size_t k = game.cols();
  LinearProgram lp;
  lp.objective.assign(m + 1, 0.0);
  lp.objective[m] = -1.0;
  lp.variable_lower_bounds.assign(m + 1, VariableBound::NonNegative);
  lp.variable_lower_bounds[m] = VariableBound::Free;
  lp.constraint_matrix = Matrix(k + 1, m + 1);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < m; ++i) lp.constraint_matrix(j, i) = game(i, j);
    lp.constraint_matrix(j, m) = -1.0;
    lp.constraint_rhs.push_back(0.0);
    lp.constraint_kinds.push_back(Relation::GreaterEqual);
  }
  for (std::size_t i = 0; i < m; ++i) lp.constraint_matrix(k, i) = 1.0;
  lp.constraint_rhs.push_back(1.0);
  lp.constraint_kinds.push_back(Relation::Equal);

  const LpSolution s = solve_lp(lp);
  if (s.status != LpStatus::Optimal) {
    throw std::logic_error("maximin LP is always feasible and bounded");
  }
  std::vector<double> x(s.primal.begin(), s.primal.begin() + static_cast<std::ptrdiff_t>(m));
  return {s.primal[m], MixedStrategy::normalized(std::move(x))};
}

}  // namespace detail

/// Game value with a maximin row strategy and a minimax column strategy.
///
/// Games with a single row or a single column are solved in closed form, so
/// their value is exact (it equals an entry of the matrix).
inline GameSolution solve_game(const PayoffMatrix& game) {
  const std::size_t m = game.rows();
  const std::size_t k = game.cols();
  if (m == 1 || k == 1) {
    // One side has a single action; the other picks its best entry, lowest
    // index on ties.
    if (m == 1) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (game(0, j) < game(0, best)) best = j;
      return {game(0, best), MixedStrategy::pure(1, 0), MixedStrategy::pure(k, best)};
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (game(i, 0) > game(best, 0)) best = i;
    return {game(best, 0), MixedStrategy::pure(m, best), MixedStrategy::pure(1, 0)};
  }
  auto row = detail::maximin_lp(game);
  auto column = detail::maximin_lp(game.opponent_view());
  return {row.value, std::move(row.strategy), std::move(column.strategy)};
}

inline double game_value(const PayoffMatrix& game) { return solve_game(game).value; }

struct MaximinSolution {
  double value;
  MixedStrategy strategy;
};

/// Value and maximin row strategy only; same results as solve_game at half
/// the work.
inline MaximinSolution maximin(const PayoffMatrix& game) {
  if (game.rows() == 1 || game.cols() == 1) {
    auto s = solve_game(game);
    return {s.value, std::move(s.row_strategy)};
  }
  auto row = detail::maximin_lp(game);
  return {row.value, std::move(row.strategy)};
}

/// Pure best response of the row player against `opponent`; ties within
/// 1e-12 go to the lowest index.
inline MixedStrategy best_response(const PayoffMatrix& game, const MixedStrategy& opponent) {
  const std::vector<double> payoffs = row_payoffs(game, opponent);
  const double best = *std::max_element(payoffs.begin(), payoffs.end());
  std::size_t index = 0;
  while (payoffs[index] < best - lp_tolerance::kZero) ++index;
  return MixedStrategy::pure(game.rows(), index);
}

namespace detail {

// Dense Gaussian elimination with partial pivoting; nullopt when singular.
inline std::optional<std::vector<double>> solve_square(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    if (std::abs(a(pivot, col)) < 1e-11) return std::nullopt;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(pivot, c), a(col, c));
      std::swap(b[pivot], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a(i, c) * x[c];
    x[i] = acc / a(i, i);
  }
  return x;
}

// Strategy over `support` (indices into the rows of `game`) equalizing the
// payoff against every column in `against`, plus the common payoff.
inline std::optional<std::pair<std::vector<double>, double>> equalizer(
    const PayoffMatrix& game, const std::vector<std::size_t>& support,
    const std::vector<std::size_t>& against) {
  const std::size_t s = support.size();
  Matrix a(s + 1, s + 1);
  std::vector<double> b(s + 1, 0.0);
  for (std::size_t r = 0; r < s; ++r) {
    for (std::size_t c = 0; c < s; ++c) a(r, c) = game(support[c], against[r]);
    a(r, s) = -1.0;
  }
  for (std::size_t c = 0; c < s; ++c) a(s, c) = 1.0;
  b[s] = 1.0;
  auto x = solve_square(std::move(a), std::move(b));
  if (!x) return std::nullopt;
  const double v = x->back();
  x->pop_back();
  return std::make_pair(std::move(*x), v);
}

template <typename Visit>
bool for_each_subset(std::size_t n, std::size_t size, Visit&& visit) {
  std::vector<std::size_t> pick(size);
  std::iota(pick.begin(), pick.end(), 0);
  while (true) {
    if (visit(pick)) return true;
    std::size_t i = size;
    while (i > 0 && pick[i - 1] == n - size + i - 1) --i;
    if (i == 0) return false;
    ++pick[i - 1];
    for (std::size_t j = i; j < size; ++j) pick[j] = pick[j - 1] + 1;
  }
}

}  // namespace detail

/// Exact game solution by enumerating equal-size support pairs (square
/// kernels). The game is shifted to strictly positive entries first, so the
/// value is non-zero and some nonsingular square kernel carries an extreme
/// equilibrium. Independent of the LP route; limited to 5x5.
inline GameSolution oracle_solve_game(const PayoffMatrix& game) {
  const std::size_t m = game.rows();
  const std::size_t k = game.cols();
  if (m > 5 || k > 5) throw SizeError("oracle_solve_game supports at most 5x5 games");
  double lowest = game(0, 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) lowest = std::min(lowest, game(i, j));
  const double shift = 1.0 - lowest;
  const PayoffMatrix positive = game.shifted(shift);
  const PayoffMatrix mirrored = positive.opponent_view();
  constexpr double tol = 1e-9;

  std::optional<GameSolution> found;
  for (std::size_t s = 1; s <= std::min(m, k) && !found; ++s) {
    detail::for_each_subset(m, s, [&](const std::vector<std::size_t>& rows) {
      return detail::for_each_subset(k, s, [&](const std::vector<std::size_t>& cols) {
        auto x = detail::equalizer(positive, rows, cols);
        auto y = detail::equalizer(mirrored, cols, rows);
        if (!x || !y) return false;
        const double v = x->second;
        if (std::abs(v + y->second) > tol) return false;
        std::vector<double> row_full(m, 0.0);
        std::vector<double> col_full(k, 0.0);
        for (std::size_t t = 0; t < s; ++t) {
          if (x->first[t] < -tol || y->first[t] < -tol) return false;
          row_full[rows[t]] = x->first[t];
          col_full[cols[t]] = y->first[t];
        }
        for (std::size_t j = 0; j < k; ++j) {
          double payoff = 0.0;
          for (std::size_t i = 0; i < m; ++i) payoff += row_full[i] * positive(i, j);
          if (payoff < v - tol) return false;
        }
        for (std::size_t i = 0; i < m; ++i) {
          double payoff = 0.0;
          for (std::size_t j = 0; j < k; ++j) payoff += positive(i, j) * col_full[j];
          if (payoff > v + tol) return false;
        }
        found = GameSolution{v - shift, MixedStrategy::normalized(std::move(row_full)),
                             MixedStrategy::normalized(std::move(col_full))};
        return true;
      });
    });
  }
  if (!found) throw std::logic_error("support enumeration found no equilibrium");
  return *found;
}

}  // namespace matchlearn
