#pragma once

// Learning matching equilibria from bandit feedback. Each step the platform
// forms preferences from game values, matches with deferred acceptance, the
// matched pairs play sampled actions and observe one noisy reward, and the
// instability of the chosen (matching, strategies) is recorded.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "matchlearn/errors.hpp"
#include "matchlearn/game.hpp"
#include "matchlearn/instability.hpp"
#include "matchlearn/market.hpp"
#include "matchlearn/matrix.hpp"
#include "matchlearn/rng.hpp"

namespace matchlearn {

/// SelfPlay: both sides act on their own optimistic estimates. The baselines
/// keep the Left side on optimistic estimates and replace the Right side with
/// an agent that knows the true games.
enum class PolicyKind { SelfPlay, NashResponse, BestResponse };

/// Per-pair action counts and empirical means of the left agent's reward.
/// The right agent's empirical view of the same pair is the negated transpose.
class ConfidenceState {
 public:
  ConfidenceState(std::size_t left_count, std::size_t right_count, std::size_t left_actions,
                  std::size_t right_actions, double delta)
      : left_count_(left_count),
        right_count_(right_count),
        left_actions_(left_actions),
        right_actions_(right_actions),
        delta_(delta),
        log_term_(2.0 * std::log(1.0 / delta)),
        counts_(left_count * right_count * left_actions * right_actions, 0),
        means_(counts_.size(), 0.0) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
  }

  std::size_t left_count() const noexcept { return left_count_; }
  std::size_t right_count() const noexcept { return right_count_; }
  std::size_t left_actions() const noexcept { return left_actions_; }
  std::size_t right_actions() const noexcept { return right_actions_; }
  double delta() const noexcept { return delta_; }

  std::uint64_t count(std::size_t left, std::size_t right, std::size_t i, std::size_t j) const {
    return counts_[cell(left, right, i, j)];
  }
  double mean(std::size_t left, std::size_t right, std::size_t i, std::size_t j) const {
    return means_[cell(left, right, i, j)];
  }
  /// sqrt(2 log(1/delta) / max(1, n)).
  double width(std::size_t left, std::size_t right, std::size_t i, std::size_t j) const {
    const double n = static_cast<double>(std::max<std::uint64_t>(1, count(left, right, i, j)));
    return std::sqrt(log_term_ / n);
  }

  /// Records a reward from the left agent's perspective.
  void observe(std::size_t left, std::size_t right, std::size_t i, std::size_t j,
               double reward) {
    const std::size_t c = cell(left, right, i, j);
    ++counts_[c];
    means_[c] += (reward - means_[c]) / static_cast<double>(counts_[c]);
  }

 private:
  std::size_t cell(std::size_t left, std::size_t right, std::size_t i, std::size_t j) const {
    if (left >= left_count_ || right >= right_count_ || i >= left_actions_ ||
        j >= right_actions_) {
      throw DimensionError("confidence state index out of range");
    }
    return ((left * right_count_ + right) * left_actions_ + i) * right_actions_ + j;
  }

  std::size_t left_count_;
  std::size_t right_count_;
  std::size_t left_actions_;
  std::size_t right_actions_;
  double delta_;
  double log_term_;
  std::vector<std::uint64_t> counts_;
  std::vector<double> means_;
};

namespace detail {

// View-oriented mean (negated for the right view) plus sign_width * width.
inline PayoffMatrix estimate_matrix(const ConfidenceState& state, std::size_t left,
                                    std::size_t right, Side view, double sign_width) {
  const std::size_t m = state.left_actions();
  const std::size_t k = state.right_actions();
  if (view == Side::Left) {
    std::vector<double> data(m * k);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < k; ++j)
        data[i * k + j] = state.mean(left, right, i, j) + sign_width * state.width(left, right, i, j);
    return PayoffMatrix(m, k, std::move(data));
  }
  std::vector<double> data(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j)
      data[j * m + i] = -state.mean(left, right, i, j) + sign_width * state.width(left, right, i, j);
  return PayoffMatrix(k, m, std::move(data));
}

}  // namespace detail

/// Upper confidence matrix of pair (left, right) from `view`'s side: the left
/// view is m x k, the right view k x m.
inline PayoffMatrix ucb_matrix(const ConfidenceState& state, std::size_t left,
                               std::size_t right, Side view) {
  return detail::estimate_matrix(state, left, right, view, 1.0);
}

inline PayoffMatrix lcb_matrix(const ConfidenceState& state, std::size_t left,
                               std::size_t right, Side view) {
  return detail::estimate_matrix(state, left, right, view, -1.0);
}

/// Empirical means from `view`'s side, without any width.
inline PayoffMatrix empirical_matrix(const ConfidenceState& state, std::size_t left,
                                     std::size_t right, Side view) {
  return detail::estimate_matrix(state, left, right, view, 0.0);
}

/// 1 / (4 T^2 p^2 a^2 m k).
inline double auto_delta(std::size_t horizon, std::size_t left_count, std::size_t right_count,
                         std::size_t left_actions, std::size_t right_actions) {
  const double t = static_cast<double>(horizon);
  const double p = static_cast<double>(left_count);
  const double a = static_cast<double>(right_count);
  return 1.0 / (4.0 * t * t * p * p * a * a * static_cast<double>(left_actions) *
                static_cast<double>(right_actions));
}

/// Right-side strategies and the right agents' values, indexed by pair:
/// `strategies[instance.pair_index(p, a)]` and `values[a][p]`.
struct ResponseTable {
  std::vector<MixedStrategy> strategies;
  std::vector<std::vector<double>> values;
};

/// Right agents play the minimax strategy of each true game and value a
/// partner at the negated game value.
inline ResponseTable nash_response_strategies(const MarketInstance& instance) {
  ResponseTable table;
  table.values.assign(instance.right_count(), std::vector<double>(instance.left_count()));
  for (std::size_t p = 0; p < instance.left_count(); ++p) {
    for (std::size_t a = 0; a < instance.right_count(); ++a) {
      auto s = solve_game(instance.game(p, a));
      table.strategies.push_back(std::move(s.column_strategy));
      table.values[a][p] = -s.value;
    }
  }
  return table;
}

/// Right agents best-respond in each true game to the given left strategies
/// (indexed by pair) and value a partner at the resulting payoff.
inline ResponseTable best_response_strategies(const MarketInstance& instance,
                                              const std::vector<MixedStrategy>& left_strategies) {
  if (left_strategies.size() != instance.pair_count()) {
    throw DimensionError("expected one left strategy per pair");
  }
  ResponseTable table;
  table.values.assign(instance.right_count(), std::vector<double>(instance.left_count()));
  for (std::size_t p = 0; p < instance.left_count(); ++p) {
    for (std::size_t a = 0; a < instance.right_count(); ++a) {
      const MixedStrategy& x = left_strategies[instance.pair_index(p, a)];
      const PayoffMatrix view = instance.game(p, a).opponent_view();
      MixedStrategy y = best_response(view, x);
      table.values[a][p] = expected_payoff(view, y, x);
      table.strategies.push_back(std::move(y));
    }
  }
  return table;
}

struct EpisodeConfig {
  PolicyKind policy = PolicyKind::SelfPlay;
  std::size_t horizon = 1;
  std::optional<double> delta;  // nullopt: auto_delta
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  Side proposing_side = Side::Left;
};

struct PairOutcome {
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t left_action = 0;
  std::size_t right_action = 0;
  double reward = 0.0;  // left agent's; the right agent receives -reward

  friend bool operator==(const PairOutcome&, const PairOutcome&) = default;
};

struct StepRecord {
  std::size_t t = 0;  // 1-based
  Matching matching;
  StrategyProfile strategies;
  std::vector<PairOutcome> outcomes;  // one per matched pair, ordered by left agent
  double mi = 0.0;
  bool event_ok = true;  // every true entry within the confidence interval before the update
  double width_bound = 0.0;  // sum over matched agents of x^T (2 width) x_partner

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Receives each step with the confidence state it was computed from (before
/// the step's own observations are applied).
using StepObserver = std::function<void(const StepRecord&, const ConfidenceState&)>;

namespace detail {

inline std::size_t sample_action(const MixedStrategy& s, double u) {
  double cumulative = 0.0;
  std::size_t last_support = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] <= 0.0) continue;
    last_support = i;
    cumulative += s[i];
    if (u < cumulative) return i;
  }
  return last_support;
}

inline bool event_holds(const MarketInstance& instance, const ConfidenceState& state) {
  for (std::size_t p = 0; p < instance.left_count(); ++p) {
    for (std::size_t a = 0; a < instance.right_count(); ++a) {
      const PayoffMatrix& g = instance.game(p, a);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
          if (std::abs(state.mean(p, a, i, j) - g(i, j)) > state.width(p, a, i, j)) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Runs one episode and streams every step to `observer`.
inline void run_episode(const MarketInstance& instance, const EpisodeConfig& config,
                        const StepObserver& observer) {
  if (config.horizon < 1) throw InputError("horizon must be at least 1");
  if (!(std::isfinite(config.noise_scale) && config.noise_scale >= 0.0)) {
    throw InputError("noise scale must be finite and non-negative");
  }
  const std::size_t left_n = instance.left_count();
  const std::size_t right_n = instance.right_count();
  const double delta = config.delta.value_or(auto_delta(
      config.horizon, left_n, right_n, instance.left_actions(), instance.right_actions()));
  ConfidenceState state(left_n, right_n, instance.left_actions(), instance.right_actions(),
                        delta);

  const Matrix true_values = compute_game_values(instance);
  std::optional<ResponseTable> nash;
  if (config.policy == PolicyKind::NashResponse) nash = nash_response_strategies(instance);

  std::vector<CounterRng> left_action_rng;
  std::vector<CounterRng> right_action_rng;
  std::vector<CounterRng> reward_rng;
  std::vector<std::normal_distribution<double>> noise(instance.pair_count());
  for (std::size_t pair = 0; pair < instance.pair_count(); ++pair) {
    left_action_rng.push_back(make_stream(config.seed, "left_action", {pair}));
    right_action_rng.push_back(make_stream(config.seed, "right_action", {pair}));
    reward_rng.push_back(make_stream(config.seed, "reward", {pair}));
  }

  std::vector<std::vector<double>> left_values(left_n, std::vector<double>(right_n));
  std::vector<std::vector<double>> right_values(right_n, std::vector<double>(left_n));
  std::vector<MixedStrategy> left_strategies;
  std::vector<MixedStrategy> right_strategies;

  for (std::size_t t = 1; t <= config.horizon; ++t) {
    left_strategies.clear();
    right_strategies.clear();
    for (std::size_t p = 0; p < left_n; ++p) {
      for (std::size_t a = 0; a < right_n; ++a) {
        auto left = maximin(ucb_matrix(state, p, a, Side::Left));
        left_values[p][a] = left.value;
        left_strategies.push_back(std::move(left.strategy));
        if (config.policy == PolicyKind::SelfPlay) {
          auto right = maximin(ucb_matrix(state, p, a, Side::Right));
          right_values[a][p] = right.value;
          right_strategies.push_back(std::move(right.strategy));
        }
      }
    }
    if (config.policy == PolicyKind::NashResponse) {
      right_strategies = nash->strategies;
      right_values = nash->values;
    } else if (config.policy == PolicyKind::BestResponse) {
      auto table = best_response_strategies(instance, left_strategies);
      right_strategies = std::move(table.strategies);
      right_values = std::move(table.values);
    }

    const PreferenceProfile prefs =
        build_preferences(left_values, right_values, instance.left_outside_options(),
                          instance.right_outside_options());
    StepRecord record{t, deferred_acceptance(prefs, config.proposing_side),
                      StrategyProfile(left_n, right_n), {}, 0.0, true, 0.0};
    for (const auto& [p, a] : record.matching.pairs()) {
      const std::size_t pair = instance.pair_index(p, a);
      record.strategies.set({Side::Left, p}, left_strategies[pair]);
      record.strategies.set({Side::Right, a}, right_strategies[pair]);
    }

    record.event_ok = detail::event_holds(instance, state);
    for (const auto& [p, a] : record.matching.pairs()) {
      const std::size_t pair = instance.pair_index(p, a);
      const MixedStrategy& x = left_strategies[pair];
      const MixedStrategy& y = right_strategies[pair];
      double bilinear = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j)
          bilinear += x[i] * 2.0 * state.width(p, a, i, j) * y[j];
      record.width_bound += 2.0 * bilinear;  // once per member of the pair

      const std::size_t i = detail::sample_action(x, left_action_rng[pair].uniform());
      const std::size_t j = detail::sample_action(y, right_action_rng[pair].uniform());
      const double z = noise[pair](reward_rng[pair]);
      record.outcomes.push_back({p, a, i, j, instance.game(p, a)(i, j) + config.noise_scale * z});
    }
    record.mi = matching_instability(instance, record.matching, record.strategies, true_values)
                    .value;

    observer(record, state);
    for (const PairOutcome& o : record.outcomes)
      state.observe(o.left, o.right, o.left_action, o.right_action, o.reward);
  }
}

inline std::vector<StepRecord> run_episode(const MarketInstance& instance,
                                           const EpisodeConfig& config) {
  std::vector<StepRecord> records;
  records.reserve(config.horizon);
  run_episode(instance, config,
              [&](const StepRecord& r, const ConfidenceState&) { records.push_back(r); });
  return records;
}

}  // namespace matchlearn
