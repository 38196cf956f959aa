#pragma once

// Two-sided market data model: instances whose pairs play zero-sum games,
// one-to-one matchings, preference formation, deferred acceptance and the
// stability check.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matchlearn/errors.hpp"
#include "matchlearn/game.hpp"
#include "matchlearn/rng.hpp"

namespace matchlearn {

/// Left agents are the row players of every game, right agents the column
/// players.
enum class Side { Left, Right };

inline constexpr Side opposite(Side s) noexcept {
  return s == Side::Left ? Side::Right : Side::Left;
}

struct AgentId {
  Side side;
  std::size_t index;

  friend auto operator<=>(const AgentId&, const AgentId&) = default;
};

enum class InstanceGenerator { GaussianUnit, UniformSigned };

class MarketInstance {
 public:
  /// `games` is row-major over (left, right): games[left * right_count + right].
  MarketInstance(std::size_t left_count, std::size_t right_count, std::vector<PayoffMatrix> games,
                 std::vector<double> left_outside, std::vector<double> right_outside)
      : left_count_(left_count),
        right_count_(right_count),
        games_(std::move(games)),
        left_outside_(std::move(left_outside)),
        right_outside_(std::move(right_outside)) {
    if (left_count_ == 0 || right_count_ == 0) {
      throw InputError("a market needs at least one agent per side");
    }
    if (games_.size() != left_count_ * right_count_) {
      throw DimensionError("expected " + std::to_string(left_count_ * right_count_) +
                           " games, got " + std::to_string(games_.size()));
    }
    for (const auto& g : games_) {
      if (g.rows() != games_.front().rows() || g.cols() != games_.front().cols()) {
        throw DimensionError("all games must share the same action counts");
      }
    }
    if (left_outside_.size() != left_count_ || right_outside_.size() != right_count_) {
      throw DimensionError("expected one outside option per agent");
    }
    for (double v : left_outside_)
      if (!std::isfinite(v)) throw InputError("non-finite outside option");
    for (double v : right_outside_)
      if (!std::isfinite(v)) throw InputError("non-finite outside option");
  }

  std::size_t left_count() const noexcept { return left_count_; }
  std::size_t right_count() const noexcept { return right_count_; }
  std::size_t left_actions() const noexcept { return games_.front().rows(); }
  std::size_t right_actions() const noexcept { return games_.front().cols(); }
  std::size_t pair_count() const noexcept { return games_.size(); }
  std::size_t pair_index(std::size_t left, std::size_t right) const noexcept {
    return left * right_count_ + right;
  }

  const PayoffMatrix& game(std::size_t left, std::size_t right) const {
    return games_.at(pair_index(left, right));
  }
  const std::vector<PayoffMatrix>& games() const noexcept { return games_; }

  double outside_option(AgentId agent) const {
    return agent.side == Side::Left ? left_outside_.at(agent.index)
                                    : right_outside_.at(agent.index);
  }
  const std::vector<double>& left_outside_options() const noexcept { return left_outside_; }
  const std::vector<double>& right_outside_options() const noexcept { return right_outside_; }

  // Provenance, carried through serialization.
  std::optional<InstanceGenerator> generator;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const MarketInstance&, const MarketInstance&) = default;

 private:
  std::size_t left_count_;
  std::size_t right_count_;
  std::vector<PayoffMatrix> games_;
  std::vector<double> left_outside_;
  std::vector<double> right_outside_;
};

/// One-to-one matching; agents may stay unmatched.
class Matching {
 public:
  Matching(std::size_t left_count, std::size_t right_count)
      : left_partner_(left_count), right_partner_(right_count) {}

  std::size_t left_count() const noexcept { return left_partner_.size(); }
  std::size_t right_count() const noexcept { return right_partner_.size(); }

  void match(std::size_t left, std::size_t right) {
    if (left >= left_count() || right >= right_count()) {
      throw DimensionError("matched agent index out of range");
    }
    if (left_partner_[left] || right_partner_[right]) {
      throw InputError("agent already matched: (" + std::to_string(left) + ", " +
                       std::to_string(right) + ")");
    }
    left_partner_[left] = right;
    right_partner_[right] = left;
  }

  std::optional<std::size_t> partner_of_left(std::size_t left) const {
    return left_partner_.at(left);
  }
  std::optional<std::size_t> partner_of_right(std::size_t right) const {
    return right_partner_.at(right);
  }
  std::optional<std::size_t> partner_index(AgentId agent) const {
    return agent.side == Side::Left ? partner_of_left(agent.index)
                                    : partner_of_right(agent.index);
  }
  bool is_pair(std::size_t left, std::size_t right) const {
    return left_partner_.at(left) == right;
  }

  /// Matched pairs sorted by left index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t l = 0; l < left_partner_.size(); ++l)
      if (left_partner_[l]) out.emplace_back(l, *left_partner_[l]);
    return out;
  }

  /// Compact "left-right" pairs joined by ';' ("" when empty).
  std::string serialize() const {
    std::string out;
    for (const auto& [l, r] : pairs()) {
      if (!out.empty()) out += ';';
      out += std::to_string(l) + '-' + std::to_string(r);
    }
    return out;
  }

  friend bool operator==(const Matching&, const Matching&) = default;

 private:
  std::vector<std::optional<std::size_t>> left_partner_;
  std::vector<std::optional<std::size_t>> right_partner_;
};

/// Ranked, already truncated acceptable lists per agent (indices into the
/// opposite side), with the outside option each list was truncated at.
struct PreferenceProfile {
  std::vector<std::vector<std::size_t>> left;
  std::vector<std::vector<std::size_t>> right;
  std::vector<double> left_thresholds;
  std::vector<double> right_thresholds;
};

/// Mixed strategy of each matched agent against its current partner.
class StrategyProfile {
 public:
  StrategyProfile(std::size_t left_count, std::size_t right_count)
      : left_(left_count), right_(right_count) {}

  void set(AgentId agent, MixedStrategy strategy) {
    slot(agent) = std::move(strategy);
  }
  const std::optional<MixedStrategy>& get(AgentId agent) const {
    return agent.side == Side::Left ? left_.at(agent.index) : right_.at(agent.index);
  }
  std::size_t left_count() const noexcept { return left_.size(); }
  std::size_t right_count() const noexcept { return right_.size(); }

  friend bool operator==(const StrategyProfile&, const StrategyProfile&) = default;

 private:
  std::optional<MixedStrategy>& slot(AgentId agent) {
    return agent.side == Side::Left ? left_.at(agent.index) : right_.at(agent.index);
  }
  std::vector<std::optional<MixedStrategy>> left_;
  std::vector<std::optional<MixedStrategy>> right_;
};

/// Checks that `strategies` covers exactly the matched agents of `matching`
/// with the action counts of `instance`.
inline void validate_profile(const MarketInstance& instance, const Matching& matching,
                             const StrategyProfile& strategies) {
  if (matching.left_count() != instance.left_count() ||
      matching.right_count() != instance.right_count() ||
      strategies.left_count() != instance.left_count() ||
      strategies.right_count() != instance.right_count()) {
    throw DimensionError("matching/strategy profile sizes do not match the instance");
  }
  auto check = [&](Side side, std::size_t count, std::size_t actions) {
    for (std::size_t i = 0; i < count; ++i) {
      const AgentId agent{side, i};
      const auto& s = strategies.get(agent);
      const bool matched = matching.partner_index(agent).has_value();
      const char* name = side == Side::Left ? "left" : "right";
      if (matched && !s) {
        throw InputError(std::string("missing strategy for matched ") + name + " agent " +
                         std::to_string(i));
      }
      if (!matched && s) {
        throw InputError(std::string("strategy given for unmatched ") + name + " agent " +
                         std::to_string(i));
      }
      if (s && s->size() != actions) {
        throw DimensionError(std::string("strategy of ") + name + " agent " + std::to_string(i) +
                             " has " + std::to_string(s->size()) + " actions, expected " +
                             std::to_string(actions));
      }
    }
  };
  check(Side::Left, instance.left_count(), instance.left_actions());
  check(Side::Right, instance.right_count(), instance.right_actions());
}

/// Opposite-side indices sorted by descending value (ascending index on
/// ties); entries valued below `outside_option` are dropped.
inline std::vector<std::size_t> preferences_from_values(std::span<const double> values,
                                                        double outside_option) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw InputError("non-finite preference value");
    if (values[i] >= outside_option) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

/// Builds both sides' lists. `left_values[p][a]` is left agent p's value for
/// right agent a, `right_values[a][p]` the converse.
inline PreferenceProfile build_preferences(const std::vector<std::vector<double>>& left_values,
                                           const std::vector<std::vector<double>>& right_values,
                                           std::span<const double> left_outside,
                                           std::span<const double> right_outside) {
  if (left_values.size() != left_outside.size() || right_values.size() != right_outside.size()) {
    throw DimensionError("one value vector and outside option per agent required");
  }
  PreferenceProfile prefs;
  prefs.left_thresholds.assign(left_outside.begin(), left_outside.end());
  prefs.right_thresholds.assign(right_outside.begin(), right_outside.end());
  for (std::size_t p = 0; p < left_values.size(); ++p) {
    if (left_values[p].size() != right_values.size()) {
      throw DimensionError("left agent " + std::to_string(p) + " has " +
                           std::to_string(left_values[p].size()) + " values, expected " +
                           std::to_string(right_values.size()));
    }
    prefs.left.push_back(preferences_from_values(left_values[p], left_outside[p]));
  }
  for (std::size_t a = 0; a < right_values.size(); ++a) {
    if (right_values[a].size() != left_values.size()) {
      throw DimensionError("right agent " + std::to_string(a) + " has " +
                           std::to_string(right_values[a].size()) + " values, expected " +
                           std::to_string(left_values.size()));
    }
    prefs.right.push_back(preferences_from_values(right_values[a], right_outside[a]));
  }
  return prefs;
}

/// Gale-Shapley deferred acceptance on truncated lists. Proposers only
/// propose to acceptable partners and receivers reject anyone missing from
/// their list. Returns the proposer-optimal stable matching.
inline Matching deferred_acceptance(const PreferenceProfile& prefs,
                                    Side proposing_side = Side::Left) {
  const auto& proposer_lists = proposing_side == Side::Left ? prefs.left : prefs.right;
  const auto& receiver_lists = proposing_side == Side::Left ? prefs.right : prefs.left;
  const std::size_t proposers = proposer_lists.size();
  const std::size_t receivers = receiver_lists.size();

  constexpr std::size_t kUnacceptable = static_cast<std::size_t>(-1);
  auto validate_list = [](const std::vector<std::size_t>& list, std::size_t bound) {
    std::vector<bool> seen(bound, false);
    for (std::size_t x : list) {
      if (x >= bound || seen[x]) throw InputError("malformed preference list");
      seen[x] = true;
    }
  };
  std::vector<std::vector<std::size_t>> rank(receivers,
                                             std::vector<std::size_t>(proposers, kUnacceptable));
  for (std::size_t r = 0; r < receivers; ++r) {
    validate_list(receiver_lists[r], proposers);
    for (std::size_t pos = 0; pos < receiver_lists[r].size(); ++pos)
      rank[r][receiver_lists[r][pos]] = pos;
  }
  for (const auto& list : proposer_lists) validate_list(list, receivers);

  std::vector<std::size_t> next_choice(proposers, 0);
  std::vector<std::optional<std::size_t>> held(receivers);
  std::vector<std::size_t> free_stack(proposers);
  std::iota(free_stack.rbegin(), free_stack.rend(), 0);  // lowest index on top
  while (!free_stack.empty()) {
    const std::size_t p = free_stack.back();
    free_stack.pop_back();
    const auto& list = proposer_lists[p];
    while (next_choice[p] < list.size()) {
      const std::size_t r = list[next_choice[p]++];
      if (rank[r][p] == kUnacceptable) continue;
      if (!held[r]) {
        held[r] = p;
        break;
      }
      if (rank[r][p] < rank[r][*held[r]]) {
        free_stack.push_back(*held[r]);
        held[r] = p;
        break;
      }
    }
  }

  const std::size_t left_count = proposing_side == Side::Left ? proposers : receivers;
  const std::size_t right_count = proposing_side == Side::Left ? receivers : proposers;
  Matching matching(left_count, right_count);
  for (std::size_t r = 0; r < receivers; ++r) {
    if (!held[r]) continue;
    if (proposing_side == Side::Left) {
      matching.match(*held[r], r);
    } else {
      matching.match(r, *held[r]);
    }
  }
  return matching;
}

/// Cardinal utilities for stability questions: `left[p][a]` is U_{p,a},
/// `right[a][p]` is U_{a,p}; outside options are the unmatched utilities.
struct UtilityTable {
  std::vector<std::vector<double>> left;
  std::vector<std::vector<double>> right;
  std::vector<double> left_outside;
  std::vector<double> right_outside;

  std::size_t left_count() const noexcept { return left.size(); }
  std::size_t right_count() const noexcept { return right.size(); }

  /// Current utility of `agent` under `matching`.
  double current(const Matching& matching, AgentId agent) const {
    const auto partner = matching.partner_index(agent);
    if (agent.side == Side::Left) {
      return partner ? left[agent.index][*partner] : left_outside[agent.index];
    }
    return partner ? right[agent.index][*partner] : right_outside[agent.index];
  }

  void validate(const Matching& matching) const {
    if (left_outside.size() != left.size() || right_outside.size() != right.size() ||
        matching.left_count() != left.size() || matching.right_count() != right.size()) {
      throw DimensionError("utility table and matching disagree on agent counts");
    }
    for (const auto& row : left)
      if (row.size() != right.size()) throw DimensionError("ragged left utility table");
    for (const auto& row : right)
      if (row.size() != left.size()) throw DimensionError("ragged right utility table");
  }
};

struct StabilityReport {
  std::vector<AgentId> individually_irrational;
  std::vector<std::pair<std::size_t, std::size_t>> blocking_pairs;  // (left, right)

  bool stable() const noexcept {
    return individually_irrational.empty() && blocking_pairs.empty();
  }
};

/// Individual rationality (U_{a,m(a)} >= U_{a,⊥}) and absence of blocking
/// pairs (both strictly better off together). `tol` absorbs round-off: a
/// gain must exceed it to count.
inline StabilityReport is_stable(const UtilityTable& utilities, const Matching& matching,
                                 double tol = 1e-9) {
  utilities.validate(matching);
  StabilityReport report;
  for (std::size_t p = 0; p < utilities.left_count(); ++p) {
    const AgentId agent{Side::Left, p};
    if (utilities.current(matching, agent) < utilities.left_outside[p] - tol)
      report.individually_irrational.push_back(agent);
  }
  for (std::size_t a = 0; a < utilities.right_count(); ++a) {
    const AgentId agent{Side::Right, a};
    if (utilities.current(matching, agent) < utilities.right_outside[a] - tol)
      report.individually_irrational.push_back(agent);
  }
  for (std::size_t p = 0; p < utilities.left_count(); ++p) {
    const double up = utilities.current(matching, {Side::Left, p});
    for (std::size_t a = 0; a < utilities.right_count(); ++a) {
      if (matching.is_pair(p, a)) continue;
      const double ua = utilities.current(matching, {Side::Right, a});
      if (utilities.left[p][a] > up + tol && utilities.right[a][p] > ua + tol)
        report.blocking_pairs.emplace_back(p, a);
    }
  }
  return report;
}

/// Random instance; deterministic in `seed`.
inline MarketInstance generate_instance(std::size_t left_count, std::size_t right_count,
                                        std::size_t left_actions, std::size_t right_actions,
                                        InstanceGenerator generator, double outside_option,
                                        std::uint64_t seed) {
  if (left_count == 0 || right_count == 0 || left_actions == 0 || right_actions == 0) {
    throw InputError("agent and action counts must be at least 1");
  }
  if (!std::isfinite(outside_option)) throw InputError("non-finite outside option");
  CounterRng rng = make_stream(seed, "instance");
  std::normal_distribution<double> gaussian(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<PayoffMatrix> games;
  games.reserve(left_count * right_count);
  for (std::size_t g = 0; g < left_count * right_count; ++g) {
    std::vector<double> entries(left_actions * right_actions);
    for (double& v : entries)
      v = generator == InstanceGenerator::GaussianUnit ? gaussian(rng) : uniform(rng);
    games.emplace_back(left_actions, right_actions, std::move(entries));
  }
  MarketInstance instance(left_count, right_count, std::move(games),
                          std::vector<double>(left_count, outside_option),
                          std::vector<double>(right_count, outside_option));
  instance.generator = generator;
  instance.seed = seed;
  return instance;
}

}  // namespace matchlearn
