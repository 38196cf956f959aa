#pragma once

// JSON records for instances, matchings, strategy profiles, preferences,
// games and the reports computed from them. Every record carries
// "format": "matchlearn.<kind>" and "version": 1. Numbers are written in
// shortest round-trip form, so a write/read cycle is lossless.
// See docs/formats.md.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "matchlearn/errors.hpp"
#include "matchlearn/experiment.hpp"
#include "matchlearn/game.hpp"
#include "matchlearn/instability.hpp"
#include "matchlearn/market.hpp"

namespace matchlearn::io {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;


namespace detail {

/// A JSON value plus its path from the document root, for error messages.
class Field {
 public:
  Field(const json& value, std::string path) : value_(&value), path_(std::move(path)) {}

  const json& value() const noexcept { return *value_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("field '" + path_ + "': " + what);
  }

  bool has(std::string_view key) const {
    return value_->is_object() && value_->contains(key);
  }

  Field operator[](std::string_view key) const {
    if (!value_->is_object()) fail("expected an object");
    const auto it = value_->find(key);
    if (it == value_->end()) {
      throw FormatError("missing field '" + child_path(key) + "'");
    }
    return Field(*it, child_path(key));
  }

  Field at(std::size_t index) const {
    if (index >= array_size()) fail("index " + std::to_string(index) + " out of range");
    return Field((*value_)[index], path_ + "[" + std::to_string(index) + "]");
  }

  std::size_t array_size() const {
    if (!value_->is_array()) fail("expected an array");
    return value_->size();
  }

  double number() const {
    if (!value_->is_number()) fail("expected a number");
    const double v = value_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  std::size_t index() const { return static_cast<std::size_t>(uint64()); }

  std::uint64_t uint64() const {
    const bool non_negative =
        value_->is_number_unsigned() ||
        (value_->is_number_integer() && value_->get<std::int64_t>() >= 0);
    if (!non_negative) fail("expected a non-negative integer");
    return value_->get<std::uint64_t>();
  }

  std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }

  std::vector<double> numbers() const {
    std::vector<double> out(array_size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).number();
    return out;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out(array_size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).index();
    return out;
  }

 private:
  std::string child_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* value_;
  std::string path_;
};

inline Field checked_root(const json& doc, std::string_view kind) {
  Field root(doc, "");
  if (!doc.is_object()) throw FormatError("expected a JSON object at the top level");
  const std::string expected = "matchlearn." + std::string(kind);
  const std::string format = root["format"].string();
  if (format != expected) {
    root["format"].fail("expected \"" + expected + "\", found \"" + format + "\"");
  }
  const auto version = root["version"].index();
  if (version != static_cast<std::size_t>(kFormatVersion)) {
    root["version"].fail("unsupported version " + std::to_string(version));
  }
  return root;
}

inline PayoffMatrix read_payoff(const Field& f) {
  const std::size_t rows = f.array_size();
  if (rows == 0) f.fail("payoff matrix needs at least one row");
  const std::size_t cols = f.at(0).array_size();
  std::vector<double> data;
  data.reserve(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const Field row = f.at(i);
    if (row.array_size() != cols) row.fail("ragged payoff matrix");
    for (std::size_t j = 0; j < cols; ++j) data.push_back(row.at(j).number());
  }
  if (cols == 0) f.fail("payoff matrix needs at least one column");
  return PayoffMatrix(rows, cols, std::move(data));
}

inline json write_payoff(const PayoffMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json header(std::string_view kind) {
  json j;
  j["format"] = "matchlearn." + std::string(kind);
  j["version"] = kFormatVersion;
  return j;
}

inline std::string_view side_name(Side s) { return s == Side::Left ? "left" : "right"; }

inline std::string_view binding_name(BindingConstraint b) {
  switch (b) {
    case BindingConstraint::None:
      return "none";
    case BindingConstraint::IndividualRationality:
      return "individual_rationality";
    case BindingConstraint::NashRationality:
      return "nash_rationality";
    case BindingConstraint::BlockingCover:
      return "blocking_cover";
  }
  return "none";
}

}  // namespace detail

/// Parses JSON text; syntax errors carry line and column.
inline json parse_json(std::string_view text, std::string_view source = "input") {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(source) + ": " + e.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

/// Reads and parses a JSON file; format errors name the file.
inline json load_json(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

/// Wraps field errors with the source name.
template <typename F>
auto with_source(std::string_view source, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const FormatError& e) {
    throw FormatError(std::string(source) + ": " + e.what());
  }
}

// Instance

inline json to_json(const MarketInstance& inst) {
  json j = detail::header("instance");
  j["left_count"] = inst.left_count();
  j["right_count"] = inst.right_count();
  j["left_actions"] = inst.left_actions();
  j["right_actions"] = inst.right_actions();
  j["left_outside"] = inst.left_outside_options();
  j["right_outside"] = inst.right_outside_options();
  json games = json::array();
  for (std::size_t p = 0; p < inst.left_count(); ++p) {
    for (std::size_t a = 0; a < inst.right_count(); ++a) {
      json g;
      g["left"] = p;
      g["right"] = a;
      g["payoff"] = detail::write_payoff(inst.game(p, a));
      games.push_back(std::move(g));
    }
  }
  j["games"] = std::move(games);
  if (inst.generator) j["generator"] = generator_name(*inst.generator);
  if (inst.seed) j["seed"] = *inst.seed;
  return j;
}

inline MarketInstance instance_from_json(const json& doc) {
  const auto root = detail::checked_root(doc, "instance");
  const std::size_t left_n = root["left_count"].index();
  const std::size_t right_n = root["right_count"].index();
  if (left_n == 0 || right_n == 0) root["left_count"].fail("agent counts must be at least 1");
  const std::size_t m = root["left_actions"].index();
  const std::size_t k = root["right_actions"].index();
  const detail::Field games = root["games"];
  if (games.array_size() != left_n * right_n) {
    games.fail("expected " + std::to_string(left_n * right_n) + " games, found " +
               std::to_string(games.array_size()));
  }
  std::vector<std::optional<PayoffMatrix>> slots(left_n * right_n);
  for (std::size_t g = 0; g < games.array_size(); ++g) {
    const detail::Field entry = games.at(g);
    const std::size_t p = entry["left"].index();
    const std::size_t a = entry["right"].index();
    if (p >= left_n || a >= right_n) entry.fail("pair index out of range");
    auto& slot = slots[p * right_n + a];
    if (slot) entry.fail("duplicate game for pair (" + std::to_string(p) + ", " +
                         std::to_string(a) + ")");
    PayoffMatrix payoff = detail::read_payoff(entry["payoff"]);
    if (payoff.rows() != m || payoff.cols() != k) {
      entry["payoff"].fail("expected a " + std::to_string(m) + "x" + std::to_string(k) +
                           " matrix");
    }
    slot = std::move(payoff);
  }
  std::vector<PayoffMatrix> ordered;
  for (auto& s : slots) ordered.push_back(std::move(*s));
  const auto lo = root["left_outside"].numbers();
  const auto ro = root["right_outside"].numbers();
  if (lo.size() != left_n) root["left_outside"].fail("expected one entry per left agent");
  if (ro.size() != right_n) root["right_outside"].fail("expected one entry per right agent");
  MarketInstance inst(left_n, right_n, std::move(ordered), lo, ro);
  if (root.has("generator")) {
    const auto g = parse_generator(root["generator"].string());
    if (!g) root["generator"].fail("expected \"gaussian\" or \"uniform\"");
    inst.generator = g;
  }
  if (root.has("seed")) inst.seed = root["seed"].uint64();
  return inst;
}

// Matching

inline json to_json(const Matching& m) {
  json j = detail::header("matching");
  j["left_count"] = m.left_count();
  j["right_count"] = m.right_count();
  json pairs = json::array();
  for (const auto& [p, a] : m.pairs()) pairs.push_back(json::array({p, a}));
  j["pairs"] = std::move(pairs);
  return j;
}

inline Matching matching_from_json(const json& doc) {
  const auto root = detail::checked_root(doc, "matching");
  Matching m(root["left_count"].index(), root["right_count"].index());
  const detail::Field pairs = root["pairs"];
  for (std::size_t i = 0; i < pairs.array_size(); ++i) {
    const detail::Field pair = pairs.at(i);
    if (pair.array_size() != 2) pair.fail("expected [left, right]");
    try {
      m.match(pair.at(0).index(), pair.at(1).index());
    } catch (const InputError& e) {
      pair.fail(e.what());
    }
  }
  return m;
}

// Strategies

inline json to_json(const StrategyProfile& s) {
  json j = detail::header("strategies");
  j["left_count"] = s.left_count();
  j["right_count"] = s.right_count();
  json list = json::array();
  for (Side side : {Side::Left, Side::Right}) {
    const std::size_t n = side == Side::Left ? s.left_count() : s.right_count();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& x = s.get({side, i});
      if (!x) continue;
      json e;
      e["side"] = detail::side_name(side);
      e["agent"] = i;
      e["probabilities"] = x->probabilities();
      list.push_back(std::move(e));
    }
  }
  j["strategies"] = std::move(list);
  return j;
}

inline StrategyProfile strategies_from_json(const json& doc) {
  const auto root = detail::checked_root(doc, "strategies");
  StrategyProfile s(root["left_count"].index(), root["right_count"].index());
  const detail::Field list = root["strategies"];
  for (std::size_t i = 0; i < list.array_size(); ++i) {
    const detail::Field e = list.at(i);
    const std::string side_text = e["side"].string();
    if (side_text != "left" && side_text != "right") e["side"].fail("expected \"left\" or \"right\"");
    const AgentId agent{side_text == "left" ? Side::Left : Side::Right, e["agent"].index()};
    const std::size_t bound = agent.side == Side::Left ? s.left_count() : s.right_count();
    if (agent.index >= bound) e["agent"].fail("agent index out of range");
    if (s.get(agent)) e.fail("duplicate strategy for agent");
    std::vector<double> probabilities = e["probabilities"].numbers();
    try {
      s.set(agent, MixedStrategy(std::move(probabilities)));
    } catch (const InputError& err) {
      e["probabilities"].fail(err.what());
    }
  }
  return s;
}

// Preferences

inline json to_json(const PreferenceProfile& prefs) {
  json j = detail::header("preferences");
  j["left"] = prefs.left;
  j["right"] = prefs.right;
  return j;
}

/// Either explicit ranked lists ("left", "right") or cardinal values
/// ("left_values", "right_values", "left_outside", "right_outside").
inline PreferenceProfile preferences_from_json(const json& doc) {
  const auto root = detail::checked_root(doc, "preferences");
  if (root.has("left_values")) {
    auto read_table = [](const detail::Field& f) {
      std::vector<std::vector<double>> t(f.array_size());
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = f.at(i).numbers();
      return t;
    };
    return build_preferences(read_table(root["left_values"]), read_table(root["right_values"]),
                             root["left_outside"].numbers(), root["right_outside"].numbers());
  }
  PreferenceProfile prefs;
  const detail::Field left = root["left"];
  const detail::Field right = root["right"];
  for (std::size_t i = 0; i < left.array_size(); ++i) prefs.left.push_back(left.at(i).indices());
  for (std::size_t i = 0; i < right.array_size(); ++i)
    prefs.right.push_back(right.at(i).indices());
  return prefs;
}

// Game

inline json to_json(const PayoffMatrix& game) {
  json j = detail::header("game");
  j["payoff"] = detail::write_payoff(game);
  return j;
}

inline PayoffMatrix game_from_json(const json& doc) {
  const auto root = detail::checked_root(doc, "game");
  return detail::read_payoff(root["payoff"]);
}

inline json to_json(const GameSolution& s) {
  json j = detail::header("game_solution");
  j["value"] = s.value;
  j["row_strategy"] = s.row_strategy.probabilities();
  j["column_strategy"] = s.column_strategy.probabilities();
  return j;
}

// Instability

inline json to_json(const InstabilityReport& r) {
  json j = detail::header("instability_report");
  j["value"] = r.value;
  json subsidies;
  subsidies["left"] = r.subsidies.left;
  subsidies["right"] = r.subsidies.right;
  subsidies["total"] = r.subsidies.total;
  j["subsidies"] = std::move(subsidies);
  json binding;
  binding["left"] = json::array();
  binding["right"] = json::array();
  for (auto b : r.left_binding) binding["left"].push_back(detail::binding_name(b));
  for (auto b : r.right_binding) binding["right"].push_back(detail::binding_name(b));
  j["binding"] = std::move(binding);
  json active = json::array();
  for (const auto& ap : r.active_pairs) {
    json e;
    e["left"] = ap.left;
    e["right"] = ap.right;
    e["left_gap"] = ap.left_gap;
    e["right_gap"] = ap.right_gap;
    e["covered_by"] = detail::side_name(ap.covered_by);
    active.push_back(std::move(e));
  }
  j["active_pairs"] = std::move(active);
  return j;
}

inline InstabilityReport instability_report_from_json(const json& doc) {
  const auto root = detail::checked_root(doc, "instability_report");
  InstabilityReport r;
  r.value = root["value"].number();
  const detail::Field subsidies = root["subsidies"];
  r.subsidies.left = subsidies["left"].numbers();
  r.subsidies.right = subsidies["right"].numbers();
  r.subsidies.total = subsidies["total"].number();
  auto read_binding = [](const detail::Field& f) {
    std::vector<BindingConstraint> out;
    for (std::size_t i = 0; i < f.array_size(); ++i) {
      const std::string name = f.at(i).string();
      bool found = false;
      for (auto b : {BindingConstraint::None, BindingConstraint::IndividualRationality,
                     BindingConstraint::NashRationality, BindingConstraint::BlockingCover}) {
        if (detail::binding_name(b) == name) {
          out.push_back(b);
          found = true;
        }
      }
      if (!found) f.at(i).fail("unknown binding tag \"" + name + "\"");
    }
    return out;
  };
  r.left_binding = read_binding(root["binding"]["left"]);
  r.right_binding = read_binding(root["binding"]["right"]);
  const detail::Field active = root["active_pairs"];
  for (std::size_t i = 0; i < active.array_size(); ++i) {
    const detail::Field e = active.at(i);
    const std::string side = e["covered_by"].string();
    if (side != "left" && side != "right") e["covered_by"].fail("expected \"left\" or \"right\"");
    r.active_pairs.push_back({e["left"].index(), e["right"].index(), e["left_gap"].number(),
                              e["right_gap"].number(),
                              side == "left" ? Side::Left : Side::Right});
  }
  return r;
}

/// Two-space indented text with a trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace matchlearn::io
