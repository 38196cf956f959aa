#include "matchlearn/io.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

namespace matchlearn {
namespace {

using testing_support::example_one_instance;

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

TEST(InstanceFormat, LosslessRoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = generate_instance(2, 3, 3, 2, InstanceGenerator::GaussianUnit, -1.0, seed);
    const std::string text = io::dump(io::to_json(inst));
    const auto back = io::instance_from_json(io::parse_json(text));
    EXPECT_EQ(back, inst);
    EXPECT_EQ(io::dump(io::to_json(back)), text);
  }
}

TEST(InstanceFormat, AwkwardDoubles) {
  const MarketInstance inst(1, 1, {PayoffMatrix{{0.1 + 0.2, 1e-300, -5e-324, 1.7976931348623157e308}}},
                            {-0.0}, {std::nextafter(-1.0, 0.0)});
  EXPECT_EQ(io::instance_from_json(io::parse_json(io::dump(io::to_json(inst)))), inst);
}

TEST(InstanceFormat, Header) {
  const auto j = io::to_json(example_one_instance());
  EXPECT_EQ(j["format"], "matchlearn.instance");
  EXPECT_EQ(j["version"], 1);
  EXPECT_FALSE(j.contains("seed"));
}

TEST(InstanceFormat, ErrorsNameTheField) {
  auto j = io::to_json(example_one_instance());
  j["games"][1]["payoff"][0][1] = "x";
  EXPECT_NE(error_of([&] { io::instance_from_json(j); }).find("games[1].payoff[0][1]"),
            std::string::npos);

  j = io::to_json(example_one_instance());
  j["version"] = 2;
  EXPECT_NE(error_of([&] { io::instance_from_json(j); }).find("version"), std::string::npos);

  j = io::to_json(example_one_instance());
  j["format"] = "matchlearn.matching";
  EXPECT_THROW(io::instance_from_json(j), FormatError);

  j = io::to_json(example_one_instance());
  j.erase("right_outside");
  EXPECT_NE(error_of([&] { io::instance_from_json(j); }).find("right_outside"), std::string::npos);

  j = io::to_json(example_one_instance());
  j["games"][1]["left"] = 0;
  j["games"][1]["right"] = 0;
  EXPECT_NE(error_of([&] { io::instance_from_json(j); }).find("duplicate"), std::string::npos);

  j = io::to_json(example_one_instance());
  j["games"][0]["payoff"] = {{1, 2, 3}};
  EXPECT_THROW(io::instance_from_json(j), FormatError);
}

TEST(ParseJson, SyntaxErrorsReportLine) {
  const std::string bad = "{\n  \"format\": \"matchlearn.instance\",\n  \"version\": 1,\n  oops\n}";
  const std::string msg = error_of([&] { io::parse_json(bad, "inst.json"); });
  EXPECT_NE(msg.find("inst.json"), std::string::npos);
  EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
}

TEST(MatchingFormat, RoundTripAndErrors) {
  Matching m(3, 2);
  m.match(2, 0);
  m.match(0, 1);
  EXPECT_EQ(io::matching_from_json(io::to_json(m)), m);
  auto j = io::to_json(m);
  j["pairs"].push_back({1, 1});
  EXPECT_NE(error_of([&] { io::matching_from_json(j); }).find("pairs[2]"), std::string::npos);
  j = io::to_json(m);
  j["pairs"][0] = {-1, 0};
  EXPECT_THROW(io::matching_from_json(j), FormatError);
}

TEST(StrategiesFormat, RoundTripAndErrors) {
  StrategyProfile s(2, 2);
  s.set({Side::Left, 1}, MixedStrategy({0.25, 0.75}));
  s.set({Side::Right, 0}, MixedStrategy({1.0 / 3, 2.0 / 3}));
  EXPECT_EQ(io::strategies_from_json(io::to_json(s)), s);
  auto j = io::to_json(s);
  j["strategies"][0]["probabilities"] = {0.5, 0.6};
  EXPECT_NE(error_of([&] { io::strategies_from_json(j); }).find("strategies[0].probabilities"),
            std::string::npos);
  j = io::to_json(s);
  j["strategies"][1]["side"] = "middle";
  EXPECT_THROW(io::strategies_from_json(j), FormatError);
}

TEST(PreferencesFormat, ListsAndValues) {
  PreferenceProfile prefs;
  prefs.left = {{1, 0}};
  prefs.right = {{0}, {0}};
  const auto back = io::preferences_from_json(io::to_json(prefs));
  EXPECT_EQ(back.left, prefs.left);
  EXPECT_EQ(back.right, prefs.right);

  const auto values = io::parse_json(R"({"format": "matchlearn.preferences", "version": 1,
    "left_values": [[0, 1]], "right_values": [[0], [-1]],
    "left_outside": [-1], "right_outside": [-1, -1]})");
  const auto from_values = io::preferences_from_json(values);
  EXPECT_EQ(from_values.left, (std::vector<std::vector<std::size_t>>{{1, 0}}));
  EXPECT_EQ(deferred_acceptance(from_values).serialize(), "0-1");
}

TEST(GameFormat, RoundTrip) {
  const PayoffMatrix g{{1, -1}, {-1, 1}};
  EXPECT_EQ(io::game_from_json(io::to_json(g)), g);
  const auto sol = io::to_json(solve_game(g));
  EXPECT_EQ(sol["format"], "matchlearn.game_solution");
  EXPECT_EQ(sol["row_strategy"].size(), 2u);
}

TEST(InstabilityReportFormat, RoundTrip) {
  std::mt19937_64 rng(3);
  const auto inst = testing_support::random_instance(rng, 3, 3, 2, 2);
  const auto m = testing_support::random_matching(rng, 3, 3);
  const auto s = testing_support::random_profile(rng, inst, m);
  const auto r = matching_instability(inst, m, s);
  const auto j = io::to_json(r);
  EXPECT_EQ(j["format"], "matchlearn.instability_report");
  const auto back = io::instability_report_from_json(io::parse_json(io::dump(j)));
  EXPECT_EQ(back.value, r.value);
  EXPECT_EQ(back.subsidies.left, r.subsidies.left);
  EXPECT_EQ(back.subsidies.right, r.subsidies.right);
  EXPECT_EQ(back.left_binding, r.left_binding);
  EXPECT_EQ(back.right_binding, r.right_binding);
  ASSERT_EQ(back.active_pairs.size(), r.active_pairs.size());
  for (std::size_t i = 0; i < r.active_pairs.size(); ++i) {
    EXPECT_EQ(back.active_pairs[i].left_gap, r.active_pairs[i].left_gap);
    EXPECT_EQ(back.active_pairs[i].covered_by, r.active_pairs[i].covered_by);
  }
}

TEST(Files, MissingFileIsIoError) {
  EXPECT_THROW(io::load_json("/nonexistent/matchlearn.json"), IoError);
}

}  // namespace
}  // namespace matchlearn
