#include "matchlearn/experiment.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

namespace matchlearn {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() /
                   ("matchlearn_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

ExperimentConfig small_config(const fs::path& dir) {
  ExperimentConfig c;
  c.left_count = 2;
  c.right_count = 3;
  c.left_actions = 2;
  c.right_actions = 2;
  c.horizon = 60;
  c.runs = 4;
  c.seeds_base = 100;
  c.output_dir = dir;
  return c;
}

TEST(TheoreticalBound, Examples) {
  EXPECT_NEAR(theoretical_bound(1, 1, 1, 1, 1), 6.709640090061899, 1e-12);
  EXPECT_NEAR(theoretical_bound(1, 1, 1, 1, 1), 6.709626, 1e-4);
  EXPECT_NEAR(theoretical_bound(1000, 2, 2, 2, 2), 2228.2830297663463, 1e-9);
  EXPECT_NEAR(theoretical_bound(5000, 2, 2, 2, 2), 5378.043312600765, 1e-9);
  for (double t = 1; t < 1e6; t *= 3)
    EXPECT_GT(theoretical_bound(2 * t, 2, 3, 2, 2), theoretical_bound(t, 2, 3, 2, 2));
}

TEST(TheoreticalBound, RejectsArgumentsBelowOne) {
  EXPECT_THROW(theoretical_bound(0, 1, 1, 1, 1), InputError);
  EXPECT_THROW(theoretical_bound(1, -2, 1, 1, 1), InputError);
  EXPECT_THROW(theoretical_bound(1, 1, 1, 1, std::nan("")), InputError);
}

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, i % 20 - 10);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(3.0), "3");
}

TEST(PolicyNames, RoundTrip) {
  for (PolicyKind p : {PolicyKind::SelfPlay, PolicyKind::NashResponse, PolicyKind::BestResponse})
    EXPECT_EQ(parse_policy(policy_name(p)), p);
  EXPECT_FALSE(parse_policy("greedy").has_value());
  EXPECT_EQ(parse_generator("uniform"), InstanceGenerator::UniformSigned);
}

TEST(RunExperiment, SingleRunAggregateIsTheRun) {
  const auto dir = fresh_dir("single");
  ExperimentConfig c = small_config(dir);
  c.runs = 1;
  c.horizon = 10;
  c.noise_scale = 0.0;
  const auto trace = run_experiment(c);
  ASSERT_EQ(trace.mean.size(), 10u);
  EXPECT_EQ(trace.mean, trace.cumulative[0]);
  for (double s : trace.std_dev) EXPECT_EQ(s, 0.0);
  const auto run_rows = read_csv(run_trace_path(c, 0));
  const auto agg_rows = read_csv(aggregate_trace_path(c));
  ASSERT_EQ(run_rows.size(), 11u);
  ASSERT_EQ(agg_rows.size(), 11u);
  for (std::size_t t = 1; t <= 10; ++t) EXPECT_EQ(run_rows[t][4], agg_rows[t][1]);
  fs::remove_all(dir);
}

TEST(RunExperiment, FilesHaveStableSchemaAndAgreeWithAggregate) {
  const auto dir = fresh_dir("schema");
  const ExperimentConfig c = small_config(dir);
  const auto trace = run_experiment(c);
  EXPECT_EQ(run_trace_path(c, 3).filename(), "selfplay_run_0003.csv");
  std::vector<std::vector<double>> cumulative(c.runs);
  for (std::size_t run = 0; run < c.runs; ++run) {
    const auto rows = read_csv(run_trace_path(c, run));
    ASSERT_EQ(rows.size(), c.horizon + 1);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"run_id", "t", "matching_serialized", "mi",
                                                 "cumulative_mi", "event_ok"}));
    double previous = 0.0;
    for (std::size_t t = 1; t <= c.horizon; ++t) {
      ASSERT_EQ(rows[t].size(), 6u);
      EXPECT_EQ(rows[t][0], std::to_string(run));
      EXPECT_EQ(rows[t][1], std::to_string(t));
      EXPECT_TRUE(rows[t][5] == "true" || rows[t][5] == "false");
      const double cum = std::stod(rows[t][4]);
      EXPECT_GE(cum, previous);
      EXPECT_GE(std::stod(rows[t][3]), 0.0);
      previous = cum;
      cumulative[run].push_back(cum);
    }
    EXPECT_EQ(cumulative[run], trace.cumulative[run]);
  }
  const auto agg = read_csv(aggregate_trace_path(c));
  EXPECT_EQ(agg[0], (std::vector<std::string>{"t", "mean_cum_mi", "std_cum_mi", "bound"}));
  for (std::size_t t = 0; t < c.horizon; ++t) {
    double mean = 0.0;
    for (const auto& run : cumulative) mean += run[t];
    mean /= static_cast<double>(c.runs);
    double var = 0.0;
    for (const auto& run : cumulative) var += (run[t] - mean) * (run[t] - mean);
    EXPECT_NEAR(std::stod(agg[t + 1][1]), mean, 1e-9);
    EXPECT_NEAR(std::stod(agg[t + 1][2]), std::sqrt(var / static_cast<double>(c.runs)), 1e-9);
    EXPECT_EQ(std::stod(agg[t + 1][3]), theoretical_bound(static_cast<double>(t + 1), 2, 3, 2, 2));
  }
  fs::remove_all(dir);
}

TEST(RunExperiment, ByteIdenticalAcrossRepeatsAndThreadCounts) {
  for (PolicyKind policy : {PolicyKind::SelfPlay, PolicyKind::BestResponse}) {
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    ExperimentConfig ca = small_config(a);
    ca.policy = policy;
    ca.threads = 1;
    ExperimentConfig cb = ca;
    cb.output_dir = b;
    cb.threads = 3;
    run_experiment(ca);
    run_experiment(cb);
    for (std::size_t run = 0; run < ca.runs; ++run)
      EXPECT_EQ(slurp(run_trace_path(ca, run)), slurp(run_trace_path(cb, run)));
    EXPECT_EQ(slurp(aggregate_trace_path(ca)), slurp(aggregate_trace_path(cb)));
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST(RunExperiment, InstanceSeedsFollowRunIndex) {
  ExperimentConfig c = small_config({});
  EXPECT_EQ(experiment_instance(c, 2).seed, std::optional<std::uint64_t>(102));
  EXPECT_EQ(experiment_instance(c, 2),
            generate_instance(2, 3, 2, 2, InstanceGenerator::GaussianUnit, -1.0, 102));
}

TEST(RunExperiment, NoFilesWithoutOutputDir) {
  ExperimentConfig c = small_config({});
  const auto trace = run_experiment(c);
  EXPECT_EQ(trace.cumulative.size(), c.runs);
}

TEST(RunExperiment, UnwritableOutputIsIoError) {
  const auto dir = fresh_dir("blocker");
  fs::create_directories(dir);
  const auto file = dir / "plain_file";
  std::ofstream(file) << "x";
  ExperimentConfig c = small_config(file / "sub");
  EXPECT_THROW(run_experiment(c), IoError);
  fs::remove_all(dir);
}

TEST(RunExperiment, InvalidConfigIsInputError) {
  ExperimentConfig c = small_config({});
  c.runs = 0;
  EXPECT_THROW(run_experiment(c), InputError);
  c = small_config({});
  c.delta = 0.0;
  EXPECT_THROW(run_experiment(c), InputError);
  c = small_config({});
  c.horizon = 0;
  EXPECT_THROW(run_experiment(c), InputError);
}

}  // namespace
}  // namespace matchlearn
