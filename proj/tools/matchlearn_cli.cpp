// matchlearn command-line harness.
//
// Exit codes: 0 success, 2 input or format error, 3 I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "matchlearn/experiment.hpp"
#include "matchlearn/instability.hpp"
#include "matchlearn/io.hpp"

namespace {

namespace fs = std::filesystem;
namespace io = matchlearn::io;
using matchlearn::FormatError;
using matchlearn::InputError;

constexpr int kExitInput = 2;
constexpr int kExitIo = 3;
constexpr const char* kOutputDirEnv = "MATCHLEARN_OUTPUT_DIR";

const std::map<std::string, matchlearn::Side> kSides{{"left", matchlearn::Side::Left},
                                                     {"right", matchlearn::Side::Right}};

template <typename F>
auto load(const fs::path& path, F&& reader) {
  const io::json doc = io::load_json(path);
  return io::with_source(path.string(), [&] { return reader(doc); });
}

void emit(const io::json& record, const std::string& output) {
  const std::string text = io::dump(record);
  std::cout << text;
  if (!output.empty()) io::write_text_file(output, text);
}

double parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw FormatError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

/// "1,-1;-1,1": rows separated by ';', entries by ','.
matchlearn::PayoffMatrix parse_inline_payoff(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t stop = std::min(text.find(';', start), text.size());
    const std::string_view row = text.substr(start, stop - start);
    std::vector<double> entries;
    std::size_t s = 0;
    while (s <= row.size()) {
      const std::size_t e = std::min(row.find(',', s), row.size());
      entries.push_back(parse_number(row.substr(s, e - s)));
      s = e + 1;
    }
    if (!rows.empty() && entries.size() != rows.front().size()) {
      throw FormatError("--payoff: rows have different lengths");
    }
    rows.push_back(std::move(entries));
    start = stop + 1;
  }
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return matchlearn::PayoffMatrix(rows.size(), rows.front().size(), std::move(flat));
}

struct SimulateOptions {
  matchlearn::ExperimentConfig config;
  std::string policy = "selfplay";
  std::string generator = "gaussian";
  std::string delta = "auto";
  std::string output_dir;
};

void run_simulate(SimulateOptions& o) {
  auto policy = matchlearn::parse_policy(o.policy);
  if (!policy) throw InputError("unknown policy '" + o.policy + "'");
  auto generator = matchlearn::parse_generator(o.generator);
  if (!generator) throw InputError("unknown generator '" + o.generator + "'");
  o.config.policy = *policy;
  o.config.generator = *generator;
  o.config.delta = o.delta == "auto" ? std::nullopt : std::optional(parse_number(o.delta));
  if (!o.output_dir.empty()) {
    o.config.output_dir = o.output_dir;
  } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    o.config.output_dir = env;
  } else {
    o.config.output_dir = "results";
  }

  const auto trace = matchlearn::run_experiment(o.config);
  const std::size_t last = o.config.horizon - 1;
  std::size_t failures = 0;
  for (auto f : trace.event_failures) failures += f;
  io::json summary = io::detail::header("experiment_summary");
  summary["policy"] = matchlearn::policy_name(o.config.policy);
  summary["horizon"] = o.config.horizon;
  summary["runs"] = o.config.runs;
  summary["final_mean_cum_mi"] = trace.mean[last];
  summary["final_std_cum_mi"] = trace.std_dev[last];
  summary["final_bound"] = trace.bound[last];
  summary["event_failures"] = failures;
  summary["aggregate_file"] = matchlearn::aggregate_trace_path(o.config).string();
  std::cout << io::dump(summary);
}

int run(int argc, char** argv) {
  CLI::App app{"Learning matching equilibria in two-sided markets with zero-sum games"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML or INI file with option values; sections name subcommands");

  // simulate
  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Run a batch experiment and write trace files");
  simulate->add_option("-p,--left-count", sim.config.left_count, "Left agents")->capture_default_str();
  simulate->add_option("-a,--right-count", sim.config.right_count, "Right agents")->capture_default_str();
  simulate->add_option("-m,--left-actions", sim.config.left_actions, "Left actions per game")->capture_default_str();
  simulate->add_option("-k,--right-actions", sim.config.right_actions, "Right actions per game")->capture_default_str();
  simulate->add_option("-T,--horizon", sim.config.horizon, "Steps per run")->capture_default_str();
  simulate->add_option("--runs", sim.config.runs, "Number of runs")->capture_default_str();
  simulate->add_option("--seeds-base", sim.config.seeds_base, "Run r uses seed seeds-base + r")->capture_default_str();
  simulate->add_option("--policy", sim.policy, "selfplay, nash_response or best_response")->capture_default_str();
  simulate->add_option("--generator", sim.generator, "gaussian or uniform")->capture_default_str();
  simulate->add_option("--outside-option", sim.config.outside_option, "Outside option of every agent")->capture_default_str();
  simulate->add_option("--delta", sim.delta, "Confidence parameter in (0,1), or auto")->capture_default_str();
  simulate->add_option("--noise-scale", sim.config.noise_scale, "Reward noise standard deviation")->capture_default_str();
  simulate->add_option("--proposing-side", sim.config.proposing_side, "left or right")
      ->transform(CLI::CheckedTransformer(kSides))
      ->option_text("left|right [left]");
  simulate->add_option("-o,--output-dir", sim.output_dir,
                       std::string("Trace directory (default: $") + kOutputDirEnv + ", else results)");
  simulate->add_option("--threads", sim.config.threads, "Worker threads, 0 for all cores")->capture_default_str();
  simulate->callback([&] { run_simulate(sim); });

  // audit
  std::string instance_file, matching_file, strategies_file, output_file;
  auto* audit = app.add_subcommand("audit", "Compute the matching instability of a matching and strategies");
  audit->add_option("--instance", instance_file, "Instance record")->required();
  audit->add_option("--matching", matching_file, "Matching record")->required();
  audit->add_option("--strategies", strategies_file, "Strategies record")->required();
  audit->add_option("-o,--output", output_file, "Also write the report to this file");
  audit->callback([&] {
    const auto instance = load(instance_file, io::instance_from_json);
    const auto matching = load(matching_file, io::matching_from_json);
    const auto strategies = load(strategies_file, io::strategies_from_json);
    emit(io::to_json(matchlearn::matching_instability(instance, matching, strategies)), output_file);
  });

  // solve-game
  std::string game_file, payoff_text;
  auto* solve = app.add_subcommand("solve-game", "Solve a two-player zero-sum matrix game");
  auto* game_opt = solve->add_option("--game", game_file, "Game record");
  auto* payoff_opt = solve->add_option("--payoff", payoff_text, "Inline payoff, e.g. \"1,-1;-1,1\"");
  game_opt->excludes(payoff_opt);
  solve->add_option("-o,--output", output_file, "Also write the solution to this file");
  solve->callback([&] {
    if (game_file.empty() && payoff_text.empty()) throw InputError("give --game or --payoff");
    const auto game =
        game_file.empty() ? parse_inline_payoff(payoff_text) : load(game_file, io::game_from_json);
    emit(io::to_json(matchlearn::solve_game(game)), output_file);
  });

  // match
  std::string preferences_file, match_instance_file;
  matchlearn::Side proposing = matchlearn::Side::Left;
  auto* match = app.add_subcommand("match", "Deferred acceptance on preferences or on an instance's game values");
  auto* pref_opt = match->add_option("--preferences", preferences_file, "Preferences record");
  auto* inst_opt = match->add_option("--instance", match_instance_file, "Instance record");
  pref_opt->excludes(inst_opt);
  match->add_option("--proposing-side", proposing, "left or right")
      ->transform(CLI::CheckedTransformer(kSides))
      ->option_text("left|right [left]");
  match->add_option("-o,--output", output_file, "Also write the matching to this file");
  match->callback([&] {
    if (preferences_file.empty() && match_instance_file.empty()) {
      throw InputError("give --preferences or --instance");
    }
    matchlearn::PreferenceProfile prefs;
    if (!preferences_file.empty()) {
      prefs = load(preferences_file, io::preferences_from_json);
    } else {
      const auto instance = load(match_instance_file, io::instance_from_json);
      prefs = matchlearn::value_preferences(instance, matchlearn::compute_game_values(instance));
    }
    emit(io::to_json(matchlearn::deferred_acceptance(prefs, proposing)), output_file);
  });

  // bound
  double bt = 1, bp = 1, ba = 1, bm = 1, bk = 1;
  auto* bound = app.add_subcommand("bound", "Evaluate the cumulative instability bound");
  bound->add_option("-t,--horizon", bt, "Steps")->capture_default_str();
  bound->add_option("-p,--left-count", bp, "Left agents")->capture_default_str();
  bound->add_option("-a,--right-count", ba, "Right agents")->capture_default_str();
  bound->add_option("-m,--left-actions", bm, "Left actions")->capture_default_str();
  bound->add_option("-k,--right-actions", bk, "Right actions")->capture_default_str();
  bound->callback([&] {
    io::json record = io::detail::header("bound");
    record["horizon"] = bt;
    record["left_count"] = bp;
    record["right_count"] = ba;
    record["left_actions"] = bm;
    record["right_actions"] = bk;
    record["value"] = matchlearn::theoretical_bound(bt, bp, ba, bm, bk);
    std::cout << io::dump(record);
  });

  // gen-instance
  std::size_t gp = 2, ga = 2, gm = 2, gk = 2;
  std::string gen_name = "gaussian";
  double gen_outside = -1.0;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen-instance", "Generate a random instance record");
  gen->add_option("-p,--left-count", gp, "Left agents")->capture_default_str();
  gen->add_option("-a,--right-count", ga, "Right agents")->capture_default_str();
  gen->add_option("-m,--left-actions", gm, "Left actions")->capture_default_str();
  gen->add_option("-k,--right-actions", gk, "Right actions")->capture_default_str();
  gen->add_option("--generator", gen_name, "gaussian or uniform")->capture_default_str();
  gen->add_option("--outside-option", gen_outside, "Outside option of every agent")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("-o,--output", output_file, "Also write the instance to this file");
  gen->callback([&] {
    const auto g = matchlearn::parse_generator(gen_name);
    if (!g) throw InputError("unknown generator '" + gen_name + "'");
    emit(io::to_json(matchlearn::generate_instance(gp, ga, gm, gk, *g, gen_outside, gen_seed)),
         output_file);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const matchlearn::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const matchlearn::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
