#pragma once

// Batch experiments: many episodes on freshly generated instances, cumulative
// instability traces per run, and their mean and spread per step.
//
// Files written to the output directory:
//   <policy>_run_NNNN.csv   run_id,t,matching_serialized,mi,cumulative_mi,event_ok
//   <policy>_aggregate.csv  t,mean_cum_mi,std_cum_mi,bound
// Numbers use the shortest representation that round-trips exactly.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

#include "matchlearn/bandit.hpp"
#include "matchlearn/errors.hpp"
#include "matchlearn/market.hpp"

namespace matchlearn {

/// 2 sqrt(4 t m k p a ln(4 t^2 m k p^2 a^2)) + 2.
inline double theoretical_bound(double t, double p, double a, double m, double k) {
  for (double v : {t, p, a, m, k}) {
    if (!(std::isfinite(v) && v >= 1.0)) {
      throw InputError("bound arguments must be finite and at least 1");
    }
  }
  return 2.0 * std::sqrt(4.0 * t * m * k * p * a * std::log(4.0 * t * t * m * k * p * p * a * a)) +
         2.0;
}

inline std::string_view policy_name(PolicyKind policy) {
  switch (policy) {
    case PolicyKind::SelfPlay:
      return "selfplay";
    case PolicyKind::NashResponse:
      return "nash_response";
    case PolicyKind::BestResponse:
      return "best_response";
  }
  return "unknown";
}

inline std::optional<PolicyKind> parse_policy(std::string_view name) {
  for (PolicyKind p : {PolicyKind::SelfPlay, PolicyKind::NashResponse, PolicyKind::BestResponse})
    if (policy_name(p) == name) return p;
  return std::nullopt;
}

inline std::string_view generator_name(InstanceGenerator g) {
  return g == InstanceGenerator::GaussianUnit ? "gaussian" : "uniform";
}

inline std::optional<InstanceGenerator> parse_generator(std::string_view name) {
  if (name == "gaussian") return InstanceGenerator::GaussianUnit;
  if (name == "uniform") return InstanceGenerator::UniformSigned;
  return std::nullopt;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct ExperimentConfig {
  std::size_t left_count = 2;
  std::size_t right_count = 2;
  std::size_t left_actions = 2;
  std::size_t right_actions = 2;
  std::size_t horizon = 1000;
  std::size_t runs = 50;
  std::uint64_t seeds_base = 0;
  PolicyKind policy = PolicyKind::SelfPlay;
  InstanceGenerator generator = InstanceGenerator::GaussianUnit;
  double outside_option = -1.0;
  std::optional<double> delta;  // nullopt: auto_delta
  double noise_scale = 1.0;
  Side proposing_side = Side::Left;
  std::filesystem::path output_dir;  // empty: no files
  std::size_t threads = 0;           // 0: hardware concurrency

  void validate() const {
    if (left_count < 1 || right_count < 1 || left_actions < 1 || right_actions < 1) {
      throw InputError("agent and action counts must be at least 1");
    }
    if (horizon < 1) throw InputError("horizon must be at least 1");
    if (runs < 1) throw InputError("runs must be at least 1");
    if (delta && !(*delta > 0.0 && *delta < 1.0)) throw InputError("delta must lie in (0, 1)");
    if (!std::isfinite(outside_option)) throw InputError("outside option must be finite");
    if (!(std::isfinite(noise_scale) && noise_scale >= 0.0)) {
      throw InputError("noise scale must be finite and non-negative");
    }
  }
};

struct RegretTrace {
  std::vector<std::vector<double>> cumulative;  // [run][t-1], non-decreasing per run
  std::vector<double> mean;                     // [t-1]
  std::vector<double> std_dev;                  // population, [t-1]
  std::vector<double> bound;                    // [t-1]
  std::vector<std::size_t> event_failures;      // [run]
};

inline std::filesystem::path run_trace_path(const ExperimentConfig& config, std::size_t run) {
  char index[16];
  std::snprintf(index, sizeof index, "%04zu", run);
  return config.output_dir /
         (std::string(policy_name(config.policy)) + "_run_" + index + ".csv");
}

inline std::filesystem::path aggregate_trace_path(const ExperimentConfig& config) {
  return config.output_dir / (std::string(policy_name(config.policy)) + "_aggregate.csv");
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

inline void prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  const auto probe = dir / ".matchlearn_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace detail

/// Instance for run `run`: generated from seed seeds_base + run.
inline MarketInstance experiment_instance(const ExperimentConfig& config, std::size_t run) {
  return generate_instance(config.left_count, config.right_count, config.left_actions,
                           config.right_actions, config.generator, config.outside_option,
                           config.seeds_base + run);
}

/// Runs every episode (concurrently across runs) and writes the trace files
/// when an output directory is set. Results do not depend on scheduling.
inline RegretTrace run_experiment(const ExperimentConfig& config) {
  config.validate();
  const bool write = !config.output_dir.empty();
  if (write) detail::prepare_output_dir(config.output_dir);

  RegretTrace trace;
  trace.cumulative.assign(config.runs, {});
  trace.event_failures.assign(config.runs, 0);

  auto run_one = [&](std::size_t run) {
    const MarketInstance instance = experiment_instance(config, run);
    EpisodeConfig episode;
    episode.policy = config.policy;
    episode.horizon = config.horizon;
    episode.delta = config.delta;
    episode.noise_scale = config.noise_scale;
    episode.seed = config.seeds_base + run;
    episode.proposing_side = config.proposing_side;

    std::vector<double>& cumulative = trace.cumulative[run];
    cumulative.reserve(config.horizon);
    std::string csv = "run_id,t,matching_serialized,mi,cumulative_mi,event_ok\n";
    const std::string run_id = std::to_string(run);
    double total = 0.0;
    std::size_t failures = 0;
    run_episode(instance, episode, [&](const StepRecord& r, const ConfidenceState&) {
      total += r.mi;
      cumulative.push_back(total);
      if (!r.event_ok) ++failures;
      if (write) {
        csv += run_id;
        csv += ',';
        csv += std::to_string(r.t);
        csv += ',';
        csv += r.matching.serialize();
        csv += ',';
        csv += format_double(r.mi);
        csv += ',';
        csv += format_double(total);
        csv += r.event_ok ? ",true\n" : ",false\n";
      }
    });
    trace.event_failures[run] = failures;
    if (write) detail::write_file(run_trace_path(config, run), csv);
  };

  std::size_t workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, config.runs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t run = next++; run < config.runs; run = next++) {
      try {
        run_one(run);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.runs;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  const double n = static_cast<double>(config.runs);
  trace.mean.resize(config.horizon);
  trace.std_dev.resize(config.horizon);
  trace.bound.resize(config.horizon);
  for (std::size_t t = 0; t < config.horizon; ++t) {
    double sum = 0.0;
    for (const auto& run : trace.cumulative) sum += run[t];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& run : trace.cumulative) sq += (run[t] - mean) * (run[t] - mean);
    trace.mean[t] = mean;
    trace.std_dev[t] = std::sqrt(sq / n);
    trace.bound[t] = theoretical_bound(static_cast<double>(t + 1),
                                       static_cast<double>(config.left_count),
                                       static_cast<double>(config.right_count),
                                       static_cast<double>(config.left_actions),
                                       static_cast<double>(config.right_actions));
  }

  if (write) {
    std::string csv = "t,mean_cum_mi,std_cum_mi,bound\n";
    for (std::size_t t = 0; t < config.horizon; ++t) {
      csv += std::to_string(t + 1);
      csv += ',';
      csv += format_double(trace.mean[t]);
      csv += ',';
      csv += format_double(trace.std_dev[t]);
      csv += ',';
      csv += format_double(trace.bound[t]);
      csv += '\n';
    }
    detail::write_file(aggregate_trace_path(config), csv);
  }
  return trace;
}

}  // namespace matchlearn
