#pragma once

// Experiment orchestration: training loops for every algorithm, evaluation
// checkpoints, aggregate metrics with bootstrap intervals, run artifacts
// and ablation groups.
//
// Determinism contract: identical config and seeds produce byte-identical
// metrics CSVs. Seeds are independent runs; run.threads > 1 executes them
// concurrently without changing any result.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dvdn/config.hpp"
#include "dvdn/dvdn.hpp"
#include "dvdn/stats.hpp"

namespace dvdn {

struct SeedRunResult {
  std::uint64_t seed = 0;
  std::vector<long> checkpoint_steps;
  // [checkpoint][eval episode] undiscounted episodic return
  std::vector<std::vector<double>> checkpoint_returns;
  // [checkpoint][agent] parameter snapshot
  std::vector<std::vector<Eigen::VectorXd>> checkpoint_params;
  std::vector<NetworkSpec> specs;
  std::vector<Eigen::VectorXd> final_params;
  std::string diagnostics_csv;  // empty unless run.diagnostics
  std::string trace_csv;        // empty unless run.trace_episodes
};

struct CheckpointStats {
  long step = 0;
  std::vector<double> per_seed_mean;
  std::vector<Interval> per_seed_ci;
  double aggregate_mean = 0.0;
  Interval aggregate_ci;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<SeedRunResult> seeds;
  std::vector<CheckpointStats> checkpoints;
};

SeedRunResult train_single_seed(const ExperimentConfig& config,
                                std::uint64_t seed);

// Trains every configured seed and aggregates checkpoint statistics.
RunResult train(const ExperimentConfig& config);

// Greedy evaluation with the configured evaluation epsilon; returns one
// undiscounted episodic return per evaluation episode. Samples a fresh
// communication graph per episode and never touches learner state.
std::vector<double> evaluate_policy(const ExperimentConfig& config,
                                    std::span<const NetworkSpec> specs,
                                    std::span<const Eigen::VectorXd> params,
                                    std::uint64_t eval_seed);

struct MaxAverageReturn {
  std::size_t checkpoint_index = 0;
  long step = 0;
  double value = 0.0;
  Interval ci;
};

// Checkpoint with the highest aggregate mean; ties break to the earliest.
MaxAverageReturn max_average_return(std::span<const CheckpointStats> checkpoints);

std::string render_metrics_csv(const RunResult& result);

// Writes config.resolved.cfg, metrics.csv, per-agent checkpoints and any
// diagnostics/trace files under out_dir/<run_id>/. Returns the run dir.
std::string write_run_artifact(const RunResult& result,
                               const std::string& out_dir);

// Minimal view of a metrics.csv, used by compare/export.
struct LoadedRun {
  std::string run_id, algorithm, env;
  std::vector<long> steps;
  std::vector<std::vector<double>> per_seed_means;  // [checkpoint][seed]
  std::vector<double> aggregate_mean;
  std::vector<Interval> aggregate_ci;
};

LoadedRun read_metrics_csv(const std::string& path);

// Ranks two run artifacts on their per-seed returns at each run's best
// checkpoint.
RankResult compare_runs(const LoadedRun& a, const LoadedRun& b, Rng& rng);

std::string render_plot_csv(const LoadedRun& run);

struct AblationGroupResult {
  std::string group;  // IQL, JTD, GT, GT+JTD
  long best_step = 0;
  std::size_t pool_first = 0, pool_last = 0;  // pooled checkpoint range
  bool narrowed = false;  // fewer than five checkpoints were available
  std::vector<double> pooled_samples;
  double pooled_mean = 0.0;
  Interval ci;
};

// Runs the four ablation groups (no communication; TD consensus only;
// gradient tracking only; both) and pools each group's best checkpoint
// with its two-checkpoint neighborhood across seeds.
std::vector<AblationGroupResult> run_ablation(const ExperimentConfig& base);

std::string render_ablation_csv(std::span<const AblationGroupResult> groups);

}  // namespace dvdn
