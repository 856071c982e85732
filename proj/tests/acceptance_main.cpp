// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Criteria 1-6 and 8 reuse the verification suites; 7 runs the
// desk-scale learning protocol; 9 checks run-level determinism.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "dvdn/harness.hpp"
#include "dvdn/verify.hpp"

namespace {

using dvdn::Algorithm;
using dvdn::ExperimentConfig;

struct Criterion {
  std::string name;
  std::function<dvdn::SuiteResult()> run;
};

ExperimentConfig climb_config(Algorithm algorithm) {
  ExperimentConfig config;
  config.algorithm = algorithm;
  config.env_id = "climb";
  config.total_steps = 100000;
  config.eval_interval = 5000;
  config.eval_episodes = 50;
  config.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  config.hidden_dims = {64};
  config.learning_rate = 0.001;
  config.batch_size = 32;
  config.buffer_capacity = 256;
  config.epsilon.anneal_steps = 20000;
  config.epsilon.eval_epsilon = 0.0;
  config.target.mode = dvdn::TargetUpdateRule::Mode::hard;
  config.reward_standardization = true;
  return config;
}

ExperimentConfig foraging_config(Algorithm algorithm) {
  ExperimentConfig config;
  config.algorithm = algorithm;
  config.env_id = "foraging";
  config.total_steps = 100000;
  config.eval_interval = 5000;
  config.eval_episodes = 50;
  config.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  config.hidden_dims = {64};
  config.learning_rate = 0.0005;
  config.batch_size = 16;
  config.buffer_capacity = 1000;
  config.train_interval = dvdn::TrainInterval::episode;
  config.epsilon.anneal_steps = 50000;
  config.epsilon.eval_epsilon = 0.05;
  config.target.mode = dvdn::TargetUpdateRule::Mode::soft;
  config.reward_standardization = true;
  return config;
}

double per_seed_max_return(const dvdn::SeedRunResult& seed) {
  double best = -1e300;
  for (const std::vector<double>& returns : seed.checkpoint_returns)
    best = std::max(best, dvdn::mean_of(returns));
  return best;
}

std::vector<double> best_checkpoint_samples(const dvdn::RunResult& run) {
  const dvdn::MaxAverageReturn best = dvdn::max_average_return(run.checkpoints);
  return run.checkpoints[best.checkpoint_index].per_seed_mean;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

dvdn::SuiteResult learning_criterion() {
  // Climb: both value-decomposition algorithms must find the optimum at
  // some checkpoint in at least 8 of 10 seeds, and the distributed variant
  // must not rank below the independent learners.
  const dvdn::RunResult climb_vdn = dvdn::train(climb_config(Algorithm::vdn));
  const dvdn::RunResult climb_dvdn = dvdn::train(climb_config(Algorithm::dvdn));
  const dvdn::RunResult climb_iql = dvdn::train(climb_config(Algorithm::iql));
  int vdn_hits = 0, dvdn_hits = 0;
  for (const dvdn::SeedRunResult& s : climb_vdn.seeds)
    if (per_seed_max_return(s) >= 10.0) ++vdn_hits;
  for (const dvdn::SeedRunResult& s : climb_dvdn.seeds)
    if (per_seed_max_return(s) >= 10.0) ++dvdn_hits;
  dvdn::Rng rank_rng(dvdn::split_seed(7, "acceptance-rank"));
  const dvdn::RankResult climb_rank = dvdn::rank_compare(
      best_checkpoint_samples(climb_dvdn), best_checkpoint_samples(climb_iql),
      rank_rng);

  // Greedy-policy agreement between the distributed and centralized runs
  // at matching checkpoints (reported; the two behavior streams decouple
  // chaotically once a single exploratory flip differs).
  long agree = 0, probes = 0;
  const Eigen::VectorXd climb_obs = Eigen::VectorXd::Ones(1);
  for (std::size_t s = 0; s < climb_dvdn.seeds.size(); ++s) {
    const dvdn::SeedRunResult& a = climb_dvdn.seeds[s];
    const dvdn::SeedRunResult& b = climb_vdn.seeds[s];
    for (std::size_t k = 0; k < a.checkpoint_params.size(); ++k) {
      for (int i = 0; i < 2; ++i) {
        agree += dvdn::argmax_action(dvdn::forward(
                     a.specs[i], a.checkpoint_params[k][i], climb_obs)) ==
                 dvdn::argmax_action(dvdn::forward(
                     b.specs[i], b.checkpoint_params[k][i], climb_obs));
        ++probes;
      }
    }
  }
  const double agreement = static_cast<double>(agree) / probes;

  // Foraging: the distributed variant stays within 15% of centralized VDN
  // and within 5% of IQL on the maximum average episodic return.
  const dvdn::RunResult forage_vdn = dvdn::train(foraging_config(Algorithm::vdn));
  const dvdn::RunResult forage_dvdn =
      dvdn::train(foraging_config(Algorithm::dvdn));
  const dvdn::RunResult forage_iql = dvdn::train(foraging_config(Algorithm::iql));
  const double vdn_max = dvdn::max_average_return(forage_vdn.checkpoints).value;
  const double dvdn_max = dvdn::max_average_return(forage_dvdn.checkpoints).value;
  const double iql_max = dvdn::max_average_return(forage_iql.checkpoints).value;

  const bool climb_ok = vdn_hits >= 8 && dvdn_hits >= 8 &&
                        climb_rank != dvdn::RankResult::underperforms;
  const bool forage_ok = dvdn_max >= vdn_max - 0.15 * std::abs(vdn_max) &&
                         dvdn_max >= iql_max - 0.05 * std::abs(iql_max);
  return {"learning",
          climb_ok && forage_ok,
          "climb >=10: vdn " + std::to_string(vdn_hits) + "/10, dvdn " +
              std::to_string(dvdn_hits) + "/10, dvdn-vs-iql " +
              dvdn::to_string(climb_rank) + ", dvdn/vdn greedy agreement " +
              fmt(agreement) + "; foraging max: vdn " + fmt(vdn_max) +
              ", dvdn " + fmt(dvdn_max) + ", iql " + fmt(iql_max)};
}

dvdn::SuiteResult determinism_criterion() {
  ExperimentConfig config = climb_config(Algorithm::dvdn_gt);
  config.total_steps = 3000;
  config.eval_interval = 1000;
  config.eval_episodes = 10;
  config.seeds = {0, 1};
  const std::string a = dvdn::render_metrics_csv(dvdn::train(config));
  const std::string b = dvdn::render_metrics_csv(dvdn::train(config));
  return {"determinism", a == b && !a.empty(),
          a == b ? "two reference-mode runs byte-identical"
                 : "metrics CSVs differ between reruns"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1 consensus/metropolis", dvdn::verify_consensus_suite},
      {"2 gradient correctness", dvdn::verify_gradient_suite},
      {"3 joint-td factorization", dvdn::verify_fact1_suite},
      {"4 complete-graph equivalence", dvdn::verify_complete_graph_equivalence},
      {"5 gradient-tracking invariants", dvdn::verify_gradient_tracking_suite},
      {"6 parameter-sharing emulation", dvdn::verify_parameter_sharing_emulation},
      {"7 desk-scale learning", learning_criterion},
      {"8 statistics calibration", dvdn::verify_stats_calibration},
      {"9 determinism", determinism_criterion},
  };
  bool all_passed = true;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    const dvdn::SuiteResult result = criterion.run();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    char line[512];
    std::snprintf(line, sizeof(line), "[%s] criterion %s: %s (%.1fs)",
                  result.passed ? "PASS" : "FAIL", criterion.name.c_str(),
                  result.detail.c_str(), seconds);
    std::cout << line << std::endl;
    all_passed = all_passed && result.passed;
  }
  return all_passed ? 0 : 1;
}
