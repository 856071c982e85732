#pragma once

// Declarative run specification and its flat key=value file format.
//
// Grammar: one `key = value` pair per line, `#` starts a comment, blank
// lines ignored. Keys are dotted lowercase paths (run.*, env.*, learn.*,
// graph.*, gt.*). Lists are comma-separated. Unknown keys are rejected
// with the exact key path. serialize_config emits every key sorted, and
// parsing its output reproduces the configuration exactly.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dvdn/envs.hpp"
#include "dvdn/qcore.hpp"

namespace dvdn {

enum class Algorithm { iql, vdn, vdn_ps, dvdn, dvdn_gt };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

enum class TrainInterval { step, episode };

struct ExperimentConfig {
  // run
  Algorithm algorithm = Algorithm::dvdn;
  long total_steps = 100000;
  long eval_interval = 5000;
  int eval_episodes = 50;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int threads = 1;  // 1 = single-threaded reference mode
  TrainInterval train_interval = TrainInterval::step;
  std::string run_id;  // empty: derived as "<algorithm>-<env>"
  bool diagnostics = false;
  bool trace_episodes = false;

  // env
  std::string env_id = "climb";
  double gamma = 0.99;
  int horizon = 25;
  int n_agents = 2;
  int grid_size = 8;
  int n_fruits = 3;
  int sight_radius = 2;
  int n_landmarks = 2;
  std::vector<double> payoffs = {11, -30, 0, -30, 7, 0, 0, 6, 5};  // row-major

  // learn
  std::vector<int> hidden_dims = {64};
  double learning_rate = 3e-4;
  int batch_size = 32;       // episodes per aligned batch
  int buffer_capacity = 2000;  // episodes
  TargetUpdateRule target;
  EpsilonSchedule epsilon;
  bool reward_standardization = true;
  bool grad_clip_enabled = true;
  double grad_clip_norm = 10.0;

  // graph
  double p_extra = 0.5;
  bool complete_graph_override = false;

  // gt
  bool gt_jtd_enabled = true;

  std::string resolved_run_id() const;
  void validate() const;  // throws std::invalid_argument with the key path
};

// Parses config text; `source` names the origin for error messages.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& source = "<config>");
ExperimentConfig load_config_file(const std::string& path);

// Applies one dotted-key=value override.
void apply_override(ExperimentConfig& config, const std::string& assignment);

// Full resolved configuration, one key per line, sorted.
std::string serialize_config(const ExperimentConfig& config);

// Instantiates the configured environment.
std::unique_ptr<Env> make_env(const ExperimentConfig& config);

}  // namespace dvdn
