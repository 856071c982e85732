#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dvdn/harness.hpp"

using namespace dvdn;

namespace {

ExperimentConfig micro_config() {
  ExperimentConfig config;
  config.algorithm = Algorithm::dvdn;
  config.env_id = "climb";
  config.total_steps = 600;
  config.eval_interval = 200;
  config.eval_episodes = 5;
  config.seeds = {0, 1};
  config.batch_size = 8;
  config.buffer_capacity = 64;
  config.epsilon.anneal_steps = 300;
  return config;
}

}  // namespace

TEST_CASE("train: checkpoint count is floor(total/interval)+1") {
  ExperimentConfig config = micro_config();
  config.total_steps = 1000;
  config.eval_interval = 300;
  config.seeds = {0};
  const RunResult r = train(config);
  CHECK(r.checkpoints.size() == 4);  // 0, 300, 600, 900
  CHECK(r.checkpoints.front().step == 0);
  CHECK(r.checkpoints.back().step == 900);
}

TEST_CASE("train: total_steps=0 yields only the untrained checkpoint") {
  ExperimentConfig config = micro_config();
  config.total_steps = 0;
  config.seeds = {0};
  const RunResult r = train(config);
  CHECK(r.checkpoints.size() == 1);
  CHECK(r.checkpoints[0].step == 0);
}

TEST_CASE("train: byte-identical metrics across reruns") {
  const ExperimentConfig config = micro_config();
  const std::string csv_a = render_metrics_csv(train(config));
  const std::string csv_b = render_metrics_csv(train(config));
  CHECK(csv_a == csv_b);
  CHECK(!csv_a.empty());

  // single-agent independent learner, same contract
  ExperimentConfig solo;
  solo.algorithm = Algorithm::iql;
  solo.env_id = "spread";
  solo.n_agents = 1;
  solo.n_landmarks = 1;
  solo.horizon = 10;
  solo.total_steps = 300;
  solo.eval_interval = 100;
  solo.eval_episodes = 3;
  solo.seeds = {7};
  solo.batch_size = 4;
  solo.buffer_capacity = 32;
  CHECK(render_metrics_csv(train(solo)) == render_metrics_csv(train(solo)));
}

TEST_CASE("train: seed-parallel mode reproduces reference mode") {
  ExperimentConfig config = micro_config();
  const std::string reference = render_metrics_csv(train(config));
  config.threads = 2;
  CHECK(render_metrics_csv(train(config)) == reference);
}

TEST_CASE("train: evaluation frequency does not perturb training") {
  // Same run with different eval loads ends at bit-identical parameters,
  // which is only possible if evaluation leaves learner state alone.
  ExperimentConfig config = micro_config();
  config.seeds = {3};
  config.eval_episodes = 2;
  const RunResult light = train(config);
  config.eval_episodes = 40;
  const RunResult heavy = train(config);
  REQUIRE(light.seeds[0].final_params.size() ==
          heavy.seeds[0].final_params.size());
  for (std::size_t i = 0; i < light.seeds[0].final_params.size(); ++i)
    CHECK(light.seeds[0].final_params[i] == heavy.seeds[0].final_params[i]);
}

TEST_CASE("train: every algorithm runs end to end") {
  for (const Algorithm algorithm :
       {Algorithm::iql, Algorithm::vdn, Algorithm::vdn_ps, Algorithm::dvdn,
        Algorithm::dvdn_gt}) {
    ExperimentConfig config = micro_config();
    config.algorithm = algorithm;
    config.total_steps = 300;
    config.seeds = {0};
    const RunResult r = train(config);
    CHECK(r.checkpoints.size() == 2);
  }
}

TEST_CASE("train: gt group with the network term disabled still runs") {
  ExperimentConfig config = micro_config();
  config.algorithm = Algorithm::dvdn_gt;
  config.gt_jtd_enabled = false;
  config.total_steps = 300;
  config.seeds = {0};
  CHECK(train(config).checkpoints.size() == 2);
}

TEST_CASE("train: single-agent dvdn and dvdn_gt degenerate to iql exactly") {
  ExperimentConfig base;
  base.env_id = "spread";
  base.n_agents = 1;
  base.n_landmarks = 1;
  base.horizon = 10;
  base.total_steps = 400;
  base.eval_interval = 200;
  base.eval_episodes = 2;
  base.seeds = {5};
  base.batch_size = 4;
  base.buffer_capacity = 32;
  base.train_interval = TrainInterval::episode;

  ExperimentConfig iql_cfg = base;
  iql_cfg.algorithm = Algorithm::iql;
  const RunResult iql_run = train(iql_cfg);
  for (const Algorithm algorithm : {Algorithm::dvdn, Algorithm::dvdn_gt}) {
    ExperimentConfig cfg = base;
    cfg.algorithm = algorithm;
    const RunResult run = train(cfg);
    CHECK(run.seeds[0].final_params[0] == iql_run.seeds[0].final_params[0]);
  }
}

TEST_CASE("train: complete-graph dvdn tracks centralized vdn greedy policies") {
  // Twin trainers on one shared experience stream: the distributed update
  // with the complete topology and the centralized one see the same
  // batches, and their greedy policies agree at matching checkpoints.
  ClimbGame env(ClimbGame::default_payoffs());
  Rng rng(split_seed(31, "agreement"));
  const NetworkSpec spec{1, {64}, 3};
  std::vector<AgentLearnerState> dvdn_states, vdn_states;
  for (int i = 0; i < 2; ++i) {
    Rng init(split_seed(31, "agree-init/" + std::to_string(i)));
    dvdn_states.push_back(AgentLearnerState::init(spec, 1e-3, init));
  }
  vdn_states = dvdn_states;
  std::vector<ReplayBuffer> buffers(2, ReplayBuffer(256));
  const std::vector<const ReplayBuffer*> bufs = {&buffers[0], &buffers[1]};
  SharedIndexStream stream(split_seed(31, "agree-replay"));
  const CommGraph graph = complete_graph(2);
  RoundOptions opts;
  opts.target.mode = TargetUpdateRule::Mode::hard;
  opts.grad_clip_enabled = false;  // exact-identity setting

  long agree = 0, total = 0;
  std::int64_t episode = 0;
  const Eigen::VectorXd obs1 = Eigen::VectorXd::Ones(1);
  for (int round = 0; round < 2000; ++round) {
    const EpsilonSchedule eps{1.0, 0.05, 1000, 0.0};
    std::vector<Eigen::VectorXd> obs = env.reset(rng.next_u64());
    std::vector<int> actions(2);
    for (int i = 0; i < 2; ++i)
      actions[i] = select_action(spec, dvdn_states[i].params, obs[i],
                                 eps.eps_at(round), rng);
    const StepResult sr = env.step(actions);
    for (int i = 0; i < 2; ++i)
      buffers[i].push_episode(
          Episode{episode, {{obs[i], actions[i], sr.reward, sr.obs[i], true}}});
    ++episode;
    if (buffers[0].size() < 32) continue;
    const std::vector<Batch> batches = sample_synchronized_batch(bufs, 32, stream);
    run_dvdn_round(dvdn_states, batches, graph, opts);
    run_vdn_round(vdn_states, batches, opts);
    if (round % 25 == 0) {
      for (int i = 0; i < 2; ++i) {
        const int ga = argmax_action(forward(spec, dvdn_states[i].params, obs1));
        const int gb = argmax_action(forward(spec, vdn_states[i].params, obs1));
        agree += ga == gb;
        ++total;
      }
    }
  }
  REQUIRE(total >= 120);
  CHECK(static_cast<double>(agree) >= 0.99 * static_cast<double>(total));
}

TEST_CASE("max_average_return: argmax with earliest tie break") {
  std::vector<CheckpointStats> stats(3);
  stats[0].step = 0;
  stats[0].aggregate_mean = 0.2;
  stats[1].step = 100;
  stats[1].aggregate_mean = 0.9;
  stats[2].step = 200;
  stats[2].aggregate_mean = 0.5;
  CHECK(max_average_return(stats).step == 100);
  CHECK(max_average_return(stats).value == 0.9);

  stats[2].aggregate_mean = 0.9;  // tie: keep the earlier checkpoint
  CHECK(max_average_return(stats).step == 100);

  std::vector<CheckpointStats> single(1);
  single[0].step = 0;
  single[0].aggregate_mean = 0.4;
  CHECK(max_average_return(single).step == 0);

  CHECK_THROWS_AS((void)max_average_return(std::vector<CheckpointStats>{}),
                  std::invalid_argument);
}

TEST_CASE("artifacts: write, reload, compare, export") {
  const ExperimentConfig config = micro_config();
  const RunResult result = train(config);
  namespace fs = std::filesystem;
  const fs::path out = fs::temp_directory_path() / "dvdn_harness_test";
  fs::remove_all(out);
  const std::string run_dir = write_run_artifact(result, out.string());
  CHECK(fs::exists(fs::path(run_dir) / "metrics.csv"));
  CHECK(fs::exists(fs::path(run_dir) / "config.resolved.cfg"));
  CHECK(fs::exists(fs::path(run_dir) / "checkpoints" / "seed0_agent0.bin"));

  const LoadedRun loaded = read_metrics_csv(run_dir + "/metrics.csv");
  CHECK(loaded.run_id == config.resolved_run_id());
  REQUIRE(loaded.steps.size() == result.checkpoints.size());
  for (std::size_t k = 0; k < loaded.steps.size(); ++k) {
    CHECK(loaded.steps[k] == result.checkpoints[k].step);
    REQUIRE(loaded.per_seed_means[k].size() == config.seeds.size());
  }

  Rng rng(split_seed(0, "compare"));
  CHECK(compare_runs(loaded, loaded, rng) == RankResult::matches);

  const std::string plot = render_plot_csv(loaded);
  CHECK(plot.find("run_id,algorithm,env,checkpoint_step,statistic,value") == 0);
  CHECK(plot.find(",mean,") != std::string::npos);

  // the resolved config reproduces the run byte-identically
  const ExperimentConfig reloaded =
      load_config_file(run_dir + "/config.resolved.cfg");
  CHECK(render_metrics_csv(train(reloaded)) == render_metrics_csv(result));
  fs::remove_all(out);
}

TEST_CASE("trace and diagnostics files are emitted on request") {
  ExperimentConfig config = micro_config();
  config.total_steps = 120;
  config.seeds = {0};
  config.diagnostics = true;
  config.trace_episodes = true;
  const RunResult result = train(config);
  const SeedRunResult& seed = result.seeds[0];
  CHECK(seed.trace_csv.find("episode,t,action_0,action_1,team_reward") == 0);
  CHECK(seed.diagnostics_csv.find("round,agent,grad_norm") == 0);
  // one trace row per environment step plus the header
  const long rows = std::count(seed.trace_csv.begin(), seed.trace_csv.end(), '\n');
  CHECK(rows == config.total_steps + 1);
}

TEST_CASE("run_ablation: four groups with pooled samples") {
  ExperimentConfig config = micro_config();
  config.total_steps = 400;
  config.eval_interval = 100;  // 5 checkpoints: full pooling width
  config.eval_episodes = 3;
  config.seeds = {0, 1};
  const std::vector<AblationGroupResult> groups = run_ablation(config);
  REQUIRE(groups.size() == 4);
  CHECK(groups[0].group == "IQL");
  CHECK(groups[1].group == "JTD");
  CHECK(groups[2].group == "GT");
  CHECK(groups[3].group == "GT+JTD");
  for (const AblationGroupResult& g : groups) {
    CHECK_FALSE(g.narrowed);
    const std::size_t width = g.pool_last - g.pool_first + 1;
    CHECK(width >= 3);  // clipped symmetric neighborhood
    CHECK(g.pooled_samples.size() == width * config.seeds.size());
    CHECK(g.ci.low <= g.pooled_mean);
    CHECK(g.ci.high >= g.pooled_mean);
  }
  const std::string csv = render_ablation_csv(groups);
  CHECK(csv.find("GT+JTD") != std::string::npos);
}

TEST_CASE("run_ablation: flags narrow pooling") {
  ExperimentConfig config = micro_config();
  config.total_steps = 200;
  config.eval_interval = 100;  // 3 checkpoints only
  config.eval_episodes = 2;
  config.seeds = {0};
  const std::vector<AblationGroupResult> groups = run_ablation(config);
  for (const AblationGroupResult& g : groups) CHECK(g.narrowed);
}
