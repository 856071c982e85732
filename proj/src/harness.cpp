#include "dvdn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dvdn {

namespace {

constexpr std::uint64_t kStatsRoot = 0x6d65747269637300ULL;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

void check_homogeneous(const EnvSpec& espec, const std::string& what) {
  for (int i = 1; i < espec.n_agents; ++i) {
    if (espec.obs_dims[i] != espec.obs_dims[0] ||
        espec.n_actions[i] != espec.n_actions[0])
      throw std::invalid_argument(what + " requires homogeneous agents");
  }
}

std::vector<NetworkSpec> agent_specs(const ExperimentConfig& config,
                                     const EnvSpec& espec) {
  std::vector<NetworkSpec> specs(espec.n_agents);
  for (int i = 0; i < espec.n_agents; ++i)
    specs[i] = NetworkSpec{espec.obs_dims[i], config.hidden_dims,
                           espec.n_actions[i]};
  return specs;
}

void append_diagnostics(std::ostringstream& os, long round,
                        const RoundDiagnostics& d) {
  for (std::size_t i = 0; i < d.grad_norm.size(); ++i) {
    os << round << "," << i << "," << fmt(d.grad_norm[i]) << ","
       << fmt(d.tracker_norm.empty() ? 0.0 : d.tracker_norm[i]) << ","
       << fmt(d.td_norm[i]) << "," << fmt(d.net_jtd_norm[i]) << ","
       << fmt(d.param_disagreement) << "\n";
  }
}

}  // namespace

std::vector<double> evaluate_policy(const ExperimentConfig& config,
                                    std::span<const NetworkSpec> specs,
                                    std::span<const Eigen::VectorXd> params,
                                    std::uint64_t eval_seed) {
  const std::unique_ptr<Env> env = make_env(config);
  const int n = env->spec().n_agents;
  Rng rng(eval_seed);
  GraphSampler graphs(split_seed(eval_seed, "graph"), n, config.p_extra);
  std::vector<double> returns;
  returns.reserve(config.eval_episodes);
  std::vector<int> actions(n);
  for (int e = 0; e < config.eval_episodes; ++e) {
    (void)graphs.sample();  // topology draw per episode of the evaluation
    std::vector<Eigen::VectorXd> obs = env->reset(rng.next_u64());
    double ret = 0.0;
    while (true) {
      for (int i = 0; i < n; ++i)
        actions[i] = select_action(specs[i], params[i], obs[i],
                                   config.epsilon.eval_epsilon, rng);
      const StepResult sr = env->step(actions);
      ret += sr.reward;
      obs = sr.obs;
      if (sr.done) break;
    }
    returns.push_back(ret);
  }
  return returns;
}

SeedRunResult train_single_seed(const ExperimentConfig& config,
                                std::uint64_t seed) {
  config.validate();
  const std::unique_ptr<Env> env = make_env(config);
  const EnvSpec& espec = env->spec();
  const int n = espec.n_agents;
  const bool param_sharing = config.algorithm == Algorithm::vdn_ps;
  if (param_sharing) check_homogeneous(espec, "vdn_ps");
  if (config.algorithm == Algorithm::dvdn_gt)
    check_homogeneous(espec, "dvdn_gt");

  SeedRunResult result;
  result.seed = seed;
  result.specs = agent_specs(config, espec);

  // Named sub-streams of the per-run seed; see rng.hpp.
  std::vector<AgentLearnerState> states;
  if (param_sharing) {
    Rng init_rng(split_seed(seed, "init/0"));
    states.push_back(AgentLearnerState::init(result.specs[0],
                                             config.learning_rate, init_rng));
  } else {
    for (int i = 0; i < n; ++i) {
      Rng init_rng(split_seed(seed, "init/" + std::to_string(i)));
      states.push_back(AgentLearnerState::init(result.specs[i],
                                               config.learning_rate, init_rng));
    }
  }
  std::vector<Rng> explore;
  for (int i = 0; i < n; ++i)
    explore.emplace_back(split_seed(seed, "explore/" + std::to_string(i)));
  SharedIndexStream replay_stream(split_seed(seed, "replay-indices"));
  Rng env_rng(split_seed(seed, "env"));
  const std::uint64_t eval_root = split_seed(seed, "eval");
  GraphSampler graph_sampler(split_seed(seed, "graph"), n, config.p_extra);
  const bool needs_graph = config.algorithm == Algorithm::dvdn ||
                           config.algorithm == Algorithm::dvdn_gt;
  auto next_graph = [&]() -> CommGraph {
    if (!needs_graph) return CommGraph{n, {}};
    return config.complete_graph_override ? complete_graph(n)
                                          : graph_sampler.sample();
  };

  std::vector<ReplayBuffer> buffers(n, ReplayBuffer(config.buffer_capacity));
  std::vector<const ReplayBuffer*> buffer_ptrs(n);
  for (int i = 0; i < n; ++i) buffer_ptrs[i] = &buffers[i];
  RewardStandardizer standardizer(config.reward_standardization);

  RoundOptions opts;
  opts.gamma = config.gamma;
  opts.grad_clip_enabled = config.grad_clip_enabled;
  opts.grad_clip_norm = config.grad_clip_norm;
  opts.jtd_enabled = config.gt_jtd_enabled;
  opts.target = config.target;

  std::ostringstream diagnostics, trace;
  if (config.diagnostics)
    diagnostics << "round,agent,grad_norm,tracker_norm,td_norm,net_jtd_norm,"
                   "param_disagreement\n";
  if (config.trace_episodes) {
    trace << "episode,t";
    for (int i = 0; i < n; ++i) trace << ",action_" << i;
    trace << ",team_reward\n";
  }

  auto actor_params = [&]() {
    std::vector<Eigen::VectorXd> p;
    p.reserve(n);
    for (int i = 0; i < n; ++i)
      p.push_back(states[param_sharing ? 0 : i].params);
    return p;
  };
  int checkpoint_index = 0;
  auto run_checkpoint = [&](long step) {
    const std::vector<Eigen::VectorXd> params = actor_params();
    result.checkpoint_steps.push_back(step);
    result.checkpoint_returns.push_back(evaluate_policy(
        config, result.specs, params,
        split_seed(eval_root, std::to_string(checkpoint_index))));
    result.checkpoint_params.push_back(params);
    ++checkpoint_index;
  };

  run_checkpoint(0);

  std::vector<Eigen::VectorXd> obs = env->reset(env_rng.next_u64());
  CommGraph graph = next_graph();
  std::vector<std::vector<Transition>> current(n);
  std::int64_t episode_id = 0;
  long round = 0;
  std::vector<int> actions(n);

  for (long step = 0; step < config.total_steps;) {
    const double eps = config.epsilon.eps_at(step);
    for (int i = 0; i < n; ++i)
      actions[i] = select_action(result.specs[i],
                                 states[param_sharing ? 0 : i].params, obs[i],
                                 eps, explore[i]);
    const StepResult sr = env->step(actions);
    standardizer.observe(sr.reward);
    for (int i = 0; i < n; ++i)
      current[i].push_back({obs[i], actions[i], sr.reward, sr.obs[i], sr.done});
    if (config.trace_episodes) {
      trace << episode_id << "," << (current[0].size() - 1);
      for (int i = 0; i < n; ++i) trace << "," << actions[i];
      trace << "," << fmt(sr.reward) << "\n";
    }
    obs = sr.obs;
    ++step;

    const bool episode_end = sr.done;
    if (episode_end) {
      for (int i = 0; i < n; ++i) {
        buffers[i].push_episode(Episode{episode_id, std::move(current[i])});
        current[i].clear();
      }
    }

    const bool train_now =
        (config.train_interval == TrainInterval::step || episode_end) &&
        buffers[0].size() >= static_cast<std::size_t>(config.batch_size);
    if (train_now) {
      const std::vector<Batch> batches = sample_synchronized_batch(
          buffer_ptrs, config.batch_size, replay_stream, &standardizer);
      ++round;
      switch (config.algorithm) {
        case Algorithm::iql:
          for (int i = 0; i < n; ++i) run_iql_round(states[i], batches[i], opts);
          break;
        case Algorithm::vdn:
          run_vdn_round(states, batches, opts);
          break;
        case Algorithm::vdn_ps:
          run_vdn_ps_round(states[0], batches, opts);
          break;
        case Algorithm::dvdn: {
          const RoundDiagnostics d = run_dvdn_round(states, batches, graph, opts);
          if (config.diagnostics) append_diagnostics(diagnostics, round, d);
          break;
        }
        case Algorithm::dvdn_gt: {
          const RoundDiagnostics d =
              run_dvdn_gt_round(states, batches, graph, opts);
          if (config.diagnostics) append_diagnostics(diagnostics, round, d);
          break;
        }
      }
    }

    if (episode_end) {
      ++episode_id;
      obs = env->reset(env_rng.next_u64());
      graph = next_graph();
    }
    if (step % config.eval_interval == 0) run_checkpoint(step);
  }

  result.final_params = actor_params();
  if (config.diagnostics) result.diagnostics_csv = diagnostics.str();
  if (config.trace_episodes) result.trace_csv = trace.str();
  return result;
}

namespace {

std::vector<SeedRunResult> run_all_seeds(const ExperimentConfig& config) {
  const std::size_t n_seeds = config.seeds.size();
  std::vector<SeedRunResult> results(n_seeds);
  if (config.threads <= 1) {
    for (std::size_t i = 0; i < n_seeds; ++i)
      results[i] = train_single_seed(config, config.seeds[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_seeds) return;
      results[i] = train_single_seed(config, config.seeds[i]);
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(config.threads, static_cast<int>(n_seeds));
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return results;
}

Interval ci_or_point(std::span<const double> samples, Rng& rng,
                     int resamples) {
  if (samples.size() < 2) return {samples[0], samples[0]};
  return bootstrap_ci(samples, 0.95, resamples, rng);
}

}  // namespace

RunResult train(const ExperimentConfig& config) {
  config.validate();
  RunResult result;
  result.config = config;
  result.seeds = run_all_seeds(config);

  const std::size_t n_checkpoints = result.seeds[0].checkpoint_steps.size();
  for (std::size_t k = 0; k < n_checkpoints; ++k) {
    CheckpointStats stats;
    stats.step = result.seeds[0].checkpoint_steps[k];
    for (std::size_t s = 0; s < result.seeds.size(); ++s) {
      const std::vector<double>& returns = result.seeds[s].checkpoint_returns[k];
      stats.per_seed_mean.push_back(mean_of(returns));
      Rng rng(split_seed(kStatsRoot,
                         "seed-ci/" + std::to_string(k) + "/" + std::to_string(s)));
      stats.per_seed_ci.push_back(ci_or_point(returns, rng, 2000));
    }
    stats.aggregate_mean = mean_of(stats.per_seed_mean);
    Rng rng(split_seed(kStatsRoot, "agg-ci/" + std::to_string(k)));
    stats.aggregate_ci = ci_or_point(stats.per_seed_mean, rng, 20000);
    result.checkpoints.push_back(std::move(stats));
  }
  return result;
}

MaxAverageReturn max_average_return(
    std::span<const CheckpointStats> checkpoints) {
  if (checkpoints.empty())
    throw std::invalid_argument("max_average_return: no checkpoints");
  std::size_t best = 0;
  for (std::size_t k = 1; k < checkpoints.size(); ++k)
    if (checkpoints[k].aggregate_mean > checkpoints[best].aggregate_mean)
      best = k;
  return {best, checkpoints[best].step, checkpoints[best].aggregate_mean,
          checkpoints[best].aggregate_ci};
}

std::string render_metrics_csv(const RunResult& result) {
  std::ostringstream os;
  os << "run_id,algorithm,env,seed,checkpoint_step,mean_return,ci_low,ci_high\n";
  const std::string prefix = result.config.resolved_run_id() + "," +
                             to_string(result.config.algorithm) + "," +
                             result.config.env_id + ",";
  for (std::size_t k = 0; k < result.checkpoints.size(); ++k) {
    const CheckpointStats& stats = result.checkpoints[k];
    for (std::size_t s = 0; s < result.seeds.size(); ++s) {
      os << prefix << result.config.seeds[s] << "," << stats.step << ","
         << fmt(stats.per_seed_mean[s]) << "," << fmt(stats.per_seed_ci[s].low)
         << "," << fmt(stats.per_seed_ci[s].high) << "\n";
    }
    os << prefix << "all," << stats.step << "," << fmt(stats.aggregate_mean)
       << "," << fmt(stats.aggregate_ci.low) << ","
       << fmt(stats.aggregate_ci.high) << "\n";
  }
  return os.str();
}

std::string write_run_artifact(const RunResult& result,
                               const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path run_dir = fs::path(out_dir) / result.config.resolved_run_id();
  fs::create_directories(run_dir / "checkpoints");
  auto write_file = [](const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
  };
  write_file(run_dir / "config.resolved.cfg", serialize_config(result.config));
  write_file(run_dir / "metrics.csv", render_metrics_csv(result));
  for (const SeedRunResult& seed : result.seeds) {
    for (std::size_t i = 0; i < seed.final_params.size(); ++i) {
      save_params((run_dir / "checkpoints" /
                   ("seed" + std::to_string(seed.seed) + "_agent" +
                    std::to_string(i) + ".bin"))
                      .string(),
                  seed.specs[i], seed.final_params[i]);
    }
    if (!seed.diagnostics_csv.empty())
      write_file(run_dir / ("diagnostics_seed" + std::to_string(seed.seed) +
                            ".csv"),
                 seed.diagnostics_csv);
    if (!seed.trace_csv.empty())
      write_file(run_dir / ("trace_seed" + std::to_string(seed.seed) + ".csv"),
                 seed.trace_csv);
  }
  return run_dir.string();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

}  // namespace

LoadedRun read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open metrics file " + path);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("empty metrics file " + path);
  LoadedRun run;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 8)
      throw std::runtime_error("malformed metrics row in " + path);
    run.run_id = cells[0];
    run.algorithm = cells[1];
    run.env = cells[2];
    const long step = std::stol(cells[4]);
    if (run.steps.empty() || run.steps.back() != step) {
      run.steps.push_back(step);
      run.per_seed_means.emplace_back();
      run.aggregate_mean.push_back(0.0);
      run.aggregate_ci.push_back({});
    }
    const std::size_t k = run.steps.size() - 1;
    if (cells[3] == "all") {
      run.aggregate_mean[k] = std::stod(cells[5]);
      run.aggregate_ci[k] = {std::stod(cells[6]), std::stod(cells[7])};
    } else {
      run.per_seed_means[k].push_back(std::stod(cells[5]));
    }
  }
  if (run.steps.empty())
    throw std::runtime_error("metrics file has no checkpoints: " + path);
  return run;
}

RankResult compare_runs(const LoadedRun& a, const LoadedRun& b, Rng& rng) {
  auto best_index = [](const LoadedRun& run) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < run.aggregate_mean.size(); ++k)
      if (run.aggregate_mean[k] > run.aggregate_mean[best]) best = k;
    return best;
  };
  return rank_compare(a.per_seed_means[best_index(a)],
                      b.per_seed_means[best_index(b)], rng);
}

std::string render_plot_csv(const LoadedRun& run) {
  std::ostringstream os;
  os << "run_id,algorithm,env,checkpoint_step,statistic,value\n";
  const std::string prefix = run.run_id + "," + run.algorithm + "," + run.env + ",";
  for (std::size_t k = 0; k < run.steps.size(); ++k) {
    os << prefix << run.steps[k] << ",mean," << fmt(run.aggregate_mean[k]) << "\n";
    os << prefix << run.steps[k] << ",ci_low," << fmt(run.aggregate_ci[k].low)
       << "\n";
    os << prefix << run.steps[k] << ",ci_high," << fmt(run.aggregate_ci[k].high)
       << "\n";
  }
  return os.str();
}

std::vector<AblationGroupResult> run_ablation(const ExperimentConfig& base) {
  struct GroupSpec {
    const char* name;
    Algorithm algorithm;
    bool jtd;
  };
  // IQL: no communication. JTD: TD consensus only. GT: tracking with the
  // network term zeroed. GT+JTD: the full gradient-tracking algorithm.
  const GroupSpec groups[] = {{"IQL", Algorithm::iql, true},
                              {"JTD", Algorithm::dvdn, true},
                              {"GT", Algorithm::dvdn_gt, false},
                              {"GT+JTD", Algorithm::dvdn_gt, true}};
  std::vector<AblationGroupResult> out;
  for (const GroupSpec& group : groups) {
    ExperimentConfig config = base;
    config.algorithm = group.algorithm;
    config.gt_jtd_enabled = group.jtd;
    config.run_id = base.resolved_run_id() + "-ablate-" + group.name;
    const RunResult run = train(config);

    AblationGroupResult r;
    r.group = group.name;
    const MaxAverageReturn best = max_average_return(run.checkpoints);
    r.best_step = best.step;
    const std::size_t n_ckpt = run.checkpoints.size();
    r.narrowed = n_ckpt < 5;
    r.pool_first = best.checkpoint_index >= 2 ? best.checkpoint_index - 2 : 0;
    r.pool_last = std::min(best.checkpoint_index + 2, n_ckpt - 1);
    for (std::size_t k = r.pool_first; k <= r.pool_last; ++k)
      for (double m : run.checkpoints[k].per_seed_mean)
        r.pooled_samples.push_back(m);
    r.pooled_mean = mean_of(r.pooled_samples);
    Rng rng(split_seed(kStatsRoot, std::string("ablation/") + group.name));
    r.ci = ci_or_point(r.pooled_samples, rng, 20000);
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_ablation_csv(std::span<const AblationGroupResult> groups) {
  std::ostringstream os;
  os << "group,best_checkpoint_step,pooled_checkpoints,pooled_n,mean,ci_low,"
        "ci_high,narrowed\n";
  for (const AblationGroupResult& g : groups) {
    os << g.group << "," << g.best_step << ","
       << (g.pool_last - g.pool_first + 1) << "," << g.pooled_samples.size()
       << "," << fmt(g.pooled_mean) << "," << fmt(g.ci.low) << ","
       << fmt(g.ci.high) << "," << (g.narrowed ? "true" : "false") << "\n";
  }
  return os.str();
}

}  // namespace dvdn
