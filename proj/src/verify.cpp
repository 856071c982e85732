#include "dvdn/verify.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <sstream>

#include "dvdn/dvdn.hpp"
#include "dvdn/envs.hpp"
#include "dvdn/harness.hpp"
#include "dvdn/stats.hpp"

namespace dvdn {

namespace {

std::string fmt(const char* pattern, double value) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), pattern, value);
  return buf;
}

// Union-find connectivity oracle, independent of CommGraph's BFS check.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
  bool single_component() {
    for (std::size_t i = 1; i < parent.size(); ++i)
      if (find(static_cast<int>(i)) != find(0)) return false;
    return true;
  }
};

bool connected_by_union_find(const CommGraph& g) {
  UnionFind uf(g.n_agents);
  for (const auto& [i, j] : g.edges) uf.unite(i, j);
  return uf.single_component();
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

NetworkSpec random_spec(Rng& rng) {
  NetworkSpec spec;
  spec.input_dim = 2 + rng.uniform_int(5);
  spec.hidden_dims = {3 + rng.uniform_int(6)};
  if (rng.uniform01() < 0.3) spec.hidden_dims.push_back(3 + rng.uniform_int(4));
  spec.output_dim = 2 + rng.uniform_int(4);
  return spec;
}

// Central finite differences of params -> output . seed.
Eigen::VectorXd finite_difference_gradient(const NetworkSpec& spec,
                                           const Eigen::VectorXd& params,
                                           const Eigen::VectorXd& obs,
                                           const Eigen::VectorXd& seed,
                                           double h) {
  Eigen::VectorXd grad(params.size());
  Eigen::VectorXd p = params;
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    const double saved = p[k];
    p[k] = saved + h;
    const double up = forward(spec, p, obs).dot(seed);
    p[k] = saved - h;
    const double down = forward(spec, p, obs).dot(seed);
    p[k] = saved;
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

Batch random_batch(const NetworkSpec& spec, Eigen::Index t_len, Rng& rng) {
  std::vector<Transition> transitions(t_len);
  for (Transition& tr : transitions) {
    tr.obs = random_vector(spec.input_dim, rng);
    tr.next_obs = random_vector(spec.input_dim, rng);
    tr.action = rng.uniform_int(spec.output_dim);
    tr.reward = rng.uniform(-1.0, 1.0);
    tr.done = rng.uniform01() < 0.2;
  }
  return make_batch(transitions);
}

}  // namespace

SuiteResult verify_consensus_suite() {
  const int total_graphs = 10000;
  const int per_n = total_graphs / 7;
  double worst_row_sum = 0.0, worst_conservation = 0.0;
  int consensus_checks = 0;
  Rng payload_rng(split_seed(2024, "consensus-payloads"));
  for (int n = 2; n <= 8; ++n) {
    GraphSampler sampler(split_seed(2024, "verify-graphs/" + std::to_string(n)),
                         n, 0.5);
    for (int k = 0; k < per_n; ++k) {
      const CommGraph g = sampler.sample();
      if (!connected_by_union_find(g))
        return {"consensus", false, "sampled graph is disconnected"};
      const ConsensusWeights w = metropolis_weights(g);
      for (int i = 0; i < n; ++i) {
        worst_row_sum =
            std::max(worst_row_sum, std::abs(w.matrix.row(i).sum() - 1.0));
        for (int j = 0; j < n; ++j) {
          if (w.matrix(i, j) != w.matrix(j, i))
            return {"consensus", false, "weights not symmetric"};
          if (w.matrix(i, j) < 0.0 || w.matrix(i, j) > 1.0)
            return {"consensus", false, "weight outside [0, 1]"};
          const bool should_be_positive = (i == j) || g.has_edge(i, j);
          if (should_be_positive != (w.matrix(i, j) > 0.0))
            return {"consensus", false, "sparsity pattern mismatch"};
        }
      }
      const Eigen::MatrixXd values =
          random_vector(n, payload_rng, 10.0).matrix();
      const Eigen::MatrixXd mixed = consensus_step(w, values);
      const double drift = std::abs(mixed.sum() - values.sum());
      const double bound = 1e-10 * n * values.cwiseAbs().maxCoeff();
      worst_conservation = std::max(worst_conservation, drift / bound);
      if (drift > bound)
        return {"consensus", false, "conservation violated: " + fmt("%g", drift)};
      if (k % 100 == 0) {
        const ConsensusRunResult limit =
            consensus_to_limit(g, values, 500, 1e-6);
        ++consensus_checks;
        if (!limit.converged)
          return {"consensus", false,
                  "fixed-graph consensus missed the mean in 500 iterations"};
      }
    }
  }
  return {"consensus", true,
          std::to_string(total_graphs / 7 * 7) + " graphs, row-sum err " +
              fmt("%.2e", worst_row_sum) + ", " +
              std::to_string(consensus_checks) + " convergence checks"};
}

SuiteResult verify_gradient_suite() {
  Rng rng(split_seed(2024, "gradcheck"));
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const NetworkSpec spec = random_spec(rng);
    const Eigen::VectorXd params = random_vector(spec.param_count(), rng, 0.8);
    const Eigen::VectorXd obs = random_vector(spec.input_dim, rng);
    const Eigen::VectorXd seed = random_vector(spec.output_dim, rng);
    const Eigen::VectorXd bp = backward(spec, params, obs, seed);
    const Eigen::VectorXd fd =
        finite_difference_gradient(spec, params, obs, seed, 1e-5);
    const double rel = (bp - fd).cwiseAbs().maxCoeff() /
                       std::max(1.0, fd.cwiseAbs().maxCoeff());
    worst = std::max(worst, rel);
  }
  return {"gradient-check", worst < 1e-4,
          "100 cases, max relative error " + fmt("%.2e", worst)};
}

SuiteResult verify_fact1_suite() {
  Rng rng(split_seed(2024, "fact1"));
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int n = 2 + rng.uniform_int(3);
    const Eigen::Index t_len = 1 + rng.uniform_int(5);
    std::vector<NetworkSpec> specs(n);
    std::vector<Eigen::VectorXd> params(n), targets(n);
    std::vector<Batch> batches;
    for (int i = 0; i < n; ++i) {
      specs[i] = random_spec(rng);
      params[i] = random_vector(specs[i].param_count(), rng, 0.8);
      targets[i] = random_vector(specs[i].param_count(), rng, 0.8);
      batches.push_back(random_batch(specs[i], t_len, rng));
    }
    const std::vector<Eigen::VectorXd> closed =
        vdn_joint_gradient(specs, params, targets, batches, 0.9);
    const std::vector<Eigen::VectorXd> expanded =
        vdn_joint_gradient_expanded(specs, params, targets, batches, 0.9);
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, (closed[i] - expanded[i]).cwiseAbs().maxCoeff());
  }
  return {"joint-td-factorization", worst < 1e-10,
          "100 instances, max route disagreement " + fmt("%.2e", worst)};
}

SuiteResult verify_complete_graph_equivalence() {
  // Drives the distributed update on the matrix game with the complete
  // topology and compares each round's gradient against the scaled
  // centralized one, plus the resulting optimizer steps.
  ClimbGame env(ClimbGame::default_payoffs());
  const int n = env.spec().n_agents;
  Rng rng(split_seed(2024, "equivalence"));
  std::vector<NetworkSpec> specs(n, NetworkSpec{1, {32}, 3});
  std::vector<AgentLearnerState> states;
  std::vector<AdamState> shadow_adam;
  for (int i = 0; i < n; ++i) {
    states.push_back(AgentLearnerState::init(specs[i], 3e-4, rng));
    shadow_adam.push_back(AdamState::zeros(states[i].params.size(), 3e-4));
  }
  const int batch_episodes = 32;
  std::vector<ReplayBuffer> buffers(n, ReplayBuffer(2000));
  std::vector<const ReplayBuffer*> buffer_ptrs;
  for (const ReplayBuffer& b : buffers) buffer_ptrs.push_back(&b);
  SharedIndexStream stream(split_seed(2024, "equivalence-replay"));
  const CommGraph graph = complete_graph(n);
  const ConsensusWeights weights = metropolis_weights(graph);
  const double gamma = env.spec().gamma;

  double worst_grad = 0.0, worst_cosine = 1.0;
  std::int64_t episode_id = 0;
  int rounds = 0;
  std::vector<int> actions(n);
  while (rounds < 1000) {
    std::vector<Eigen::VectorXd> obs = env.reset(rng.next_u64());
    for (int i = 0; i < n; ++i)
      actions[i] = select_action(specs[i], states[i].params, obs[i], 0.3, rng);
    const StepResult sr = env.step(actions);
    for (int i = 0; i < n; ++i)
      buffers[i].push_episode(
          Episode{episode_id, {{obs[i], actions[i], sr.reward, sr.obs[i], true}}});
    ++episode_id;
    if (buffers[0].size() < static_cast<std::size_t>(batch_episodes)) continue;

    const std::vector<Batch> batches =
        sample_synchronized_batch(buffer_ptrs, batch_episodes, stream);
    const double t_len = static_cast<double>(batches[0].size());

    std::vector<Eigen::VectorXd> params(n), targets(n), tds(n);
    for (int i = 0; i < n; ++i) {
      params[i] = states[i].params;
      targets[i] = states[i].target_params;
      tds[i] = td_vector(specs[i], params[i], targets[i], batches[i], gamma);
    }
    const std::vector<Eigen::VectorXd> vdn_grads =
        vdn_joint_gradient(specs, params, targets, batches, gamma);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd net_jtd = estimate_network_jtd(weights, tds, i);
      const Eigen::VectorXd dvdn_grad = dvdn_gradient_from_td(
          specs[i], params[i], batches[i], tds[i], net_jtd);
      const Eigen::VectorXd scaled = (n / t_len) * vdn_grads[i];
      worst_grad =
          std::max(worst_grad, (dvdn_grad - scaled).cwiseAbs().maxCoeff());

      // Twin optimizers: the real one consumes the distributed gradient,
      // the shadow one the centralized gradient, from the same parameters.
      Eigen::VectorXd shadow_params = states[i].params;
      const Eigen::VectorXd before = states[i].params;
      adam_step(states[i].adam, states[i].params, dvdn_grad);
      adam_step(shadow_adam[i], shadow_params, vdn_grads[i]);
      const Eigen::VectorXd u1 = states[i].params - before;
      const Eigen::VectorXd u2 = shadow_params - before;
      double dot = 0.0, n1 = 0.0, n2 = 0.0;
      for (Eigen::Index k = 0; k < u1.size(); ++k) {
        if (std::abs(dvdn_grad[k]) < 1e-3) continue;
        dot += u1[k] * u2[k];
        n1 += u1[k] * u1[k];
        n2 += u2[k] * u2[k];
      }
      if (n1 > 0.0 && n2 > 0.0)
        worst_cosine =
            std::min(worst_cosine, dot / std::sqrt(n1) / std::sqrt(n2));
      maybe_update_target(TargetUpdateRule{}, states[i].adam.step_count,
                          states[i].params, states[i].target_params);
    }
    ++rounds;
  }
  const bool ok = worst_grad < 1e-8 && worst_cosine > 0.999;
  return {"complete-graph-equivalence", ok,
          "1000 rounds, max gradient gap " + fmt("%.2e", worst_grad) +
              ", min update cosine " + fmt("%.6f", worst_cosine)};
}

SuiteResult verify_gradient_tracking_suite() {
  // Conservation: the trackers' sum equals the current gradients' sum.
  Rng rng(split_seed(2024, "gt-conservation"));
  const int n = 5;
  const Eigen::Index p = 40;
  GraphSampler sampler(split_seed(2024, "gt-graphs"), n, 0.4);
  std::vector<AgentLearnerState> states(n);
  const NetworkSpec dummy{1, {1}, 1};
  for (AgentLearnerState& s : states) {
    s.spec = dummy;
    s.params = random_vector(p, rng);
    s.target_params = s.params;
    s.adam = AdamState::zeros(p, 1e-3);
    s.prev_grad = Eigen::VectorXd::Zero(p);
    s.tracker = Eigen::VectorXd::Zero(p);
  }
  double worst = 0.0;
  for (int round = 0; round < 1000; ++round) {
    const ConsensusWeights w = metropolis_weights(sampler.sample());
    std::vector<Eigen::VectorXd> grads(n);
    Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) {
      grads[i] = random_vector(p, rng);
      grad_sum += grads[i];
    }
    gradient_tracking_update(w, states, grads, StepRule::plain);
    Eigen::VectorXd tracker_sum = Eigen::VectorXd::Zero(p);
    for (const AgentLearnerState& s : states) tracker_sum += s.tracker;
    worst = std::max(worst, (tracker_sum - grad_sum).cwiseAbs().maxCoeff());
  }
  if (worst >= 1e-9)
    return {"gradient-tracking", false,
            "tracker conservation drift " + fmt("%.2e", worst)};

  // Static quadratics (x - c_i)^2 on a ring with plain steps converge to
  // the average minimizer.
  const int ring_n = 5;
  const ConsensusWeights ring = metropolis_weights(ring_graph(ring_n));
  std::vector<AgentLearnerState> quad(ring_n);
  std::vector<double> centers;
  Rng qrng(split_seed(2024, "gt-quadratic"));
  for (AgentLearnerState& s : quad) {
    s.spec = dummy;
    s.params = random_vector(1, qrng, 2.0);
    s.target_params = s.params;
    s.adam = AdamState::zeros(1, 0.05);
    s.prev_grad = Eigen::VectorXd::Zero(1);
    s.tracker = Eigen::VectorXd::Zero(1);
    centers.push_back(qrng.uniform(-2.0, 2.0));
  }
  const double target = mean_of(centers);
  for (int round = 0; round < 3000; ++round) {
    std::vector<Eigen::VectorXd> grads(ring_n);
    for (int i = 0; i < ring_n; ++i)
      grads[i] = 2.0 * (quad[i].params.array() - centers[i]).matrix();
    gradient_tracking_update(ring, quad, grads, StepRule::plain);
  }
  double worst_gap = 0.0;
  for (const AgentLearnerState& s : quad)
    worst_gap = std::max(worst_gap, std::abs(s.params[0] - target));
  return {"gradient-tracking", worst_gap < 1e-5,
          "conservation drift " + fmt("%.2e", worst) +
              ", quadratic consensus gap " + fmt("%.2e", worst_gap)};
}

SuiteResult verify_parameter_sharing_emulation() {
  for (const int n : {2, 4}) {
    Rng rng(split_seed(2024, "ps-emulation/" + std::to_string(n)));
    const NetworkSpec spec{6, {16}, 4};
    Rng init(split_seed(2024, "ps-init"));
    const AgentLearnerState proto = AgentLearnerState::init(spec, 1e-3, init);
    std::vector<AgentLearnerState> states(n, proto);
    const CommGraph graph = complete_graph(n);
    RoundOptions opts;
    opts.gamma = 0.95;
    opts.grad_clip_enabled = false;
    for (int round = 0; round < 100; ++round) {
      const Batch shared = random_batch(spec, 8, rng);
      const std::vector<Batch> batches(n, shared);
      run_dvdn_gt_round(states, batches, graph, opts);
      for (int i = 1; i < n; ++i) {
        if (std::memcmp(states[i].params.data(), states[0].params.data(),
                        sizeof(double) * states[0].params.size()) != 0)
          return {"parameter-sharing-emulation", false,
                  "parameters diverged at round " + std::to_string(round + 1) +
                      " with " + std::to_string(n) + " agents"};
      }
    }
  }
  return {"parameter-sharing-emulation", true,
          "100 rounds bit-identical for 2 and 4 agents"};
}

SuiteResult verify_stats_calibration() {
  Rng rng(split_seed(2024, "stats-calibration"));
  int covered = 0;
  const int reps = 1000;
  std::vector<double> sample(25);
  for (int r = 0; r < reps; ++r) {
    for (double& x : sample) x = rng.gaussian();
    const Interval ci = bootstrap_ci(sample, 0.95, 20000, rng);
    if (ci.low <= 0.0 && ci.high >= 0.0) ++covered;
  }
  const double coverage = static_cast<double>(covered) / reps;

  int matched = 0;
  std::vector<double> a(40), b(40);
  for (int r = 0; r < reps; ++r) {
    for (double& x : a) x = rng.gaussian();
    for (double& x : b) x = rng.gaussian();
    if (rank_compare(a, b, rng) == RankResult::matches) ++matched;
  }
  const double match_rate = static_cast<double>(matched) / reps;
  const bool ok = coverage >= 0.93 && coverage <= 0.97 && match_rate >= 0.93 &&
                  match_rate <= 0.97;
  return {"stats-calibration", ok,
          "coverage " + fmt("%.3f", coverage) + ", match rate " +
              fmt("%.3f", match_rate)};
}

std::vector<SuiteResult> run_verification_suites() {
  return {verify_consensus_suite(),
          verify_gradient_suite(),
          verify_fact1_suite(),
          verify_complete_graph_equivalence(),
          verify_gradient_tracking_suite(),
          verify_parameter_sharing_emulation(),
          verify_stats_calibration()};
}

}  // namespace dvdn
