#include "dvdn/dvdn.hpp"

#include <stdexcept>

namespace dvdn {

AgentLearnerState AgentLearnerState::init(const NetworkSpec& spec,
                                          double learning_rate, Rng& rng) {
  AgentLearnerState s;
  s.spec = spec;
  s.params = init_params(spec, rng);
  s.target_params = s.params;
  s.adam = AdamState::zeros(s.params.size(), learning_rate);
  s.prev_grad = Eigen::VectorXd::Zero(s.params.size());
  s.tracker = Eigen::VectorXd::Zero(s.params.size());
  return s;
}

Eigen::MatrixXd estimate_network_jtd_all(const ConsensusWeights& weights,
                                         const Eigen::MatrixXd& all_tds) {
  const double n = static_cast<double>(weights.matrix.rows());
  return n * consensus_step(weights, all_tds) - all_tds;
}

Eigen::VectorXd estimate_network_jtd(const ConsensusWeights& weights,
                                     const std::vector<Eigen::VectorXd>& all_tds,
                                     int agent) {
  const int n = static_cast<int>(weights.matrix.rows());
  if (static_cast<int>(all_tds.size()) != n)
    throw std::invalid_argument("estimate_network_jtd: one TD vector per agent");
  const Eigen::Index t_len = all_tds[0].size();
  Eigen::MatrixXd stacked(n, t_len);
  for (int i = 0; i < n; ++i) {
    if (all_tds[i].size() != t_len)
      throw std::invalid_argument("estimate_network_jtd: TD length mismatch");
    stacked.row(i) = all_tds[i].transpose();
  }
  return estimate_network_jtd_all(weights, stacked).row(agent).transpose();
}

Eigen::VectorXd dvdn_gradient_from_td(const NetworkSpec& spec,
                                      const Eigen::VectorXd& params,
                                      const Batch& batch,
                                      const Eigen::VectorXd& td,
                                      const Eigen::VectorXd& net_jtd) {
  if (net_jtd.size() != td.size())
    throw std::invalid_argument("dvdn_gradient: TD length mismatch");
  const double scale = -2.0 / static_cast<double>(batch.size());
  return q_value_gradient(spec, params, batch, scale * (td + net_jtd));
}

Eigen::VectorXd dvdn_gradient(const NetworkSpec& spec,
                              const Eigen::VectorXd& params,
                              const Eigen::VectorXd& target_params,
                              const Batch& batch, double gamma,
                              const Eigen::VectorXd& net_jtd) {
  const Eigen::VectorXd td =
      td_vector(spec, params, target_params, batch, gamma);
  return dvdn_gradient_from_td(spec, params, batch, td, net_jtd);
}

namespace {

std::vector<Eigen::VectorXd> all_td_vectors(
    std::span<const NetworkSpec> specs, std::span<const Eigen::VectorXd> params,
    std::span<const Eigen::VectorXd> target_params,
    std::span<const Batch> batches, double gamma) {
  const std::size_t n = specs.size();
  if (params.size() != n || target_params.size() != n || batches.size() != n)
    throw std::invalid_argument("vdn_joint_gradient: per-agent spans differ");
  std::vector<Eigen::VectorXd> tds(n);
  for (std::size_t i = 0; i < n; ++i) {
    tds[i] = td_vector(specs[i], params[i], target_params[i], batches[i], gamma);
    if (tds[i].size() != tds[0].size())
      throw std::invalid_argument("vdn_joint_gradient: batches not aligned");
  }
  return tds;
}

}  // namespace

std::vector<Eigen::VectorXd> vdn_joint_gradient(
    std::span<const NetworkSpec> specs,
    std::span<const Eigen::VectorXd> params,
    std::span<const Eigen::VectorXd> target_params,
    std::span<const Batch> batches, double gamma) {
  const std::vector<Eigen::VectorXd> tds =
      all_td_vectors(specs, params, target_params, batches, gamma);
  const std::size_t n = specs.size();
  Eigen::VectorXd joint = tds[0];
  for (std::size_t j = 1; j < n; ++j) joint += tds[j];
  const double scale = -2.0 / static_cast<double>(n);
  std::vector<Eigen::VectorXd> grads(n);
  for (std::size_t i = 0; i < n; ++i)
    grads[i] = q_value_gradient(specs[i], params[i], batches[i], scale * joint);
  return grads;
}

std::vector<Eigen::VectorXd> vdn_joint_gradient_expanded(
    std::span<const NetworkSpec> specs,
    std::span<const Eigen::VectorXd> params,
    std::span<const Eigen::VectorXd> target_params,
    std::span<const Batch> batches, double gamma) {
  const std::vector<Eigen::VectorXd> tds =
      all_td_vectors(specs, params, target_params, batches, gamma);
  const std::size_t n = specs.size();
  const double scale = -2.0 / static_cast<double>(n);
  std::vector<Eigen::VectorXd> grads(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Squared own term, then one cross term per teammate.
    grads[i] = q_value_gradient(specs[i], params[i], batches[i], scale * tds[i]);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      grads[i] +=
          q_value_gradient(specs[i], params[i], batches[i], scale * tds[j]);
    }
  }
  return grads;
}

namespace {

void check_synchronized(std::span<const AgentLearnerState> states) {
  for (const AgentLearnerState& s : states) {
    if (s.round != states[0].round || s.initialized != states[0].initialized)
      throw std::runtime_error("gradient tracking: agents desynchronized");
  }
}

void apply_step(AgentLearnerState& s, const Eigen::VectorXd& grad,
                StepRule rule) {
  if (rule == StepRule::adam) {
    adam_step(s.adam, s.params, grad);
  } else {
    s.params -= s.adam.learning_rate * grad;
    ++s.adam.step_count;
  }
}

double disagreement(std::span<const AgentLearnerState> states) {
  const Eigen::Index p = states[0].params.size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (const AgentLearnerState& s : states) mean += s.params;
  mean /= static_cast<double>(states.size());
  double worst = 0.0;
  for (const AgentLearnerState& s : states)
    worst = std::max(worst, (s.params - mean).norm());
  return worst;
}

}  // namespace

void gradient_tracking_update(const ConsensusWeights& weights,
                              std::span<AgentLearnerState> states,
                              const std::vector<Eigen::VectorXd>& new_grads,
                              StepRule rule) {
  const int n = static_cast<int>(states.size());
  if (weights.matrix.rows() != n || static_cast<int>(new_grads.size()) != n)
    throw std::invalid_argument("gradient_tracking_update: size mismatch");
  check_synchronized(states);

  const Eigen::Index p = states[0].params.size();
  if (!states[0].initialized) {
    for (int i = 0; i < n; ++i) {
      states[i].tracker = new_grads[i];
      states[i].initialized = true;
    }
  } else {
    Eigen::MatrixXd prev_trackers(n, p), prev_params(n, p);
    for (int i = 0; i < n; ++i) {
      prev_trackers.row(i) = states[i].tracker.transpose();
      prev_params.row(i) = states[i].params.transpose();
    }
    const Eigen::MatrixXd mixed_trackers = consensus_step(weights, prev_trackers);
    const Eigen::MatrixXd mixed_params = consensus_step(weights, prev_params);
    for (int i = 0; i < n; ++i) {
      // (mixed - prev) + new: with one agent the mixed tracker equals the
      // previous gradient bitwise, so the update collapses to new_grads
      // exactly and the degenerate case matches plain Q-learning.
      states[i].tracker = (mixed_trackers.row(i).transpose() -
                           states[i].prev_grad) +
                          new_grads[i];
      states[i].params = mixed_params.row(i).transpose();
    }
  }
  for (int i = 0; i < n; ++i) {
    apply_step(states[i], states[i].tracker, rule);
    states[i].prev_grad = new_grads[i];
    ++states[i].round;
  }
}

void run_iql_round(AgentLearnerState& state, const Batch& batch,
                   const RoundOptions& opts) {
  Eigen::VectorXd grad = iql_gradient(state.spec, state.params,
                                      state.target_params, batch, opts.gamma);
  if (opts.grad_clip_enabled) clip_gradient_norm(grad, opts.grad_clip_norm);
  adam_step(state.adam, state.params, grad);
  ++state.round;
  maybe_update_target(opts.target, state.adam.step_count, state.params,
                      state.target_params);
}

namespace {

std::vector<Eigen::VectorXd> joint_gradients(
    std::span<AgentLearnerState> states, std::span<const Batch> batches,
    double gamma, bool shared_params) {
  const std::size_t n = batches.size();
  std::vector<NetworkSpec> specs(n);
  std::vector<Eigen::VectorXd> params(n), targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    const AgentLearnerState& s = shared_params ? states[0] : states[i];
    specs[i] = s.spec;
    params[i] = s.params;
    targets[i] = s.target_params;
  }
  return vdn_joint_gradient(specs, params, targets, batches, gamma);
}

}  // namespace

void run_vdn_round(std::span<AgentLearnerState> states,
                   std::span<const Batch> batches, const RoundOptions& opts) {
  if (states.size() != batches.size())
    throw std::invalid_argument("run_vdn_round: one batch per agent");
  std::vector<Eigen::VectorXd> grads =
      joint_gradients(states, batches, opts.gamma, false);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (opts.grad_clip_enabled)
      clip_gradient_norm(grads[i], opts.grad_clip_norm);
    adam_step(states[i].adam, states[i].params, grads[i]);
    ++states[i].round;
    maybe_update_target(opts.target, states[i].adam.step_count,
                        states[i].params, states[i].target_params);
  }
}

void run_vdn_ps_round(AgentLearnerState& shared, std::span<const Batch> batches,
                      const RoundOptions& opts) {
  std::vector<Eigen::VectorXd> grads = joint_gradients(
      std::span<AgentLearnerState>(&shared, 1), batches, opts.gamma, true);
  Eigen::VectorXd total = grads[0];
  for (std::size_t i = 1; i < grads.size(); ++i) total += grads[i];
  if (opts.grad_clip_enabled) clip_gradient_norm(total, opts.grad_clip_norm);
  adam_step(shared.adam, shared.params, total);
  ++shared.round;
  maybe_update_target(opts.target, shared.adam.step_count, shared.params,
                      shared.target_params);
}

namespace {

struct TdStage {
  Eigen::MatrixXd tds;      // N x T
  Eigen::MatrixXd net_jtd;  // N x T
};

TdStage td_consensus_stage(std::span<AgentLearnerState> states,
                           std::span<const Batch> batches,
                           const ConsensusWeights& weights,
                           const RoundOptions& opts) {
  const int n = static_cast<int>(states.size());
  const Eigen::Index t_len = batches[0].size();
  TdStage stage;
  stage.tds.resize(n, t_len);
  for (int i = 0; i < n; ++i) {
    if (batches[i].size() != t_len)
      throw std::invalid_argument("dvdn round: batches not aligned");
    stage.tds.row(i) =
        td_vector(states[i].spec, states[i].params, states[i].target_params,
                  batches[i], opts.gamma)
            .transpose();
  }
  stage.net_jtd = opts.jtd_enabled
                      ? estimate_network_jtd_all(weights, stage.tds)
                      : Eigen::MatrixXd::Zero(n, t_len);
  return stage;
}

RoundDiagnostics make_diagnostics(std::span<const AgentLearnerState> states,
                                  const TdStage& stage,
                                  const std::vector<Eigen::VectorXd>& grads,
                                  bool with_tracker) {
  RoundDiagnostics d;
  const std::size_t n = states.size();
  for (std::size_t i = 0; i < n; ++i) {
    d.grad_norm.push_back(grads[i].norm());
    d.td_norm.push_back(stage.tds.row(i).norm());
    d.net_jtd_norm.push_back(stage.net_jtd.row(i).norm());
    if (with_tracker) d.tracker_norm.push_back(states[i].tracker.norm());
  }
  d.param_disagreement = disagreement(states);
  return d;
}

}  // namespace

RoundDiagnostics run_dvdn_round(std::span<AgentLearnerState> states,
                                std::span<const Batch> batches,
                                const CommGraph& graph,
                                const RoundOptions& opts) {
  if (states.size() != batches.size() ||
      graph.n_agents != static_cast<int>(states.size()))
    throw std::invalid_argument("run_dvdn_round: size mismatch");
  check_synchronized(states);
  const ConsensusWeights weights = metropolis_weights(graph);
  const TdStage stage = td_consensus_stage(states, batches, weights, opts);

  std::vector<Eigen::VectorXd> grads(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    grads[i] = dvdn_gradient_from_td(states[i].spec, states[i].params,
                                     batches[i], stage.tds.row(i).transpose(),
                                     stage.net_jtd.row(i).transpose());
    if (opts.grad_clip_enabled)
      clip_gradient_norm(grads[i], opts.grad_clip_norm);
    adam_step(states[i].adam, states[i].params, grads[i]);
    ++states[i].round;
    maybe_update_target(opts.target, states[i].adam.step_count,
                        states[i].params, states[i].target_params);
  }
  return make_diagnostics(states, stage, grads, false);
}

RoundDiagnostics run_dvdn_gt_round(std::span<AgentLearnerState> states,
                                   std::span<const Batch> batches,
                                   const CommGraph& graph,
                                   const RoundOptions& opts) {
  if (states.size() != batches.size() ||
      graph.n_agents != static_cast<int>(states.size()))
    throw std::invalid_argument("run_dvdn_gt_round: size mismatch");
  for (const AgentLearnerState& s : states)
    if (!(s.spec == states[0].spec))
      throw std::invalid_argument(
          "run_dvdn_gt_round: requires homogeneous agents");
  check_synchronized(states);
  const ConsensusWeights weights = metropolis_weights(graph);
  const TdStage stage = td_consensus_stage(states, batches, weights, opts);

  std::vector<Eigen::VectorXd> grads(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    grads[i] = dvdn_gradient_from_td(states[i].spec, states[i].params,
                                     batches[i], stage.tds.row(i).transpose(),
                                     stage.net_jtd.row(i).transpose());
    if (opts.grad_clip_enabled)
      clip_gradient_norm(grads[i], opts.grad_clip_norm);
  }
  gradient_tracking_update(weights, states, grads, StepRule::adam);
  for (AgentLearnerState& s : states)
    maybe_update_target(opts.target, s.adam.step_count, s.params,
                        s.target_params);
  return make_diagnostics(states, stage, grads, true);
}

}  // namespace dvdn
