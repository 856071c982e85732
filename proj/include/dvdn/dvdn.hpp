#pragma once

// Distributed value decomposition: temporal-difference consensus, the
// network-estimated joint TD, gradient tracking, and per-round update
// rules for DVDN, DVDN-GT and the centralized VDN / IQL baselines.
//
// Every round is a synchronous barrier: all agents' inputs are present
// before any output is computed, which is what the single-threaded serial
// implementation below simulates.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "dvdn/comms_graph.hpp"
#include "dvdn/neural.hpp"
#include "dvdn/qcore.hpp"

namespace dvdn {

struct AgentLearnerState {
  NetworkSpec spec;
  Eigen::VectorXd params;
  Eigen::VectorXd target_params;
  AdamState adam;
  Eigen::VectorXd prev_grad;  // g at the previous round
  Eigen::VectorXd tracker;    // z, team-gradient tracker
  bool initialized = false;   // tracker seeded at the first update
  long round = 0;

  static AgentLearnerState init(const NetworkSpec& spec, double learning_rate,
                                Rng& rng);
};

// One consensus step over all agents' TD vectors (rows of `all_tds`),
// then the network estimate  net_jtd_i = N * mixed_i - td_i. Row i of the
// result approximates the sum of the other agents' TDs.
Eigen::MatrixXd estimate_network_jtd_all(const ConsensusWeights& weights,
                                         const Eigen::MatrixXd& all_tds);
Eigen::VectorXd estimate_network_jtd(const ConsensusWeights& weights,
                                     const std::vector<Eigen::VectorXd>& all_tds,
                                     int agent);

// Gradient of (1/T) sum_t (td_t + net_jtd_t)^2 with net_jtd held constant
// (it is data received from the network, not a function of the parameters).
Eigen::VectorXd dvdn_gradient(const NetworkSpec& spec,
                              const Eigen::VectorXd& params,
                              const Eigen::VectorXd& target_params,
                              const Batch& batch, double gamma,
                              const Eigen::VectorXd& net_jtd);
Eigen::VectorXd dvdn_gradient_from_td(const NetworkSpec& spec,
                                      const Eigen::VectorXd& params,
                                      const Batch& batch,
                                      const Eigen::VectorXd& td,
                                      const Eigen::VectorXd& net_jtd);

// Centralized reference: per-agent gradients of the additively factorized
// joint loss (1/N) sum_t (sum_j td_j)^2. The closed form seeds agent i's
// backward pass with -(2/N) * joint_td at the taken action.
std::vector<Eigen::VectorXd> vdn_joint_gradient(
    std::span<const NetworkSpec> specs,
    std::span<const Eigen::VectorXd> params,
    std::span<const Eigen::VectorXd> target_params,
    std::span<const Batch> batches, double gamma);

// Same quantity evaluated along the expanded-square route: own squared
// term plus every cross term back-propagated separately, then summed.
// Agreement of the two routes is the numerical proof that additive
// factorization back-propagates the joint temporal difference.
std::vector<Eigen::VectorXd> vdn_joint_gradient_expanded(
    std::span<const NetworkSpec> specs,
    std::span<const Eigen::VectorXd> params,
    std::span<const Eigen::VectorXd> target_params,
    std::span<const Batch> batches, double gamma);

enum class StepRule { adam, plain };

// One gradient-tracking round for every agent:
//   z_i   <- sum_j w_ij z_j + g_i - g_i_prev   (z_i = g_i on the first round)
//   mix_i <- sum_j w_ij params_j               (params_i on the first round)
//   params_i <- optimizer step from (mix_i, z_i)
// Throws if the agents disagree on round count or initialization.
void gradient_tracking_update(const ConsensusWeights& weights,
                              std::span<AgentLearnerState> states,
                              const std::vector<Eigen::VectorXd>& new_grads,
                              StepRule rule = StepRule::adam);

struct RoundOptions {
  double gamma = 0.99;
  bool grad_clip_enabled = true;
  double grad_clip_norm = 10.0;
  bool jtd_enabled = true;  // false: network term forced to zero (ablation)
  TargetUpdateRule target;
};

struct RoundDiagnostics {
  std::vector<double> grad_norm;
  std::vector<double> tracker_norm;  // empty for rounds without tracking
  std::vector<double> td_norm;
  std::vector<double> net_jtd_norm;
  double param_disagreement = 0.0;  // max_i ||params_i - mean params||
};

// Independent Q-learning: local TD gradient, no communication.
void run_iql_round(AgentLearnerState& state, const Batch& batch,
                   const RoundOptions& opts);

// Centralized VDN baseline (one optimizer per agent).
void run_vdn_round(std::span<AgentLearnerState> states,
                   std::span<const Batch> batches, const RoundOptions& opts);

// Centralized VDN with parameter sharing: one weight set updated with the
// summed per-agent gradients of the joint loss.
void run_vdn_ps_round(AgentLearnerState& shared, std::span<const Batch> batches,
                      const RoundOptions& opts);

// One round of the distributed algorithm: TD consensus over the episode's
// graph, local gradient of the estimated-JTD loss, Adam step.
RoundDiagnostics run_dvdn_round(std::span<AgentLearnerState> states,
                                std::span<const Batch> batches,
                                const CommGraph& graph,
                                const RoundOptions& opts);

// One round of the gradient-tracking variant: three consensus payloads per
// round (TD, tracker, parameters). Requires homogeneous agents.
RoundDiagnostics run_dvdn_gt_round(std::span<AgentLearnerState> states,
                                   std::span<const Batch> batches,
                                   const CommGraph& graph,
                                   const RoundOptions& opts);

}  // namespace dvdn
