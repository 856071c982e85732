#pragma once

// Per-agent deep Q-learning machinery: temporal difference vectors,
// epsilon-greedy action selection, episode replay with synchronized
// sampling, target-network maintenance and reward standardization.

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "dvdn/neural.hpp"
#include "dvdn/rng.hpp"

namespace dvdn {

struct Transition {
  Eigen::VectorXd obs;
  int action = 0;
  double reward = 0.0;  // team reward, shared by every agent
  Eigen::VectorXd next_obs;
  bool done = false;
};

// Column-per-transition form used by the update rules.
struct Batch {
  Eigen::MatrixXd obs;       // input_dim x T
  Eigen::VectorXi actions;   // T
  Eigen::VectorXd rewards;   // T
  Eigen::MatrixXd next_obs;  // input_dim x T
  Eigen::ArrayXd not_done;   // T, 1.0 where the transition is non-terminal

  Eigen::Index size() const { return actions.size(); }
};

class RewardStandardizer {
 public:
  explicit RewardStandardizer(bool enabled = true) : enabled_(enabled) {}

  void observe(double reward);
  // (r - mean) / max(stddev, 1e-6); identity when disabled.
  double standardize(double reward) const;

  bool enabled() const { return enabled_; }
  std::int64_t count() const { return count_; }

 private:
  bool enabled_;
  std::int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

Batch make_batch(std::span<const Transition> transitions,
                 const RewardStandardizer* standardizer = nullptr);

struct EpsilonSchedule {
  double eps_start = 1.0;
  double eps_final = 0.05;
  long anneal_steps = 50000;
  double eval_epsilon = 0.05;

  // Linear from eps_start at step 0 to eps_final at anneal_steps, clamped.
  double eps_at(long step) const;
};

// Epsilon-greedy over the Q-values; greedy ties break to the lowest action
// index.
int select_action(const NetworkSpec& spec, const Eigen::VectorXd& params,
                  const Eigen::VectorXd& obs, double eps, Rng& rng);

int argmax_action(const Eigen::VectorXd& q_values);

// Per-transition temporal difference
//   d_t = r + gamma * (1 - done) * max_u Q(o', u; target) - Q(o, a; params).
Eigen::VectorXd td_vector(const NetworkSpec& spec,
                          const Eigen::VectorXd& params,
                          const Eigen::VectorXd& target_params,
                          const Batch& batch, double gamma);
Eigen::VectorXd td_vector(const NetworkSpec& spec,
                          const Eigen::VectorXd& params,
                          const Eigen::VectorXd& target_params,
                          std::span<const Transition> batch, double gamma);

// Gradient of sum_t coeffs_t * Q(o_t, a_t; params); the shared backward
// path under every TD-style loss here.
Eigen::VectorXd q_value_gradient(const NetworkSpec& spec,
                                 const Eigen::VectorXd& params,
                                 const Batch& batch,
                                 const Eigen::VectorXd& coeffs);

// Exact gradient of the mean squared TD (1/T) sum_t d_t^2 with the target
// term held constant.
Eigen::VectorXd iql_gradient(const NetworkSpec& spec,
                             const Eigen::VectorXd& params,
                             const Eigen::VectorXd& target_params,
                             const Batch& batch, double gamma);

struct TargetUpdateRule {
  enum class Mode { hard, soft };
  Mode mode = Mode::soft;
  int period = 200;    // optimizer steps between hard copies
  double rate = 0.01;  // innovation rate of the soft moving average
};

// Hard: full copy every `period` optimizer steps. Soft: exponentially
// weighted moving average every step.
void maybe_update_target(const TargetUpdateRule& rule, long optimizer_steps,
                         const Eigen::VectorXd& params,
                         Eigen::VectorXd& target_params);

struct Episode {
  std::int64_t id = 0;
  std::vector<Transition> steps;
};

// Ring of whole episodes; capacity counts episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push_episode(Episode episode);
  std::size_t size() const { return episodes_.size(); }
  const Episode& episode(std::size_t index) const { return episodes_[index]; }

 private:
  std::size_t capacity_;
  std::deque<Episode> episodes_;
};

// Seeded stream of replay indices, common knowledge across agents. Agents
// consume it in lockstep, so aligned batches need one draw shared by all.
class SharedIndexStream {
 public:
  explicit SharedIndexStream(std::uint64_t seed) : rng_(seed) {}

  std::vector<std::size_t> draw(std::size_t count, std::size_t upper);

 private:
  Rng rng_;
};

// Episode indices plus the common truncation length for one aligned batch.
struct BatchPlan {
  std::vector<std::size_t> episode_indices;
  std::size_t common_len = 0;
};

BatchPlan plan_synchronized_batch(const ReplayBuffer& buffer,
                                  std::size_t batch_episodes,
                                  SharedIndexStream& stream);

Batch assemble_batch(const ReplayBuffer& buffer, const BatchPlan& plan,
                     const RewardStandardizer* standardizer = nullptr);

// Aligned per-agent batches drawn via one shared plan; throws if the
// buffers disagree on episode ids (desynchronized replay).
std::vector<Batch> sample_synchronized_batch(
    std::span<const ReplayBuffer* const> buffers, std::size_t batch_episodes,
    SharedIndexStream& stream,
    const RewardStandardizer* standardizer = nullptr);

}  // namespace dvdn
