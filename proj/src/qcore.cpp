#include "dvdn/qcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dvdn {

void RewardStandardizer::observe(double reward) {
  ++count_;
  const double delta = reward - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta * (reward - mean_);
}

double RewardStandardizer::standardize(double reward) const {
  if (!enabled_ || count_ == 0) return reward;
  const double var = m2_ / static_cast<double>(count_);
  return (reward - mean_) / std::max(std::sqrt(var), 1e-6);
}

Batch make_batch(std::span<const Transition> transitions,
                 const RewardStandardizer* standardizer) {
  if (transitions.empty()) throw std::invalid_argument("make_batch: empty");
  const Eigen::Index obs_dim = transitions[0].obs.size();
  const Eigen::Index t_len = static_cast<Eigen::Index>(transitions.size());
  Batch b;
  b.obs.resize(obs_dim, t_len);
  b.next_obs.resize(obs_dim, t_len);
  b.actions.resize(t_len);
  b.rewards.resize(t_len);
  b.not_done.resize(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Transition& tr = transitions[t];
    if (tr.obs.size() != obs_dim || tr.next_obs.size() != obs_dim)
      throw std::invalid_argument("make_batch: observation dim mismatch");
    b.obs.col(t) = tr.obs;
    b.next_obs.col(t) = tr.next_obs;
    b.actions[t] = tr.action;
    b.rewards[t] =
        standardizer ? standardizer->standardize(tr.reward) : tr.reward;
    b.not_done[t] = tr.done ? 0.0 : 1.0;
  }
  return b;
}

double EpsilonSchedule::eps_at(long step) const {
  if (anneal_steps <= 0 || step >= anneal_steps) return eps_final;
  const double frac = static_cast<double>(step) / static_cast<double>(anneal_steps);
  return eps_start + (eps_final - eps_start) * frac;
}

int argmax_action(const Eigen::VectorXd& q_values) {
  int best = 0;
  for (int a = 1; a < q_values.size(); ++a)
    if (q_values[a] > q_values[best]) best = a;
  return best;
}

int select_action(const NetworkSpec& spec, const Eigen::VectorXd& params,
                  const Eigen::VectorXd& obs, double eps, Rng& rng) {
  if (rng.uniform01() < eps) return rng.uniform_int(spec.output_dim);
  return argmax_action(forward(spec, params, obs));
}

Eigen::VectorXd td_vector(const NetworkSpec& spec,
                          const Eigen::VectorXd& params,
                          const Eigen::VectorXd& target_params,
                          const Batch& batch, double gamma) {
  if (batch.size() == 0) throw std::invalid_argument("td_vector: empty batch");
  const Eigen::MatrixXd q = forward_batch(spec, params, batch.obs);
  const Eigen::MatrixXd q_next =
      forward_batch(spec, target_params, batch.next_obs);
  const Eigen::Index t_len = batch.size();
  Eigen::VectorXd td(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const double bootstrap = batch.not_done[t] * q_next.col(t).maxCoeff();
    td[t] = batch.rewards[t] + gamma * bootstrap - q(batch.actions[t], t);
  }
  return td;
}

Eigen::VectorXd td_vector(const NetworkSpec& spec,
                          const Eigen::VectorXd& params,
                          const Eigen::VectorXd& target_params,
                          std::span<const Transition> batch, double gamma) {
  return td_vector(spec, params, target_params, make_batch(batch), gamma);
}

Eigen::VectorXd q_value_gradient(const NetworkSpec& spec,
                                 const Eigen::VectorXd& params,
                                 const Batch& batch,
                                 const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != batch.size())
    throw std::invalid_argument("q_value_gradient: coefficient length");
  const ForwardTrace trace = forward_trace(spec, params, batch.obs);
  Eigen::MatrixXd seed = Eigen::MatrixXd::Zero(spec.output_dim, batch.size());
  for (Eigen::Index t = 0; t < batch.size(); ++t)
    seed(batch.actions[t], t) = coeffs[t];
  return backward_batch(spec, params, trace, seed);
}

Eigen::VectorXd iql_gradient(const NetworkSpec& spec,
                             const Eigen::VectorXd& params,
                             const Eigen::VectorXd& target_params,
                             const Batch& batch, double gamma) {
  const Eigen::VectorXd td = td_vector(spec, params, target_params, batch, gamma);
  const double scale = -2.0 / static_cast<double>(batch.size());
  return q_value_gradient(spec, params, batch, scale * td);
}

void maybe_update_target(const TargetUpdateRule& rule, long optimizer_steps,
                         const Eigen::VectorXd& params,
                         Eigen::VectorXd& target_params) {
  if (rule.mode == TargetUpdateRule::Mode::soft) {
    target_params = (1.0 - rule.rate) * target_params + rule.rate * params;
  } else if (rule.period > 0 && optimizer_steps % rule.period == 0) {
    target_params = params;
  }
}

void ReplayBuffer::push_episode(Episode episode) {
  if (episode.steps.empty())
    throw std::invalid_argument("push_episode: empty episode");
  episodes_.push_back(std::move(episode));
  while (episodes_.size() > capacity_) episodes_.pop_front();
}

std::vector<std::size_t> SharedIndexStream::draw(std::size_t count,
                                                 std::size_t upper) {
  if (upper == 0) throw std::invalid_argument("SharedIndexStream: empty range");
  std::vector<std::size_t> out(count);
  for (std::size_t& v : out)
    v = static_cast<std::size_t>(rng_.uniform_int(static_cast<int>(upper)));
  return out;
}

BatchPlan plan_synchronized_batch(const ReplayBuffer& buffer,
                                  std::size_t batch_episodes,
                                  SharedIndexStream& stream) {
  if (buffer.size() < batch_episodes)
    throw std::invalid_argument("plan_synchronized_batch: not enough episodes");
  BatchPlan plan;
  plan.episode_indices = stream.draw(batch_episodes, buffer.size());
  plan.common_len = buffer.episode(plan.episode_indices[0]).steps.size();
  for (std::size_t idx : plan.episode_indices)
    plan.common_len = std::min(plan.common_len, buffer.episode(idx).steps.size());
  return plan;
}

Batch assemble_batch(const ReplayBuffer& buffer, const BatchPlan& plan,
                     const RewardStandardizer* standardizer) {
  std::vector<Transition> flat;
  flat.reserve(plan.episode_indices.size() * plan.common_len);
  for (std::size_t idx : plan.episode_indices) {
    const Episode& ep = buffer.episode(idx);
    for (std::size_t t = 0; t < plan.common_len; ++t)
      flat.push_back(ep.steps[t]);
  }
  return make_batch(flat, standardizer);
}

std::vector<Batch> sample_synchronized_batch(
    std::span<const ReplayBuffer* const> buffers, std::size_t batch_episodes,
    SharedIndexStream& stream, const RewardStandardizer* standardizer) {
  if (buffers.empty())
    throw std::invalid_argument("sample_synchronized_batch: no buffers");
  const BatchPlan plan =
      plan_synchronized_batch(*buffers[0], batch_episodes, stream);
  for (const ReplayBuffer* buf : buffers) {
    if (buf->size() != buffers[0]->size())
      throw std::invalid_argument("sample_synchronized_batch: buffer sizes differ");
    for (std::size_t idx : plan.episode_indices)
      if (buf->episode(idx).id != buffers[0]->episode(idx).id)
        throw std::invalid_argument(
            "sample_synchronized_batch: episode ids desynchronized");
  }
  std::vector<Batch> out;
  out.reserve(buffers.size());
  for (const ReplayBuffer* buf : buffers)
    out.push_back(assemble_batch(*buf, plan, standardizer));
  return out;
}

}  // namespace dvdn
