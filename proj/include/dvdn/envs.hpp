#pragma once

// Desk-scale cooperative environments with partial observability and one
// shared team reward: a grid-world foraging task, a continuous landmark
// spread task, and a single-step coordination matrix game.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "dvdn/rng.hpp"

namespace dvdn {

struct EnvSpec {
  int n_agents = 1;
  std::vector<int> obs_dims;   // per agent
  std::vector<int> n_actions;  // per agent
  int horizon = 1;
  double gamma = 0.99;
};

struct StepResult {
  std::vector<Eigen::VectorXd> obs;
  double reward = 0.0;  // one scalar for the whole team
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  // Same seed, same episode under identical action sequences.
  virtual std::vector<Eigen::VectorXd> reset(std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<int>& actions) = 0;
};

// Grid-world foraging. Agents carry levels in {1, 2}; a fruit is collected
// when the levels of agents loading while adjacent to it add up to at
// least the fruit's level. Rewards are normalized so a perfect episode
// returns exactly 1. Observations are an egocentric window of agent-level
// and fruit-level channels plus the agent's own normalized position.
// Actions: 0 noop, 1 north, 2 south, 3 east, 4 west, 5 load.
class ForagingEnv final : public Env {
 public:
  struct Config {
    int grid_size = 8;
    int n_agents = 2;
    int n_fruits = 3;
    int sight_radius = 2;
    int horizon = 25;
    double gamma = 0.99;
  };

  explicit ForagingEnv(const Config& cfg);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<Eigen::VectorXd> reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;

  struct AgentInit {
    int x, y, level;
  };
  struct FruitInit {
    int x, y, level;
  };
  // Places an explicit board; used by rule tests.
  std::vector<Eigen::VectorXd> load_board(const std::vector<AgentInit>& agents,
                                          const std::vector<FruitInit>& fruits);

 private:
  Eigen::VectorXd observe(int agent) const;
  std::vector<Eigen::VectorXd> observe_all() const;

  Config cfg_;
  EnvSpec spec_;
  std::vector<AgentInit> agents_;
  std::vector<FruitInit> fruits_;
  std::vector<char> collected_;
  double total_fruit_level_ = 0.0;
  int steps_ = 0;
};

// Continuous unit square; agents nudge themselves toward landmarks. Team
// reward per step is minus the sum over landmarks of the distance to the
// nearest agent. Actions: 0 noop, 1 +x, 2 -x, 3 +y, 4 -y (step 0.05).
class SpreadEnv final : public Env {
 public:
  struct Config {
    int n_agents = 2;
    int n_landmarks = 2;
    int horizon = 25;
    double move_step = 0.05;
    double gamma = 0.99;
  };

  explicit SpreadEnv(const Config& cfg);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<Eigen::VectorXd> reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;

  void place(const std::vector<Eigen::Vector2d>& agents,
             const std::vector<Eigen::Vector2d>& landmarks);
  double step_reward() const;

 private:
  Eigen::VectorXd observe(int agent) const;
  std::vector<Eigen::VectorXd> observe_all() const;

  Config cfg_;
  EnvSpec spec_;
  std::vector<Eigen::Vector2d> agents_;
  std::vector<Eigen::Vector2d> landmarks_;
  int steps_ = 0;
};

// One-step 3x3 coordination game for two agents; both observe a constant
// and the team reward is payoffs(a0, a1).
class ClimbGame final : public Env {
 public:
  explicit ClimbGame(const Eigen::Matrix3d& payoffs, double gamma = 0.99);

  static Eigen::Matrix3d default_payoffs();

  const EnvSpec& spec() const override { return spec_; }
  std::vector<Eigen::VectorXd> reset(std::uint64_t seed) override;
  StepResult step(const std::vector<int>& actions) override;

  const Eigen::Matrix3d& payoffs() const { return payoffs_; }

 private:
  Eigen::Matrix3d payoffs_;
  EnvSpec spec_;
};

}  // namespace dvdn
