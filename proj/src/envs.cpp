#include "dvdn/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dvdn {

// ---------------------------------------------------------------- foraging

ForagingEnv::ForagingEnv(const Config& cfg) : cfg_(cfg) {
  if (cfg.grid_size < 2 || cfg.n_agents < 1 || cfg.n_fruits < 1 ||
      cfg.sight_radius < 1 || cfg.horizon < 1)
    throw std::invalid_argument("ForagingEnv: bad config");
  if (cfg.grid_size * cfg.grid_size < cfg.n_agents + cfg.n_fruits)
    throw std::invalid_argument("ForagingEnv: grid too small for placement");
  const int window = 2 * cfg.sight_radius + 1;
  const int obs_dim = 2 * window * window + 2;
  spec_.n_agents = cfg.n_agents;
  spec_.obs_dims.assign(cfg.n_agents, obs_dim);
  spec_.n_actions.assign(cfg.n_agents, 6);
  spec_.horizon = cfg.horizon;
  spec_.gamma = cfg.gamma;
}

std::vector<Eigen::VectorXd> ForagingEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  const int cells = cfg_.grid_size * cfg_.grid_size;
  // Distinct cells for agents then fruits, drawn without replacement.
  std::vector<int> chosen;
  auto draw_cell = [&] {
    int c;
    do {
      c = rng.uniform_int(cells);
    } while (std::find(chosen.begin(), chosen.end(), c) != chosen.end());
    chosen.push_back(c);
    return c;
  };
  agents_.clear();
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const int c = draw_cell();
    agents_.push_back({c % cfg_.grid_size, c / cfg_.grid_size,
                       1 + rng.uniform_int(2)});
  }
  // A fruit can have at most four simultaneous adjacent loaders, so its
  // level must be coverable by the four strongest agents.
  std::vector<int> levels;
  for (const AgentInit& a : agents_) levels.push_back(a.level);
  std::sort(levels.rbegin(), levels.rend());
  if (levels.size() > 4) levels.resize(4);
  const int level_budget = std::accumulate(levels.begin(), levels.end(), 0);
  fruits_.clear();
  for (int i = 0; i < cfg_.n_fruits; ++i) {
    const int c = draw_cell();
    fruits_.push_back({c % cfg_.grid_size, c / cfg_.grid_size,
                       1 + rng.uniform_int(level_budget)});
  }
  collected_.assign(fruits_.size(), 0);
  total_fruit_level_ = 0.0;
  for (const FruitInit& f : fruits_) total_fruit_level_ += f.level;
  steps_ = 0;
  return observe_all();
}

std::vector<Eigen::VectorXd> ForagingEnv::load_board(
    const std::vector<AgentInit>& agents, const std::vector<FruitInit>& fruits) {
  if (static_cast<int>(agents.size()) != cfg_.n_agents ||
      static_cast<int>(fruits.size()) != cfg_.n_fruits)
    throw std::invalid_argument("load_board: entity counts must match config");
  agents_ = agents;
  fruits_ = fruits;
  collected_.assign(fruits_.size(), 0);
  total_fruit_level_ = 0.0;
  for (const FruitInit& f : fruits_) total_fruit_level_ += f.level;
  steps_ = 0;
  return observe_all();
}

StepResult ForagingEnv::step(const std::vector<int>& actions) {
  if (static_cast<int>(actions.size()) != cfg_.n_agents)
    throw std::invalid_argument("ForagingEnv::step: one action per agent");
  auto occupied = [&](int x, int y, int skip_agent) {
    for (int i = 0; i < static_cast<int>(agents_.size()); ++i)
      if (i != skip_agent && agents_[i].x == x && agents_[i].y == y) return true;
    for (int i = 0; i < static_cast<int>(fruits_.size()); ++i)
      if (!collected_[i] && fruits_[i].x == x && fruits_[i].y == y) return true;
    return false;
  };
  // Movement resolves in agent order; blocked moves are no-ops.
  static constexpr int dx[] = {0, 0, 0, 1, -1};
  static constexpr int dy[] = {0, -1, 1, 0, 0};
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const int a = actions[i];
    if (a < 1 || a > 4) continue;
    const int nx = agents_[i].x + dx[a];
    const int ny = agents_[i].y + dy[a];
    if (nx < 0 || ny < 0 || nx >= cfg_.grid_size || ny >= cfg_.grid_size)
      continue;
    if (occupied(nx, ny, i)) continue;
    agents_[i].x = nx;
    agents_[i].y = ny;
  }
  // A fruit is collected when the levels of agents loading next to it
  // reach its own level; reward is the fruit's share of the episode total.
  double reward = 0.0;
  for (int f = 0; f < static_cast<int>(fruits_.size()); ++f) {
    if (collected_[f]) continue;
    int loading_level = 0;
    for (int i = 0; i < cfg_.n_agents; ++i) {
      if (actions[i] != 5) continue;
      const int dist = std::abs(agents_[i].x - fruits_[f].x) +
                       std::abs(agents_[i].y - fruits_[f].y);
      if (dist == 1) loading_level += agents_[i].level;
    }
    if (loading_level >= fruits_[f].level) {
      collected_[f] = 1;
      reward += fruits_[f].level / total_fruit_level_;
    }
  }
  ++steps_;
  const bool all_collected =
      std::all_of(collected_.begin(), collected_.end(), [](char c) { return c; });
  StepResult result;
  result.reward = reward;
  result.done = all_collected || steps_ >= cfg_.horizon;
  result.obs = observe_all();
  return result;
}

Eigen::VectorXd ForagingEnv::observe(int agent) const {
  const int r = cfg_.sight_radius;
  const int window = 2 * r + 1;
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(2 * window * window + 2);
  const AgentInit& self = agents_[agent];
  auto cell_index = [&](int wx, int wy) { return wy * window + wx; };
  for (const AgentInit& a : agents_) {
    const int wx = a.x - self.x + r, wy = a.y - self.y + r;
    if (wx >= 0 && wy >= 0 && wx < window && wy < window)
      obs[cell_index(wx, wy)] = a.level;
  }
  for (int f = 0; f < static_cast<int>(fruits_.size()); ++f) {
    if (collected_[f]) continue;
    const int wx = fruits_[f].x - self.x + r, wy = fruits_[f].y - self.y + r;
    if (wx >= 0 && wy >= 0 && wx < window && wy < window)
      obs[window * window + cell_index(wx, wy)] = fruits_[f].level;
  }
  const double denom = cfg_.grid_size - 1;
  obs[2 * window * window] = self.x / denom;
  obs[2 * window * window + 1] = self.y / denom;
  return obs;
}

std::vector<Eigen::VectorXd> ForagingEnv::observe_all() const {
  std::vector<Eigen::VectorXd> obs;
  obs.reserve(cfg_.n_agents);
  for (int i = 0; i < cfg_.n_agents; ++i) obs.push_back(observe(i));
  return obs;
}

// ------------------------------------------------------------------ spread

SpreadEnv::SpreadEnv(const Config& cfg) : cfg_(cfg) {
  if (cfg.n_agents < 1 || cfg.n_landmarks < 1 || cfg.horizon < 1)
    throw std::invalid_argument("SpreadEnv: bad config");
  spec_.n_agents = cfg.n_agents;
  spec_.obs_dims.assign(cfg.n_agents, 6);
  spec_.n_actions.assign(cfg.n_agents, 5);
  spec_.horizon = cfg.horizon;
  spec_.gamma = cfg.gamma;
}

std::vector<Eigen::VectorXd> SpreadEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  agents_.resize(cfg_.n_agents);
  for (auto& a : agents_) a = {rng.uniform01(), rng.uniform01()};
  landmarks_.resize(cfg_.n_landmarks);
  for (auto& l : landmarks_) l = {rng.uniform01(), rng.uniform01()};
  steps_ = 0;
  return observe_all();
}

void SpreadEnv::place(const std::vector<Eigen::Vector2d>& agents,
                      const std::vector<Eigen::Vector2d>& landmarks) {
  if (static_cast<int>(agents.size()) != cfg_.n_agents ||
      static_cast<int>(landmarks.size()) != cfg_.n_landmarks)
    throw std::invalid_argument("place: entity counts must match config");
  agents_ = agents;
  landmarks_ = landmarks;
  steps_ = 0;
}

double SpreadEnv::step_reward() const {
  double reward = 0.0;
  for (const auto& lm : landmarks_) {
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& a : agents_) closest = std::min(closest, (a - lm).norm());
    reward -= closest;
  }
  return reward;
}

StepResult SpreadEnv::step(const std::vector<int>& actions) {
  if (static_cast<int>(actions.size()) != cfg_.n_agents)
    throw std::invalid_argument("SpreadEnv::step: one action per agent");
  static constexpr double ax[] = {0, 1, -1, 0, 0};
  static constexpr double ay[] = {0, 0, 0, 1, -1};
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const int a = actions[i];
    if (a < 0 || a > 4) throw std::invalid_argument("SpreadEnv: bad action");
    agents_[i].x() = std::clamp(agents_[i].x() + cfg_.move_step * ax[a], 0.0, 1.0);
    agents_[i].y() = std::clamp(agents_[i].y() + cfg_.move_step * ay[a], 0.0, 1.0);
  }
  ++steps_;
  StepResult result;
  result.reward = step_reward();
  result.done = steps_ >= cfg_.horizon;
  result.obs = observe_all();
  return result;
}

Eigen::VectorXd SpreadEnv::observe(int agent) const {
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(6);
  const Eigen::Vector2d& self = agents_[agent];
  obs.segment<2>(0) = self;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& lm : landmarks_) {
    const double d = (lm - self).norm();
    if (d < best) {
      best = d;
      obs.segment<2>(2) = lm - self;
    }
  }
  best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < cfg_.n_agents; ++j) {
    if (j == agent) continue;
    const double d = (agents_[j] - self).norm();
    if (d < best) {
      best = d;
      obs.segment<2>(4) = agents_[j] - self;
    }
  }
  return obs;
}

std::vector<Eigen::VectorXd> SpreadEnv::observe_all() const {
  std::vector<Eigen::VectorXd> obs;
  obs.reserve(cfg_.n_agents);
  for (int i = 0; i < cfg_.n_agents; ++i) obs.push_back(observe(i));
  return obs;
}

// ------------------------------------------------------------------- climb

ClimbGame::ClimbGame(const Eigen::Matrix3d& payoffs, double gamma)
    : payoffs_(payoffs) {
  spec_.n_agents = 2;
  spec_.obs_dims = {1, 1};
  spec_.n_actions = {3, 3};
  spec_.horizon = 1;
  spec_.gamma = gamma;
}

Eigen::Matrix3d ClimbGame::default_payoffs() {
  Eigen::Matrix3d p;
  p << 11, -30, 0, -30, 7, 0, 0, 6, 5;
  return p;
}

std::vector<Eigen::VectorXd> ClimbGame::reset(std::uint64_t) {
  return {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
}

StepResult ClimbGame::step(const std::vector<int>& actions) {
  if (actions.size() != 2 || actions[0] < 0 || actions[0] > 2 ||
      actions[1] < 0 || actions[1] > 2)
    throw std::invalid_argument("ClimbGame::step: two actions in {0,1,2}");
  StepResult result;
  result.reward = payoffs_(actions[0], actions[1]);
  result.done = true;
  result.obs = {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
  return result;
}

}  // namespace dvdn
