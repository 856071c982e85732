#include "dvdn/comms_graph.hpp"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <stdexcept>

namespace dvdn {

std::vector<int> CommGraph::degrees() const {
  std::vector<int> d(n_agents, 0);
  for (const auto& [i, j] : edges) {
    ++d[i];
    ++d[j];
  }
  return d;
}

bool CommGraph::has_edge(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

bool CommGraph::is_connected() const {
  if (n_agents <= 1) return true;
  std::vector<std::vector<int>> adj(n_agents);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<char> seen(n_agents, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        q.push(v);
      }
    }
  }
  return visited == n_agents;
}

CommGraph make_graph(int n_agents, std::vector<std::pair<int, int>> edges) {
  if (n_agents < 1) throw std::invalid_argument("make_graph: n_agents < 1");
  for (auto& [i, j] : edges) {
    if (i == j) throw std::invalid_argument("make_graph: self-loop");
    if (i < 0 || j < 0 || i >= n_agents || j >= n_agents)
      throw std::invalid_argument("make_graph: agent index out of range");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  CommGraph g{n_agents, std::move(edges)};
  if (!g.is_connected())
    throw std::invalid_argument("make_graph: graph is not connected");
  return g;
}

CommGraph complete_graph(int n_agents) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n_agents; ++i)
    for (int j = i + 1; j < n_agents; ++j) edges.emplace_back(i, j);
  return make_graph(n_agents, std::move(edges));
}

CommGraph path_graph(int n_agents) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n_agents; ++i) edges.emplace_back(i, i + 1);
  return make_graph(n_agents, std::move(edges));
}

CommGraph ring_graph(int n_agents) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n_agents; ++i) edges.emplace_back(i, i + 1);
  if (n_agents >= 3) edges.emplace_back(0, n_agents - 1);
  return make_graph(n_agents, std::move(edges));
}

ConsensusWeights metropolis_weights(const CommGraph& g) {
  if (!g.is_connected())
    throw std::invalid_argument("metropolis_weights: graph is not connected");
  const int n = g.n_agents;
  const std::vector<int> deg = g.degrees();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : g.edges) {
    const double a = 1.0 / (1.0 + std::max(deg[i], deg[j]));
    w(i, j) = a;
    w(j, i) = a;
  }
  for (int i = 0; i < n; ++i) w(i, i) = 1.0 - (w.row(i).sum() - w(i, i));
  return ConsensusWeights{std::move(w)};
}

// Decodes a Prufer sequence into the edge list of a labeled tree.
static std::vector<std::pair<int, int>> prufer_to_tree(
    const std::vector<int>& seq, int n) {
  std::vector<int> degree(n, 1);
  for (int s : seq) ++degree[s];
  std::vector<std::pair<int, int>> edges;
  edges.reserve(n - 1);
  std::vector<char> used(n, 0);
  for (int s : seq) {
    for (int leaf = 0; leaf < n; ++leaf) {
      if (degree[leaf] == 1 && !used[leaf]) {
        edges.emplace_back(std::min(leaf, s), std::max(leaf, s));
        used[leaf] = 1;
        --degree[s];
        break;
      }
    }
  }
  int u = -1, v = -1;
  for (int i = 0; i < n; ++i) {
    if (degree[i] == 1 && !used[i]) {
      if (u < 0)
        u = i;
      else
        v = i;
    }
  }
  edges.emplace_back(u, v);
  return edges;
}

CommGraph GraphSampler::sample() {
  const int n = n_agents_;
  if (n <= 1) return CommGraph{std::max(n, 1), {}};
  if (n == 2) return make_graph(2, {{0, 1}});

  std::vector<int> seq(n - 2);
  for (int& s : seq) s = rng_.uniform_int(n);
  std::vector<std::pair<int, int>> edges = prufer_to_tree(seq, n);

  std::sort(edges.begin(), edges.end());
  std::vector<std::pair<int, int>> tree = edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool in_tree = std::binary_search(tree.begin(), tree.end(),
                                              std::make_pair(i, j));
      if (!in_tree && rng_.uniform01() < p_extra_) edges.emplace_back(i, j);
    }
  }
  return make_graph(n, std::move(edges));
}

Eigen::MatrixXd consensus_step(const ConsensusWeights& w,
                               const Eigen::MatrixXd& values) {
  if (values.rows() != w.matrix.rows())
    throw std::invalid_argument("consensus_step: one payload row per agent");
  return w.matrix * values;
}

std::vector<Eigen::VectorXd> consensus_step(
    const ConsensusWeights& w, const std::vector<Eigen::VectorXd>& values) {
  const int n = static_cast<int>(w.matrix.rows());
  if (static_cast<int>(values.size()) != n)
    throw std::invalid_argument("consensus_step: one payload per agent");
  const Eigen::Index len = values.empty() ? 0 : values[0].size();
  Eigen::MatrixXd x(n, len);
  for (int i = 0; i < n; ++i) {
    if (values[i].size() != len)
      throw std::invalid_argument("consensus_step: payload shape mismatch");
    x.row(i) = values[i].transpose();
  }
  const Eigen::MatrixXd y = consensus_step(w, x);
  std::vector<Eigen::VectorXd> out(n);
  for (int i = 0; i < n; ++i) out[i] = y.row(i).transpose();
  return out;
}

ConsensusRunResult consensus_to_limit(const CommGraph& g,
                                      const Eigen::MatrixXd& values,
                                      int max_iters, double tol) {
  const ConsensusWeights w = metropolis_weights(g);
  const Eigen::RowVectorXd mean = values.colwise().mean();
  ConsensusRunResult r{values, 0, false};
  auto deviation = [&] {
    return (r.values.rowwise() - mean).cwiseAbs().maxCoeff();
  };
  if (values.size() == 0 || deviation() < tol) {
    r.converged = true;
    return r;
  }
  while (r.iterations < max_iters) {
    r.values = consensus_step(w, r.values);
    ++r.iterations;
    if (deviation() < tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

static std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string format_graph(const CommGraph& g) {
  std::string s = "graph n=" + std::to_string(g.n_agents) + "\n";
  for (const auto& [i, j] : g.edges)
    s += std::to_string(i) + " " + std::to_string(j) + "\n";
  return s;
}

std::string format_weights(const ConsensusWeights& w) {
  const int n = static_cast<int>(w.matrix.rows());
  std::string s = "weights n=" + std::to_string(n) + "\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j) s += " ";
      s += fmt_g17(w.matrix(i, j));
    }
    s += "\n";
  }
  return s;
}

}  // namespace dvdn
