#pragma once

// Episode-varying communication topology: connected undirected graphs,
// Metropolis consensus weights, and synchronous consensus rounds.
//
// A consensus payload is a dense matrix with one row per agent; a column
// per scalar slot. One consensus step is the matrix product W * X, which
// preserves the column sums because W is doubly stochastic.

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "dvdn/rng.hpp"

namespace dvdn {

struct CommGraph {
  int n_agents = 0;
  // Unordered pairs, normalized to first < second, sorted, no duplicates.
  std::vector<std::pair<int, int>> edges;

  std::vector<int> degrees() const;
  bool has_edge(int i, int j) const;
  bool is_connected() const;
};

// Builds a graph from an arbitrary edge list: normalizes pairs, rejects
// self-loops and out-of-range indices, deduplicates, and requires a single
// connected component. Throws std::invalid_argument on violation.
CommGraph make_graph(int n_agents, std::vector<std::pair<int, int>> edges);

CommGraph complete_graph(int n_agents);
CommGraph path_graph(int n_agents);
CommGraph ring_graph(int n_agents);

struct ConsensusWeights {
  // Symmetric, doubly stochastic, zero off the graph's sparsity pattern.
  Eigen::MatrixXd matrix;
};

// Degree-based weights: alpha(n,m) = 1 / (1 + max(deg n, deg m)) on edges,
// diagonal entries absorb the remainder so each row sums to one. Computable
// distributively from a one-hop degree exchange.
ConsensusWeights metropolis_weights(const CommGraph& g);

// Samples connected graphs: a uniform random spanning tree (random Prufer
// sequence) plus each non-tree edge independently with probability p_extra.
class GraphSampler {
 public:
  GraphSampler(std::uint64_t seed, int n_agents, double p_extra = 0.5)
      : rng_(seed), n_agents_(n_agents), p_extra_(p_extra) {}

  CommGraph sample();

  int n_agents() const { return n_agents_; }

 private:
  Rng rng_;
  int n_agents_;
  double p_extra_;
};

// One synchronous round: output row i = sum_j alpha(i,j) * values row j.
// All agents' payloads must be present (rows == n_agents) and equally sized.
Eigen::MatrixXd consensus_step(const ConsensusWeights& w,
                               const Eigen::MatrixXd& values);

// Convenience overload for per-agent vectors; throws on shape mismatch.
std::vector<Eigen::VectorXd> consensus_step(
    const ConsensusWeights& w, const std::vector<Eigen::VectorXd>& values);

struct ConsensusRunResult {
  Eigen::MatrixXd values;
  int iterations = 0;
  bool converged = false;
};

// Iterates consensus_step on a fixed graph until every entry is within tol
// of its column mean, or max_iters is reached. Test utility; training paths
// always perform a single step.
ConsensusRunResult consensus_to_limit(const CommGraph& g,
                                      const Eigen::MatrixXd& values,
                                      int max_iters, double tol);

// Plain-text debug format used by golden-file tests: edge list followed by
// dense weight-matrix rows.
std::string format_graph(const CommGraph& g);
std::string format_weights(const ConsensusWeights& w);

}  // namespace dvdn
