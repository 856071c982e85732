#include <numeric>
#include <set>

#include "doctest.h"
#include "dvdn/comms_graph.hpp"

using namespace dvdn;

namespace {

// Union-find connectivity oracle, kept independent of the library's BFS.
bool uf_connected(const CommGraph& g) {
  std::vector<int> parent(g.n_agents);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [i, j] : g.edges) parent[find(i)] = find(j);
  for (int i = 1; i < g.n_agents; ++i)
    if (find(i) != find(0)) return false;
  return true;
}

}  // namespace

TEST_CASE("sampler: trivial sizes") {
  GraphSampler s1(7, 1);
  CHECK(s1.sample().edges.empty());
  GraphSampler s2(7, 2);
  const CommGraph g = s2.sample();
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0] == std::make_pair(0, 1));
}

TEST_CASE("sampler: every draw is connected (union-find oracle)") {
  for (int n = 2; n <= 8; ++n) {
    GraphSampler sampler(split_seed(11, "conn/" + std::to_string(n)), n);
    for (int k = 0; k < 1500; ++k) {
      const CommGraph g = sampler.sample();
      REQUIRE(uf_connected(g));
      std::set<std::pair<int, int>> unique(g.edges.begin(), g.edges.end());
      REQUIRE(unique.size() == g.edges.size());
      for (const auto& [i, j] : g.edges) REQUIRE(i < j);
    }
  }
}

TEST_CASE("sampler: N=4 connectivity over 1000 draws") {
  GraphSampler sampler(99, 4);
  for (int k = 0; k < 1000; ++k) CHECK(uf_connected(sampler.sample()));
}

TEST_CASE("sampler: determinism") {
  GraphSampler a(1234, 6), b(1234, 6);
  for (int k = 0; k < 50; ++k) {
    const CommGraph ga = a.sample(), gb = b.sample();
    CHECK(ga.edges == gb.edges);
    CHECK(format_weights(metropolis_weights(ga)) ==
          format_weights(metropolis_weights(gb)));
  }
}

TEST_CASE("sampler: p_extra=0 yields trees, p_extra=1 complete graphs") {
  GraphSampler trees(5, 6, 0.0);
  for (int k = 0; k < 20; ++k)
    CHECK(trees.sample().edges.size() == 5);  // n-1 edges
  GraphSampler dense(5, 6, 1.0);
  for (int k = 0; k < 20; ++k) CHECK(dense.sample().edges.size() == 15);
}

TEST_CASE("metropolis: complete graph N=3 is uniform") {
  const ConsensusWeights w = metropolis_weights(complete_graph(3));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(w.matrix(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("metropolis: path graph weights") {
  const ConsensusWeights w = metropolis_weights(path_graph(3));
  CHECK(w.matrix(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(w.matrix(1, 2) == doctest::Approx(1.0 / 3.0));
  CHECK(w.matrix(0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(w.matrix(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(w.matrix(2, 2) == doctest::Approx(2.0 / 3.0));
  CHECK(w.matrix(0, 2) == 0.0);
}

TEST_CASE("metropolis: single node") {
  const ConsensusWeights w = metropolis_weights(CommGraph{1, {}});
  REQUIRE(w.matrix.rows() == 1);
  CHECK(w.matrix(0, 0) == 1.0);
}

TEST_CASE("metropolis: row sums, symmetry, range, sparsity") {
  for (int n = 2; n <= 8; ++n) {
    GraphSampler sampler(split_seed(21, "props/" + std::to_string(n)), n);
    for (int k = 0; k < 200; ++k) {
      const CommGraph g = sampler.sample();
      const ConsensusWeights w = metropolis_weights(g);
      for (int i = 0; i < n; ++i) {
        CHECK(std::abs(w.matrix.row(i).sum() - 1.0) < 1e-12);
        for (int j = 0; j < n; ++j) {
          CHECK(w.matrix(i, j) == w.matrix(j, i));
          CHECK(w.matrix(i, j) >= 0.0);
          CHECK(w.matrix(i, j) <= 1.0);
          CHECK(((i == j) || g.has_edge(i, j)) == (w.matrix(i, j) > 0.0));
        }
      }
    }
  }
}

TEST_CASE("consensus_step: complete graph averages in one step") {
  const ConsensusWeights w = metropolis_weights(complete_graph(3));
  Eigen::MatrixXd values(3, 1);
  values << 0, 6, 3;
  const Eigen::MatrixXd out = consensus_step(w, values);
  for (int i = 0; i < 3; ++i) CHECK(out(i, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("consensus_step: path graph hand arithmetic") {
  const ConsensusWeights w = metropolis_weights(path_graph(3));
  Eigen::MatrixXd values(3, 1);
  values << 3, 0, 0;
  const Eigen::MatrixXd out = consensus_step(w, values);
  CHECK(out(0, 0) == doctest::Approx(2.0));
  CHECK(out(1, 0) == doctest::Approx(1.0));
  CHECK(out(2, 0) == doctest::Approx(0.0));
}

TEST_CASE("consensus_step: constant payload is a fixed point") {
  GraphSampler sampler(3, 6);
  const ConsensusWeights w = metropolis_weights(sampler.sample());
  const Eigen::MatrixXd values = Eigen::MatrixXd::Constant(6, 4, 2.5);
  CHECK(((consensus_step(w, values) - values).cwiseAbs().maxCoeff()) < 1e-12);
}

TEST_CASE("consensus_step: conservation on random payloads") {
  Rng rng(5);
  for (int n = 2; n <= 8; ++n) {
    GraphSampler sampler(split_seed(5, "cons/" + std::to_string(n)), n);
    for (int k = 0; k < 100; ++k) {
      const ConsensusWeights w = metropolis_weights(sampler.sample());
      Eigen::MatrixXd values(n, 3);
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) values(i, c) = rng.uniform(-10.0, 10.0);
      const Eigen::MatrixXd out = consensus_step(w, values);
      const double bound = 1e-10 * n * values.cwiseAbs().maxCoeff();
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(out.col(c).sum() - values.col(c).sum()) < bound);
    }
  }
}

TEST_CASE("consensus_step: shape mismatch is a hard error") {
  const ConsensusWeights w = metropolis_weights(complete_graph(3));
  std::vector<Eigen::VectorXd> bad = {Eigen::VectorXd::Zero(2),
                                      Eigen::VectorXd::Zero(3),
                                      Eigen::VectorXd::Zero(2)};
  CHECK_THROWS_AS((void)consensus_step(w, bad), std::invalid_argument);
  CHECK_THROWS_AS((void)consensus_step(w, Eigen::MatrixXd::Zero(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("consensus_to_limit: reaches the mean") {
  Eigen::MatrixXd values(3, 1);
  values << 0, 6, 3;
  const ConsensusRunResult r = consensus_to_limit(path_graph(3), values, 500, 1e-9);
  CHECK(r.converged);
  for (int i = 0; i < 3; ++i) CHECK(r.values(i, 0) == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("consensus_to_limit: identical values converge immediately") {
  const Eigen::MatrixXd values = Eigen::MatrixXd::Constant(4, 2, 1.25);
  const ConsensusRunResult r = consensus_to_limit(ring_graph(4), values, 500, 1e-9);
  CHECK(r.converged);
  CHECK(r.iterations == 0);
}

TEST_CASE("consensus_to_limit: ring N=4 single impulse") {
  Eigen::MatrixXd values(4, 1);
  values << 1, 0, 0, 0;
  const ConsensusRunResult r = consensus_to_limit(ring_graph(4), values, 500, 1e-9);
  CHECK(r.converged);
  for (int i = 0; i < 4; ++i)
    CHECK(r.values(i, 0) == doctest::Approx(0.25).epsilon(1e-7));
}

TEST_CASE("consensus_to_limit: deviation contracts monotonically") {
  GraphSampler sampler(17, 6);
  Rng rng(18);
  for (int k = 0; k < 10; ++k) {
    const CommGraph g = sampler.sample();
    const ConsensusWeights w = metropolis_weights(g);
    Eigen::MatrixXd x(6, 1);
    for (int i = 0; i < 6; ++i) x(i, 0) = rng.uniform(-5.0, 5.0);
    const double mean = x.col(0).mean();
    double prev = (x.array() - mean).abs().maxCoeff();
    int iters = 0;
    while (prev > 1e-6 && iters < 500) {
      x = consensus_step(w, x);
      const double dev = (x.array() - mean).abs().maxCoeff();
      CHECK(dev <= prev + 1e-15);
      prev = dev;
      ++iters;
    }
    CHECK(prev < 1e-6);
  }
}

TEST_CASE("make_graph rejects malformed inputs") {
  CHECK_THROWS_AS(make_graph(3, {{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(make_graph(3, {{0, 3}}), std::invalid_argument);
  CHECK_THROWS_AS(make_graph(4, {{0, 1}, {2, 3}}), std::invalid_argument);
  // duplicates collapse
  const CommGraph g = make_graph(2, {{0, 1}, {1, 0}});
  CHECK(g.edges.size() == 1);
}

TEST_CASE("debug text format") {
  const CommGraph g = path_graph(3);
  CHECK(format_graph(g) == "graph n=3\n0 1\n1 2\n");
  const std::string w = format_weights(metropolis_weights(g));
  CHECK(w.substr(0, 12) == "weights n=3\n");
  // golden row: path weights printed at full precision
  CHECK(w.find("0.66666666666666674 0.33333333333333331 0\n") != std::string::npos);
  CHECK(w.find("0.33333333333333331 0.33333333333333337 0.33333333333333331\n") !=
        std::string::npos);
}
