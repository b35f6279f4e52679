#include <gtest/gtest.h>

#include <cmath>

#include "gcnkit/topology/topology.hpp"
#include "oracles.hpp"
#include "printers.hpp"
#include "toy_data.hpp"

using namespace gcnkit;

namespace {

SparseMatrix triangle() { return toy::graph(3, {{0, 1}, {1, 2}, {0, 2}}); }
SparseMatrix path3() { return toy::graph(3, {{0, 1}, {1, 2}}); }

}  // namespace

TEST(ClusteringCoefficients, Triangle) {
  EXPECT_EQ(local_clustering_coefficients(triangle()), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(ClusteringCoefficients, Path) {
  EXPECT_EQ(local_clustering_coefficients(path3()), (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(ClusteringCoefficients, HandComputedStar) {
  // Centre 0 with leaves 1..3 plus the leaf edge 1-2: one linked pair of three.
  auto g = toy::graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}});
  auto cc = local_clustering_coefficients(g);
  EXPECT_DOUBLE_EQ(cc[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(cc[1], 1.0);
  EXPECT_DOUBLE_EQ(cc[3], 0.0);
}

TEST(ClusteringCoefficients, MatchesBruteForceOnThirtyRandomGraphs) {
  Rng rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    auto g = oracle::random_graph(rng, n, rng.uniform(0.05, 0.6));
    auto got = local_clustering_coefficients(g);
    auto want = oracle::clustering_coefficients(oracle::to_grid(g));
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(got[i], want[i]) << "trial " << trial << " node " << i;
      EXPECT_GE(got[i], 0.0);
      EXPECT_LE(got[i], 1.0);
    }
  }
}

TEST(ClusteringCoefficients, AsymmetricInputRejected) {
  auto a = SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}});
  EXPECT_THROW(local_clustering_coefficients(a), ContractViolation);
}

TEST(BuildDiagonal, Modes) {
  EXPECT_EQ(build_diagonal(DiagMode::identity, 4), (std::vector<double>{1, 1, 1, 1}));
  auto k3 = local_clustering_coefficients(triangle());
  EXPECT_EQ(build_diagonal(DiagMode::clustering_coefficients, 3, k3), (std::vector<double>{1, 1, 1}));
  auto p3 = local_clustering_coefficients(path3());
  EXPECT_EQ(build_diagonal(DiagMode::clustering_coefficients, 3, p3), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(build_diagonal(DiagMode::clustering_coefficients, 3), ConfigError);
}

TEST(NormalizeAdjacency, SingleEdge) {
  auto p = normalize_adjacency(toy::graph(2, {{0, 1}}), std::vector<double>{1.0, 1.0}, DiagMode::identity);
  EXPECT_LT(max_abs_diff(to_dense(p.matrix), DenseMatrix{{0.5, 0.5}, {0.5, 0.5}}), 1e-15);
}

TEST(NormalizeAdjacency, IsolatedNode) {
  auto p = normalize_adjacency(SparseMatrix(1, 1), std::vector<double>{1.0}, DiagMode::identity);
  EXPECT_EQ(to_dense(p.matrix), (DenseMatrix{{1.0}}));
}

TEST(NormalizeAdjacency, TriangleCcModeIsAllThirds) {
  auto p = build_propagator(triangle(), DiagMode::clustering_coefficients);
  const auto dense = to_dense(p.matrix);
  for (double v : dense.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(NormalizeAdjacency, CcModeZeroRowsForIsolatedNodes) {
  auto g = toy::graph(4, {{0, 1}, {1, 2}, {0, 2}});
  auto p = build_propagator(g, DiagMode::clustering_coefficients);
  EXPECT_EQ(p.matrix.row_nnz(3), 0u);
  EXPECT_TRUE(all_finite(to_dense(p.matrix)));
}

TEST(NormalizeAdjacency, NegativeDiagonalRejected) {
  EXPECT_THROW(normalize_adjacency(path3(), std::vector<double>{1.0, -0.5, 1.0}, DiagMode::clustering_coefficients),
               ContractViolation);
}

TEST(NormalizeAdjacency, MatchesDefinitionSymmetricAndEigenpair) {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    auto g = oracle::random_graph(rng, n, rng.uniform(0.0, 0.4));
    for (auto mode : {DiagMode::identity, DiagMode::clustering_coefficients}) {
      auto p = build_propagator(g, mode);
      auto diag = mode == DiagMode::identity ? std::vector<double>(n, 1.0) : local_clustering_coefficients(g);
      auto dense = to_dense(p.matrix);
      EXPECT_LT(oracle::max_abs_diff(oracle::to_grid(dense), oracle::sym_normalize(oracle::to_grid(g), diag)),
                1e-15);
      EXPECT_LT(max_abs_diff(dense, transpose(dense)), 1e-15);
      for (double v : dense.values()) {
        EXPECT_GE(v, 0.0);
        if (mode == DiagMode::identity) EXPECT_LE(v, 1.0);
      }
      if (mode == DiagMode::identity) {
        DenseMatrix s(n, 1);
        for (std::size_t i = 0; i < n; ++i) s(i, 0) = std::sqrt(static_cast<double>(g.row_nnz(i)) + 1.0);
        EXPECT_LT(max_abs_diff(spmm(p.matrix, s), s), 1e-12);
      }
    }
  }
}

TEST(NormalizeAdjacency, CcModeEqualsIdentityOnCliqueUnions) {
  auto g = toy::graph(7, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {3, 5}, {3, 6}, {4, 5}, {4, 6}, {5, 6}});
  EXPECT_LT(max_abs_diff(to_dense(build_propagator(g, DiagMode::identity).matrix),
                         to_dense(build_propagator(g, DiagMode::clustering_coefficients).matrix)),
            1e-15);
}

TEST(MeanAggregation, RowStochastic) {
  auto p = mean_aggregation_propagator(toy::graph(3, {{0, 1}, {1, 2}}));
  DenseMatrix ones(3, 1, 1.0);
  EXPECT_LT(max_abs_diff(spmm(p, ones), ones), 1e-15);
  EXPECT_DOUBLE_EQ(p.at(1, 0), 1.0 / 3.0);
}
