#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "stratcube/kernel.hpp"

namespace stratcube {
namespace {

double transposed_residual(const DenseMatrix& b, const std::vector<double>& u) {
  double worst = 0.0;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < b.rows(); ++i) dot += b(i, j) * u[i];
    worst = std::max(worst, std::abs(dot));
  }
  return worst;
}

double norm2(const std::vector<double>& u) {
  double s = 0.0;
  for (double v : u) s += v * v;
  return std::sqrt(s);
}

TEST(KernelVector, OrthogonalComplementOfOnes) {
  const DenseMatrix b(2, 1, {1.0, 1.0});
  const auto u = kernel_vector(b);
  ASSERT_TRUE(u);
  EXPECT_NEAR((*u)[0], 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR((*u)[1], -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(KernelVector, ThreeByTwoHandSolved) {
  // u1 + u3 = 0 and u2 + u3 = 0.
  const DenseMatrix b(3, 2, {1, 0, 0, 1, 1, 1});
  const auto u = kernel_vector(b);
  ASSERT_TRUE(u);
  const double s = 1.0 / std::sqrt(3.0);
  EXPECT_NEAR((*u)[0], s, 1e-15);
  EXPECT_NEAR((*u)[1], s, 1e-15);
  EXPECT_NEAR((*u)[2], -s, 1e-15);
}

TEST(KernelVector, FullRankHasNoKernel) {
  EXPECT_FALSE(kernel_vector(DenseMatrix(1, 1, {1.0})));
  EXPECT_FALSE(kernel_vector(DenseMatrix(2, 2, {1, 2, 3, 4})));
}

TEST(KernelVector, NoConstraintsGivesBasisVector) {
  const auto u = kernel_vector(DenseMatrix(1, 0));
  ASSERT_TRUE(u);
  EXPECT_EQ(*u, std::vector<double>{1.0});

  const auto z = kernel_vector(DenseMatrix(3, 2));
  ASSERT_TRUE(z);
  EXPECT_DOUBLE_EQ(norm2(*z), 1.0);
}

TEST(KernelVector, RankDeficientSquareStillHasKernel) {
  // Duplicated column: rank 1 with 2 rows.
  const DenseMatrix b(2, 2, {1, 1, 2, 2});
  const auto u = kernel_vector(b);
  ASSERT_TRUE(u);
  EXPECT_LT(transposed_residual(b, *u), 1e-14);
}

TEST(KernelVector, ColumnScalesDoNotMatter) {
  const DenseMatrix b(3, 2, {1e-6, 5e5, 2e-6, 1e5, 3e-6, 7e5});
  const auto u = kernel_vector(b);
  ASSERT_TRUE(u);
  EXPECT_LE(transposed_residual(b, *u), 1e-9 * b.norm_inf());
  // Hand-solved on the unscaled system: columns (1,2,3) and (5,1,7).
  const double v0 = 11.0, v1 = 8.0, v2 = -9.0;  // cross product of the two columns
  const double n = std::sqrt(v0 * v0 + v1 * v1 + v2 * v2);
  EXPECT_NEAR((*u)[0], v0 / n, 1e-12);
  EXPECT_NEAR((*u)[1], v1 / n, 1e-12);
  EXPECT_NEAR((*u)[2], v2 / n, 1e-12);
}

TEST(KernelVector, RejectsNonFinite) {
  EXPECT_THROW(kernel_vector(DenseMatrix(2, 1, {1.0, std::nan("")})), std::invalid_argument);
  EXPECT_THROW(kernel_vector(DenseMatrix(2, 1, {1.0, std::numeric_limits<double>::infinity()})),
               std::invalid_argument);
  EXPECT_THROW(kernel_vector(DenseMatrix(0, 0)), std::invalid_argument);
}

TEST(KernelVector, RandomTallMatricesAlwaysHaveKernel) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> size(2, 30);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t r = size(gen);
    DenseMatrix b(r, r - 1);
    for (double& v : b.data()) v = entry(gen);
    const auto u = kernel_vector(b);
    ASSERT_TRUE(u) << "trial " << trial;
    EXPECT_NEAR(norm2(*u), 1.0, 1e-12);
    EXPECT_LE(transposed_residual(b, *u), 1e-9 * b.norm_inf());
  }
}

TEST(KernelVector, SparseIndicatorBlocks) {
  // Two strata indicator columns plus one dense column, 4 rows.
  const DenseMatrix b(4, 3, {1, 0, 2.5,  //
                             1, 0, 1.0,  //
                             0, 1, 3.0,  //
                             0, 1, 0.5});
  const auto u = kernel_vector(b);
  ASSERT_TRUE(u);
  EXPECT_LT(transposed_residual(b, *u), 1e-14);
  EXPECT_NEAR((*u)[0] + (*u)[1], 0.0, 1e-15);
  EXPECT_NEAR((*u)[2] + (*u)[3], 0.0, 1e-15);
}

TEST(LeastSquaresPinv, Identity) {
  const DenseMatrix g(2, 2, {1, 0, 0, 1});
  const auto x = least_squares_pinv(g, std::vector<double>{3, 4});
  EXPECT_NEAR(x[0], 3.0, 1e-14);
  EXPECT_NEAR(x[1], 4.0, 1e-14);
}

TEST(LeastSquaresPinv, RankOneMinimumNorm) {
  const DenseMatrix g(2, 2, {1, 1, 1, 1});
  const auto x = least_squares_pinv(g, std::vector<double>{2, 2});
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 1.0, 1e-14);
}

TEST(LeastSquaresPinv, ZeroMatrix) {
  const auto x = least_squares_pinv(DenseMatrix(2, 2), std::vector<double>{0, 0});
  EXPECT_EQ(x, (std::vector<double>{0, 0}));
  EXPECT_TRUE(least_squares_pinv(DenseMatrix(0, 0), std::vector<double>{}).empty());
}

TEST(LeastSquaresPinv, RejectsBadInput) {
  EXPECT_THROW(least_squares_pinv(DenseMatrix(2, 2, {1, 0, 0, std::nan("")}),
                                  std::vector<double>{1, 1}),
               std::invalid_argument);
  EXPECT_THROW(least_squares_pinv(DenseMatrix(2, 2), std::vector<double>{1}),
               std::invalid_argument);
}

TEST(LeastSquaresPinv, RecoversConsistentSystems) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal;
  const double tol = kDefaultTolerance;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + trial % 8;
    const std::size_t rank = 1 + trial % m;
    // G = Z^T Z with Z of shape rank x m: PSD, possibly singular.
    DenseMatrix z(rank, m);
    for (double& v : z.data()) v = normal(gen);
    DenseMatrix g(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < rank; ++k) g(i, j) += z(k, i) * z(k, j);
    std::vector<double> alpha0(m);
    for (double& v : alpha0) v = normal(gen);
    std::vector<double> rhs(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) rhs[i] += g(i, j) * alpha0[j];

    const auto alpha = least_squares_pinv(g, rhs, tol);
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double gi = 0.0;
      for (std::size_t j = 0; j < m; ++j) gi += g(i, j) * alpha[j];
      worst = std::max(worst, std::abs(gi - rhs[i]));
    }
    double anorm = 0.0;
    for (double v : alpha0) anorm += v * v;
    EXPECT_LE(worst, 10.0 * tol * g.norm_inf() * std::sqrt(anorm)) << "trial " << trial;
  }
}

}  // namespace
}  // namespace stratcube
