#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vcdf/kernel.hpp"

using namespace vcdf;

TEST(KernelWeight, SupportAndPeak) {
  EXPECT_EQ(kernel_weight(2.1, 2.0), 0.0);
  EXPECT_EQ(kernel_weight(-2.1, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(kernel_weight(0.0, 2.0), 0.75 / 2.0);
  EXPECT_DOUBLE_EQ(kernel_weight(0.0, 2.0, KernelType::Uniform), 0.25);
}

TEST(KernelWeight, IntegratesToOne) {
  for (double h : {0.3, 1.0, 7.5}) {
    const int m = 20000;
    double sum = 0.0;
    for (int k = 0; k <= m; ++k) {
      const double t = -h + 2.0 * h * k / m;
      sum += (k == 0 || k == m ? 0.5 : 1.0) * kernel_weight(t, h);
    }
    EXPECT_NEAR(sum * 2.0 * h / m, 1.0, 1e-6);
  }
}

TEST(KernelWeight, RejectsBadBandwidth) {
  try {
    kernel_weight(0.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidBandwidth);
  }
  EXPECT_THROW(design_vector(1.0, 0.0, -1.0), Error);
}

TEST(DesignVector, Values) {
  EXPECT_EQ(design_vector(3.0, 3.0, 2.0), Eigen::Vector2d(1, 0));
  EXPECT_EQ(design_vector(5.0, 3.0, 2.0), Eigen::Vector2d(1, 1));
  EXPECT_EQ(design_vector(2.0, 3.0, 2.0), Eigen::Vector2d(1, -0.5));
}

TEST(Grid, Validation) {
  EXPECT_THROW(Grid({0.0, 1.0, 1.0}, 2.0), Error);
  EXPECT_THROW(Grid({0.0, 3.0}, 2.0), Error);
  const Grid g = Grid::uniform(5, 8.0);
  EXPECT_EQ(g[4], 8.0);
  EXPECT_EQ(g.max_spacing(), 2.0);
}

TEST(Smoother, ReproducesConstantsAndLines) {
  std::mt19937_64 rng(1);
  const Grid grid = fixture::jittered_grid(25, 10.0, rng);
  for (double h : {1.2, 2.5, 6.0, 30.0}) {
    const auto s = smoother_matrix(grid, h).entries;
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(grid.size());
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(grid.points().data(), grid.size());
    EXPECT_LT((s * one - one).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s * x - x).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Smoother, MatchesPointwiseOracle) {
  std::mt19937_64 rng(2);
  const Grid grid = fixture::jittered_grid(30, 100.0, rng);
  for (double h : {8.0, 15.0, 50.0}) {
    const auto s = smoother_matrix(grid, h).entries;
    EXPECT_LT((s - oracle::smoother(grid, h)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Smoother, GlobalWindowIsLinearRegression) {
  std::mt19937_64 rng(3);
  const Grid grid = fixture::jittered_grid(12, 1.0, rng);
  const auto s = smoother_matrix(grid, 1e6, KernelType::Uniform).entries;
  Eigen::MatrixXd x(grid.size(), 2);
  for (int j = 0; j < grid.size(); ++j) x.row(j) << 1.0, grid[j];
  const Eigen::MatrixXd hat = x * (x.transpose() * x).inverse() * x.transpose();
  EXPECT_LT((s - hat).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Smoother, TooSmallBandwidth) {
  const Grid grid = Grid::uniform(11, 10.0);
  EXPECT_FALSE(bandwidth_feasible(grid, 0.9));
  EXPECT_TRUE(bandwidth_feasible(grid, 1.5));
  try {
    smoother_matrix(grid, 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BandwidthTooSmall);
  }
}

TEST(Smoother, DefaultCandidates) {
  const Grid grid = Grid::uniform(11, 10.0);
  const auto c = default_bandwidth_candidates(grid);
  ASSERT_EQ(c.size(), 20u);
  EXPECT_DOUBLE_EQ(c.front(), 1.5);
  EXPECT_DOUBLE_EQ(c.back(), 5.0);
  for (std::size_t k = 1; k < c.size(); ++k) EXPECT_GT(c[k], c[k - 1]);
}
