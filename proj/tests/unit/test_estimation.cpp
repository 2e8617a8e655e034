#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vcdf/estimation.hpp"
#include "vcdf/simulation.hpp"

using namespace vcdf;

namespace {

double sup_error(const CoefficientField& f, const std::function<Eigen::MatrixXd(double)>& B) {
  double e = 0.0;
  for (int j = 0; j < f.size(); ++j) e = std::max(e, (f.B[static_cast<std::size_t>(j)] - B(f.x[static_cast<std::size_t>(j)])).cwiseAbs().maxCoeff());
  return e;
}

}  // namespace

TEST(FitCoefficients, ExactOnConstantAndLinear) {
  std::mt19937_64 rng(1);
  const Grid grid = fixture::jittered_grid(25, 50.0, rng);
  const Eigen::MatrixXd z = fixture::covariates(10, 3, rng);
  const Eigen::MatrixXd b0 = fixture::random_matrix(6, 3, rng), b1 = fixture::random_matrix(6, 3, rng) / 50.0;
  const auto constant = [&](double) { return b0; };
  const auto linear = [&](double x) -> Eigen::MatrixXd { return b0 + b1 * x; };
  for (const auto& B : {std::function<Eigen::MatrixXd(double)>(constant), std::function<Eigen::MatrixXd(double)>(linear)}) {
    const auto data = fixture::noiseless(grid, z, 6, B);
    for (double h : default_bandwidth_candidates(grid)) {
      if (!bandwidth_feasible(grid, h)) continue;
      EXPECT_LE(sup_error(fit_coefficients(data, h), B), 1e-8) << "h=" << h;
    }
  }
}

TEST(FitCoefficients, DerivativeOfLinearField) {
  std::mt19937_64 rng(2);
  const Grid grid = Grid::uniform(20, 10.0);
  const Eigen::MatrixXd z = fixture::covariates(8, 2, rng);
  const Eigen::MatrixXd b0 = fixture::random_matrix(3, 2, rng), b1 = fixture::random_matrix(3, 2, rng);
  const auto data = fixture::noiseless(grid, z, 3, [&](double x) -> Eigen::MatrixXd { return b0 + b1 * x; });
  const double h = 2.5;
  const auto f = fit_coefficients(data, h);
  for (const auto& d : f.Bdot) EXPECT_LT((d - h * b1).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FitCoefficients, MatchesDirectNormalEquations) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const Grid grid = fixture::jittered_grid(5, 4.0, rng);
    const Eigen::MatrixXd z = fixture::covariates(4, 2, rng);
    auto data = fixture::noiseless(grid, z, 6, [&](double) { return Eigen::MatrixXd::Zero(6, 2).eval(); });
    for (auto& v : data.values) v = fixture::random_matrix(5, 6, rng);
    const double h = 3.0;
    const auto f = fit_coefficients(data, h);
    for (int j = 0; j < grid.size(); ++j) {
      EXPECT_LT((f.B[static_cast<std::size_t>(j)] - oracle::wls_fit(data, h, grid[j])).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(FitCoefficients, EquivariantUnderCovariateReparameterization) {
  std::mt19937_64 rng(4);
  const Grid grid = Grid::uniform(15, 10.0);
  const Eigen::MatrixXd z = fixture::covariates(12, 3, rng);
  auto data = fixture::noisy(fixture::noiseless(grid, z, 6, [&](double) { return fixture::random_matrix(6, 3, rng); }),
                             0.1, rng);
  Eigen::Matrix3d a;
  a << 1, 0.5, 0, 0, 2, 0, 0.3, 0, -1;
  auto moved = data;
  moved.covariates = z * a.transpose();
  const auto f0 = fit_coefficients(data, 3.0), f1 = fit_coefficients(moved, 3.0);
  for (int j = 0; j < grid.size(); ++j) {
    const Eigen::MatrixXd back = f1.B[static_cast<std::size_t>(j)] * a;
    EXPECT_LT((back - f0.B[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(FitCoefficients, InvariantToSubjectOrder) {
  std::mt19937_64 rng(5);
  const Grid grid = Grid::uniform(12, 10.0);
  const Eigen::MatrixXd z = fixture::covariates(9, 2, rng);
  auto data = fixture::noisy(fixture::noiseless(grid, z, 2, [&](double) { return fixture::random_matrix(2, 2, rng); }),
                             0.2, rng);
  auto perm = data;
  for (int i = 0; i < 9; ++i) {
    perm.values[static_cast<std::size_t>(i)] = data.values[static_cast<std::size_t>(8 - i)];
    perm.covariates.row(i) = data.covariates.row(8 - i);
  }
  const auto f0 = fit_coefficients(data, 2.0), f1 = fit_coefficients(perm, 2.0);
  for (int j = 0; j < grid.size(); ++j) EXPECT_LT((f0.B[static_cast<std::size_t>(j)] - f1.B[static_cast<std::size_t>(j)]).norm(), 1e-12);
  EXPECT_NEAR(cv1_score(data, 2.0), cv1_score(perm, 2.0), 1e-12);
}

TEST(FitCoefficients, SingularDesign) {
  const Grid grid = Grid::uniform(10, 9.0);
  std::mt19937_64 rng(6);
  auto data = fixture::noiseless(grid, fixture::covariates(5, 2, rng), 1, [](double) { return Eigen::MatrixXd::Ones(1, 2).eval(); });
  try {
    fit_coefficients(data, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularDesign);
  }
}

TEST(Cv1, ZeroOnNoiselessLinearData) {
  std::mt19937_64 rng(7);
  const Grid grid = fixture::jittered_grid(25, 50.0, rng);
  const Eigen::MatrixXd z = fixture::covariates(10, 3, rng);
  const Eigen::MatrixXd b0 = fixture::random_matrix(6, 3, rng), b1 = fixture::random_matrix(6, 3, rng) / 50.0;
  const auto data = fixture::noiseless(grid, z, 6, [&](double x) -> Eigen::MatrixXd { return b0 + b1 * x; });
  for (double h : {5.0, 12.0, 25.0}) EXPECT_LE(std::abs(cv1_score(data, h)), 1e-12);
}

TEST(Cv1, MatchesFromScratchLeaveOneOut) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const Grid grid = fixture::jittered_grid(5, 4.0, rng);
    auto data = fixture::noiseless(grid, fixture::covariates(4, 2, rng), 6,
                                   [](double) { return Eigen::MatrixXd::Zero(6, 2).eval(); });
    for (auto& v : data.values) v = fixture::random_matrix(5, 6, rng);
    for (double h : {3.0, 6.0}) {
      const double ref = oracle::cv1(data, h);
      EXPECT_LE(std::abs(cv1_score(data, h) - ref), 1e-10 * std::max(1.0, ref));
    }
  }
}

TEST(Cv1, WeightingChoicesAgreeOnEstimate) {
  std::mt19937_64 rng(9);
  const Grid grid = Grid::uniform(10, 9.0);
  auto data = fixture::noisy(fixture::noiseless(grid, fixture::covariates(8, 2, rng), 6,
                                                [&](double) { return fixture::random_matrix(6, 2, rng); }),
                             0.1, rng);
  EstimationOptions plain;
  plain.weighted_metric = false;
  const auto a = fit_coefficients(data, 3.0), b = fit_coefficients(data, 3.0, plain);
  for (int j = 0; j < grid.size(); ++j) EXPECT_EQ(a.B[static_cast<std::size_t>(j)], b.B[static_cast<std::size_t>(j)]);
  EXPECT_NE(cv1_score(data, 3.0), cv1_score(data, 3.0, plain));
}

TEST(Cv1, DuplicatedSubjectsStayClose) {
  std::mt19937_64 rng(10);
  const Grid grid = Grid::uniform(20, 10.0);
  const Eigen::MatrixXd z = fixture::covariates(20, 2, rng);
  auto data = fixture::noisy(fixture::noiseless(grid, z, 2, [&](double x) -> Eigen::MatrixXd {
                               Eigen::MatrixXd b(2, 2);
                               b << std::sin(x), 1, 0.5, std::cos(x);
                               return b;
                             }),
                             0.3, rng);
  auto twice = data;
  twice.covariates.resize(40, 2);
  twice.covariates << z, z;
  twice.values.insert(twice.values.end(), data.values.begin(), data.values.end());
  const double a = cv1_score(data, 2.0), b = cv1_score(twice, 2.0);
  EXPECT_LT(std::abs(a - b), 0.1 * a);
}

TEST(Cv1, InsufficientSubjects) {
  std::mt19937_64 rng(11);
  auto data = fixture::noiseless(Grid::uniform(6, 5.0), fixture::covariates(2, 2, rng), 1,
                                 [](double) { return Eigen::MatrixXd::Ones(1, 2).eval(); });
  try {
    cv1_score(data, 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientSubjects);
  }
}

TEST(SelectBandwidth, SingletonAndTies) {
  const auto one = select_bandwidth({4.2}, [](double h) { return h; }, 0.0);
  EXPECT_EQ(one.selected, 4.2);
  const auto flat = select_bandwidth({3.0, 1.0, 2.0}, [](double) { return 0.0; }, 0.0);
  EXPECT_EQ(flat.selected, 1.0);
  const auto skip = select_bandwidth(
      {1.0, 2.0, 3.0},
      [](double h) -> double {
        if (h < 1.5) throw Error(ErrorCode::BandwidthTooSmall, "tiny");
        return 5.0 - h;
      },
      0.0);
  EXPECT_EQ(skip.selected, 3.0);
  EXPECT_TRUE(std::isnan(skip.scores[0]));
  EXPECT_THROW(select_bandwidth({1.0}, [](double) -> double { throw Error(ErrorCode::SingularDesign, "x"); }, 0.0),
               Error);
}

TEST(SelectBandwidth, NoiselessLinearPicksSmallestFeasible) {
  std::mt19937_64 rng(12);
  const Grid grid = Grid::uniform(25, 24.0);
  const Eigen::MatrixXd b0 = fixture::random_matrix(6, 3, rng), b1 = fixture::random_matrix(6, 3, rng) / 24.0;
  const auto data = fixture::noiseless(grid, fixture::covariates(10, 3, rng), 6,
                                       [&](double x) -> Eigen::MatrixXd { return b0 + b1 * x; });
  const auto sel = select_h1(data, {0.5, 1.5, 4.0, 9.0});
  EXPECT_EQ(sel.selected, 1.5);
}

TEST(SelectBandwidth, MatchesExhaustiveTable) {
  SimulationScenario scn;
  scn.subjects = 30;
  scn.points = 20;
  const auto data = generate_dataset(scn, 3).log_response();
  const auto cand = default_bandwidth_candidates(data.grid, 8);
  const auto sel = select_h1(data, cand);
  double best = INFINITY, arg = 0.0;
  for (double h : cand) {
    const double s = cv1_score(data, h);
    if (s < best) best = s, arg = h;
  }
  EXPECT_EQ(sel.selected, arg);
}
