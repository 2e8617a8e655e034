#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vcdf/spd.hpp"

using namespace vcdf;

namespace {

SpdTensor<double> spd(const Eigen::Matrix3d& m) { return SpdTensor<double>::make(SymMat3<double>::from_matrix(m)); }

double rel_frob(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST(Vecs, IdentityZeroAndOffDiagonal) {
  Vector6<double> expected;
  expected << 1, 0, 1, 0, 0, 1;
  EXPECT_EQ(vecs(SymMat3<double>::identity()), expected);
  EXPECT_EQ(vecs(SymMat3<double>()), Vector6<double>::Zero());

  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  a(1, 0) = a(0, 1) = 5;
  Vector6<double> e21 = Vector6<double>::Zero();
  e21[1] = 5;
  EXPECT_EQ(vecs(SymMat3<double>::from_matrix(a)), e21);
}

TEST(Vecs, IvecsInvertsVecs) {
  Vector6<double> v;
  v << 1, 2, 3, 4, 5, 6;
  const auto m = ivecs(v).matrix();
  EXPECT_EQ(m(2, 1), 5);
  EXPECT_EQ(m(1, 2), 5);
  EXPECT_EQ(vecs(ivecs(v)), v);
}

TEST(Vecs, FrobeniusWeightsMatchFullNorm) {
  std::mt19937_64 rng(3);
  const Eigen::Matrix3d m = oracle::random_spd(rng, 0.1, 10);
  EXPECT_NEAR(SymMat3<double>::from_matrix(m).norm(), m.norm(), 1e-12 * m.norm());
}

TEST(MatrixLog, IdentityAndScaledIdentity) {
  EXPECT_LT(matrix_log(SpdTensor<double>::identity()).norm(), 1e-15);
  const auto l = matrix_log(spd(std::numbers::e * Eigen::Matrix3d::Identity()));
  EXPECT_LT((l.matrix() - Eigen::Matrix3d::Identity()).norm(), 1e-15);
}

TEST(MatrixLog, MatchesCubicOracle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const Eigen::Matrix3d s = oracle::random_spd(rng, 0.1, 10);
    const Eigen::Matrix3d ref = oracle::cubic_log(s);
    EXPECT_LE(rel_frob(matrix_log(spd(s)).matrix(), ref), 1e-10);
  }
}

TEST(MatrixLog, RejectsNonPositive) {
  EXPECT_THROW(SpdTensor<double>::make(SymMat3<double>::diagonal(1, 1, -0.5)), Error);
  try {
    SpdTensor<double>::make(SymMat3<double>::diagonal(1, 0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(MatrixExp, ZeroAndIdentity) {
  EXPECT_EQ(matrix_exp(SymMat3<double>()).matrix(), Eigen::Matrix3d::Identity());
  const auto e = matrix_exp(SymMat3<double>::identity()).matrix();
  EXPECT_LT((e - std::numbers::e * Eigen::Matrix3d::Identity()).norm(), 1e-14);
}

TEST(MatrixExp, RoundTrip) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 500; ++t) {
    const Eigen::Matrix3d s = oracle::random_spd(rng, 1e-3, 1e3);
    EXPECT_LE(rel_frob(matrix_exp(matrix_log(spd(s))).matrix(), s), 1e-10 * s.norm() / std::max(1.0, s.norm()) + 1e-12);
  }
}

TEST(MatrixExp, Overflow) {
  EXPECT_THROW(matrix_exp(SymMat3<double>::diagonal(800, 0, 0)), Error);
  try {
    matrix_exp(SymMat3<double>::diagonal(0, 0, -800));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Overflow);
  }
}

TEST(Geodesic, SelfAndScaledIdentity) {
  std::mt19937_64 rng(2);
  const auto s = spd(oracle::random_spd(rng, 0.1, 10));
  EXPECT_EQ(geodesic_distance(s, s), 0.0);
  const auto e2 = spd(std::exp(2.0) * Eigen::Matrix3d::Identity());
  EXPECT_NEAR(geodesic_distance(SpdTensor<double>::identity(), e2), std::sqrt(12.0), 1e-13);
}

TEST(Geodesic, TriangleInequalityAndSymmetry) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 1000; ++t) {
    const auto a = spd(oracle::random_spd(rng, 1e-2, 1e2));
    const auto b = spd(oracle::random_spd(rng, 1e-2, 1e2));
    const auto c = spd(oracle::random_spd(rng, 1e-2, 1e2));
    const double ab = geodesic_distance(a, b), bc = geodesic_distance(b, c), ac = geodesic_distance(a, c);
    EXPECT_LE(ac, ab + bc + 1e-12);
    EXPECT_NEAR(ab, geodesic_distance(b, a), 1e-12);
  }
}

TEST(Geodesic, RotationInvariant) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Matrix3d a = oracle::random_spd(rng, 0.1, 10), b = oracle::random_spd(rng, 0.1, 10);
    const Eigen::Matrix3d r = oracle::random_rotation(rng);
    const double d0 = geodesic_distance(spd(a), spd(b));
    const double d1 = geodesic_distance(spd(r * a * r.transpose()), spd(r * b * r.transpose()));
    EXPECT_NEAR(d0, d1, 1e-10 * std::max(1.0, d0));
  }
}

TEST(Geodesic, MatchesExtendedPrecisionOracleOnWideSpectra) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 300; ++t) {
    const Eigen::Matrix3d a = oracle::random_spd(rng, 1e-6, 1e6), b = oracle::random_spd(rng, 1e-6, 1e6);
    const double ref = oracle::quad_geodesic(a, b);
    EXPECT_LE(std::abs(geodesic_distance(spd(a), spd(b)) - ref), 1e-10 * ref);
  }
}

TEST(EigenDecompose, DegenerateSpectraUseFallback) {
  std::mt19937_64 rng(4);
  const Eigen::Matrix3d r = oracle::random_rotation(rng);
  const Eigen::Matrix3d m = r * Eigen::Vector3d(2, 2, 1).asDiagonal() * r.transpose();
  const auto eig = eigen_decompose(SymMat3<double>::from_matrix(m));
  EXPECT_NEAR(eig.values[0], 2, 1e-14);
  EXPECT_NEAR(eig.values[1], 2, 1e-14);
  EXPECT_NEAR(eig.values[2], 1, 1e-14);
  EXPECT_LT((eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose() - m).norm(), 1e-13);
}

TEST(ScalarDiffusion, IsotropicTensor) {
  const auto s = scalar_diffusion(spd(2.5 * Eigen::Matrix3d::Identity()));
  EXPECT_NEAR(s.fa, 0.0, 1e-15);
  EXPECT_NEAR(s.md, 2.5, 1e-15);
}

TEST(ScalarDiffusion, HandValues) {
  EXPECT_EQ(fractional_anisotropy(Eigen::Vector3d(1, 0, 0)), 1.0);
  EXPECT_NEAR(fractional_anisotropy(Eigen::Vector3d(2, 1, 1)), std::sqrt(1.0 / 6.0), 1e-15);
  const auto s = scalar_diffusion(spd(Eigen::Vector3d(2, 1, 1).asDiagonal().toDenseMatrix()));
  EXPECT_NEAR(s.fa, 0.408248290463863, 1e-12);
  EXPECT_NEAR(s.md, 4.0 / 3.0, 1e-15);
}

TEST(ScalarDiffusion, ScaleInvariantFa) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Matrix3d m = oracle::random_spd(rng, 0.1, 10);
    EXPECT_NEAR(scalar_diffusion(spd(m)).fa, scalar_diffusion(spd(7.0 * m)).fa, 1e-12);
  }
}

TEST(ScalarDiffusion, DegenerateInput) {
  try {
    fractional_anisotropy(Eigen::Vector3d(0, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateTensor);
  }
}
