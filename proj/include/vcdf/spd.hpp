#pragma once

// Exact 3x3 symmetric-matrix algebra under the log-Euclidean metric.
//
// Symmetric matrices are stored as their six lower-triangular entries in
// vecs order (a11, a21, a22, a31, a32, a33). Everything here is a pure
// function of value types.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "vcdf/error.hpp"

namespace vcdf {

template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Position of entry (row, col) of a symmetric 3x3 matrix in vecs order.
constexpr int vecs_index(int row, int col) {
  if (row < col) std::swap(row, col);
  return row * (row + 1) / 2 + col;
}

/// Weights turning the squared Euclidean norm of a vecs vector into the
/// squared Frobenius norm of the full symmetric matrix.
template <typename Scalar = double>
Vector6<Scalar> frobenius_weights() {
  Vector6<Scalar> w;
  w << 1, 2, 1, 2, 2, 1;
  return w;
}

template <typename Scalar>
class SymMat3 {
 public:
  SymMat3() : entries_(Vector6<Scalar>::Zero()) {}
  explicit SymMat3(const Vector6<Scalar>& entries) : entries_(entries) {}

  static SymMat3 identity() {
    Vector6<Scalar> e;
    e << 1, 0, 1, 0, 0, 1;
    return SymMat3(e);
  }

  static SymMat3 diagonal(Scalar d1, Scalar d2, Scalar d3) {
    Vector6<Scalar> e;
    e << d1, 0, d2, 0, 0, d3;
    return SymMat3(e);
  }

  /// Symmetric part of an arbitrary 3x3 matrix.
  template <typename Derived>
  static SymMat3 from_matrix(const Eigen::MatrixBase<Derived>& m) {
    Vector6<Scalar> e;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c <= r; ++c) e[vecs_index(r, c)] = Scalar(0.5) * (m(r, c) + m(c, r));
    return SymMat3(e);
  }

  Scalar operator()(int row, int col) const { return entries_[vecs_index(row, col)]; }
  const Vector6<Scalar>& entries() const { return entries_; }

  Matrix3<Scalar> matrix() const {
    Matrix3<Scalar> m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = (*this)(r, c);
    return m;
  }

  Scalar trace() const { return entries_[0] + entries_[2] + entries_[5]; }

  Scalar squared_norm() const {
    return entries_.cwiseAbs2().dot(frobenius_weights<Scalar>());
  }
  Scalar norm() const {
    using std::sqrt;
    return sqrt(squared_norm());
  }

  SymMat3 operator+(const SymMat3& o) const { return SymMat3(Vector6<Scalar>(entries_ + o.entries_)); }
  SymMat3 operator-(const SymMat3& o) const { return SymMat3(Vector6<Scalar>(entries_ - o.entries_)); }
  SymMat3 operator*(Scalar s) const { return SymMat3(Vector6<Scalar>(entries_ * s)); }
  friend SymMat3 operator*(Scalar s, const SymMat3& a) { return a * s; }
  bool operator==(const SymMat3& o) const { return entries_ == o.entries_; }

 private:
  Vector6<Scalar> entries_;
};

template <typename Scalar>
Vector6<Scalar> vecs(const SymMat3<Scalar>& a) {
  return a.entries();
}

template <typename Derived>
SymMat3<typename Derived::Scalar> ivecs(const Eigen::MatrixBase<Derived>& v) {
  return SymMat3<typename Derived::Scalar>(Vector6<typename Derived::Scalar>(v));
}

/// Spectral decomposition with eigenvalues sorted descending and matching
/// orthonormal eigenvectors as columns.
template <typename Scalar>
struct SymEigen3 {
  Vector3<Scalar> values;
  Matrix3<Scalar> vectors;
};

namespace detail {

template <typename Scalar>
struct ScalarOps {
  static Scalar sqrt(Scalar x) { return std::sqrt(x); }
  static Scalar abs(Scalar x) { return std::abs(x); }
  static Scalar epsilon() { return std::numeric_limits<Scalar>::epsilon(); }
};

/// Cyclic Jacobi rotations on a plain 3x3 array. Works for any arithmetic
/// type with a ScalarOps specialization, including extended precision.
/// On return `a` holds the eigenvalues on its diagonal and `v` the
/// eigenvectors as columns (unsorted).
template <typename Scalar, typename Ops = ScalarOps<Scalar>>
void jacobi_sweep3(std::array<std::array<Scalar, 3>, 3>& a, std::array<std::array<Scalar, 3>, 3>& v) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v[r][c] = Scalar(r == c ? 1 : 0);

  const Scalar eps = Ops::epsilon();
  for (int sweep = 0; sweep < 64; ++sweep) {
    Scalar off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    Scalar diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
    if (off == Scalar(0) || off <= eps * eps * eps * diag) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const Scalar apq = a[p][q];
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a[q][q] - a[p][p]) / (Scalar(2) * apq);
        Scalar t = Scalar(1) / (Ops::abs(theta) + Ops::sqrt(theta * theta + Scalar(1)));
        if (theta < Scalar(0)) t = -t;
        const Scalar c = Scalar(1) / Ops::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (int k = 0; k < 3; ++k) {
          const Scalar akp = a[k][p];
          const Scalar akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const Scalar apk = a[p][k];
          const Scalar aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const Scalar vkp = v[k][p];
          const Scalar vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
}

template <typename Scalar>
SymEigen3<Scalar> sorted_eigen(const Vector3<Scalar>& values, const Matrix3<Scalar>& vectors) {
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) { return values[a] > values[b]; });
  SymEigen3<Scalar> out;
  for (int k = 0; k < 3; ++k) {
    out.values[k] = values[order[k]];
    out.vectors.col(k) = vectors.col(order[k]);
  }
  return out;
}

template <typename Scalar>
SymEigen3<Scalar> jacobi_eigen(const SymMat3<Scalar>& m) {
  std::array<std::array<Scalar, 3>, 3> a{};
  std::array<std::array<Scalar, 3>, 3> v{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a[r][c] = m(r, c);
  jacobi_sweep3(a, v);
  Vector3<Scalar> values(a[0][0], a[1][1], a[2][2]);
  Matrix3<Scalar> vectors;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) vectors(r, c) = v[r][c];
  return sorted_eigen(values, vectors);
}

/// Null vector of (A - lambda I) from the best-conditioned cross product of
/// its rows. Returns false when every cross product is negligible.
template <typename Scalar>
bool null_vector(const Matrix3<Scalar>& a, Scalar lambda, Scalar scale, Vector3<Scalar>& out) {
  Matrix3<Scalar> m = a;
  m.diagonal().array() -= lambda;
  const Vector3<Scalar> r0 = m.row(0).transpose(), r1 = m.row(1).transpose(), r2 = m.row(2).transpose();
  const std::array<Vector3<Scalar>, 3> cands{r0.cross(r1), r0.cross(r2), r1.cross(r2)};
  int best = 0;
  Scalar best_norm = cands[0].squaredNorm();
  for (int k = 1; k < 3; ++k) {
    const Scalar nk = cands[k].squaredNorm();
    if (nk > best_norm) {
      best_norm = nk;
      best = k;
    }
  }
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  if (!(best_norm > Scalar(1e4) * eps * eps * scale * scale * scale * scale)) return false;
  out = cands[best] / std::sqrt(best_norm);
  return true;
}

/// Trigonometric solution of the characteristic cubic with eigenvectors
/// from cross products. Returns false when eigenvalues are too close for
/// the cross-product construction, in which case the caller falls back to
/// Jacobi rotations.
template <typename Scalar>
bool closed_form_eigen(const SymMat3<Scalar>& s, SymEigen3<Scalar>& out) {
  const Matrix3<Scalar> a = s.matrix();
  const Scalar p1 = s(1, 0) * s(1, 0) + s(2, 0) * s(2, 0) + s(2, 1) * s(2, 1);
  const Scalar q = s.trace() / Scalar(3);
  const Scalar d0 = s(0, 0) - q, d1 = s(1, 1) - q, d2 = s(2, 2) - q;
  const Scalar p2 = d0 * d0 + d1 * d1 + d2 * d2 + Scalar(2) * p1;
  const Scalar p = std::sqrt(p2 / Scalar(6));
  const Scalar scale = std::max({std::abs(s(0, 0)), std::abs(s(1, 1)), std::abs(s(2, 2)), p});
  if (!(scale > Scalar(0))) {
    out.values.setZero();
    out.vectors.setIdentity();
    return true;
  }
  if (p <= Scalar(1e-6) * scale) return false;

  Matrix3<Scalar> b = a;
  b.diagonal().array() -= q;
  b /= p;
  Scalar r = b.determinant() / Scalar(2);
  r = std::clamp(r, Scalar(-1), Scalar(1));
  const Scalar phi = std::acos(r) / Scalar(3);
  const Scalar two_pi_3 = Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(3);
  const Scalar l1 = q + Scalar(2) * p * std::cos(phi);
  const Scalar l3 = q + Scalar(2) * p * std::cos(phi + two_pi_3);
  const Scalar l2 = Scalar(3) * q - l1 - l3;

  const Scalar gap = std::min(l1 - l2, l2 - l3);
  if (gap <= Scalar(1e-5) * scale) return false;

  Vector3<Scalar> v1, v3;
  if (!null_vector(a, l1, scale, v1) || !null_vector(a, l3, scale, v3)) return false;
  v3 -= v3.dot(v1) * v1;
  const Scalar n3 = v3.norm();
  if (!(n3 > Scalar(0.5))) return false;
  v3 /= n3;
  const Vector3<Scalar> v2 = v3.cross(v1);

  out.values = Vector3<Scalar>(l1, l2, l3);
  out.vectors.col(0) = v1;
  out.vectors.col(1) = v2;
  out.vectors.col(2) = v3;
  return true;
}

/// Jacobi in binary128 arithmetic on the exact double entries. Used for
/// ill-conditioned SPD inputs where double-precision rounding would
/// dominate the relative error of the small eigenvalues.
SymEigen3<double> extended_precision_eigen(const SymMat3<double>& s);

/// Jacobi rotations on V^T A V polish a closed-form basis. The cubic loses
/// accuracy when two eigenvalues are close relative to the spread.
template <typename Scalar>
SymEigen3<Scalar> refine_eigen(const Matrix3<Scalar>& a, const Matrix3<Scalar>& basis) {
  const Matrix3<Scalar> m = basis.transpose() * a * basis;
  std::array<std::array<Scalar, 3>, 3> t{};
  std::array<std::array<Scalar, 3>, 3> w{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t[r][c] = (m(r, c) + m(c, r)) / Scalar(2);
  jacobi_sweep3(t, w);
  Matrix3<Scalar> rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot(r, c) = w[r][c];
  return sorted_eigen(Vector3<Scalar>(t[0][0], t[1][1], t[2][2]), Matrix3<Scalar>(basis * rot));
}

}  // namespace detail

/// Eigendecomposition of a symmetric 3x3 matrix: closed form refined by
/// Jacobi rotations, or plain Jacobi when eigenvalues are nearly degenerate.
template <typename Scalar>
SymEigen3<Scalar> eigen_decompose(const SymMat3<Scalar>& s) {
  SymEigen3<Scalar> out;
  if (detail::closed_form_eigen(s, out)) return detail::refine_eigen(s.matrix(), out.vectors);
  return detail::jacobi_eigen(s);
}

/// Condition ratio above which SPD decompositions are redone in extended precision.
inline constexpr double kExtendedPrecisionCondition = 1e4;

/// Decomposition used on positive definite inputs (log map, SPD check,
/// scalar diffusion). For doubles, inputs whose eigenvalue ratio exceeds
/// kExtendedPrecisionCondition are re-solved in binary128 so that small
/// eigenvalues keep full relative accuracy.
template <typename Scalar>
SymEigen3<Scalar> spd_eigen_decompose(const SymMat3<Scalar>& s) {
  SymEigen3<Scalar> out = eigen_decompose(s);
  if constexpr (std::is_same_v<Scalar, double>) {
    if (!(out.values[2] * kExtendedPrecisionCondition > out.values[0])) {
      out = detail::extended_precision_eigen(s);
    }
  }
  return out;
}

/// Relative threshold below which the smallest eigenvalue counts as non-positive.
inline constexpr double kSpdTolerance = 1e-12;

template <typename Scalar>
bool is_positive_definite(const Vector3<Scalar>& descending_values) {
  using std::max;
  return descending_values[2] > Scalar(kSpdTolerance) * max(Scalar(1), descending_values[0]);
}

template <typename Scalar>
SymMat3<Scalar> compose_spectral(const Matrix3<Scalar>& vectors, const Vector3<Scalar>& values) {
  return SymMat3<Scalar>::from_matrix(vectors * values.asDiagonal() * vectors.transpose());
}

/// A symmetric positive definite 3x3 matrix (a diffusion tensor).
template <typename Scalar>
class SpdTensor {
 public:
  /// Validates positive definiteness; throws NotPositiveDefinite.
  static SpdTensor make(const SymMat3<Scalar>& base) {
    const auto eig = spd_eigen_decompose(base);
    if (!is_positive_definite(eig.values)) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "smallest eigenvalue " + std::to_string(static_cast<double>(eig.values[2])) +
                      " is not positive (largest " + std::to_string(static_cast<double>(eig.values[0])) + ")");
    }
    return SpdTensor(base);
  }

  static SpdTensor identity() { return SpdTensor(SymMat3<Scalar>::identity()); }

  const SymMat3<Scalar>& base() const { return base_; }
  Matrix3<Scalar> matrix() const { return base_.matrix(); }
  bool operator==(const SpdTensor& o) const { return base_ == o.base_; }

 private:
  explicit SpdTensor(const SymMat3<Scalar>& base) : base_(base) {}

  template <typename S>
  friend SpdTensor<S> matrix_exp(const SymMat3<S>& a);

  SymMat3<Scalar> base_;
};

template <typename Scalar>
SymMat3<Scalar> matrix_log(const SpdTensor<Scalar>& s) {
  const auto eig = spd_eigen_decompose(s.base());
  Vector3<Scalar> logs;
  for (int k = 0; k < 3; ++k) {
    using std::log;
    logs[k] = log(eig.values[k]);
  }
  return compose_spectral(eig.vectors, logs);
}

/// Largest eigenvalue magnitude accepted by matrix_exp.
template <typename Scalar>
Scalar exp_overflow_threshold() {
  using std::log;
  return log(std::numeric_limits<Scalar>::max()) - Scalar(1);
}

template <typename Scalar>
SpdTensor<Scalar> matrix_exp(const SymMat3<Scalar>& a) {
  const auto eig = eigen_decompose(a);
  const Scalar limit = exp_overflow_threshold<Scalar>();
  if (!(eig.values[0] <= limit) || !(eig.values[2] >= -limit)) {
    throw Error(ErrorCode::Overflow, "eigenvalue outside exp range: [" +
                                         std::to_string(static_cast<double>(eig.values[2])) + ", " +
                                         std::to_string(static_cast<double>(eig.values[0])) + "]");
  }
  Vector3<Scalar> exps;
  for (int k = 0; k < 3; ++k) {
    using std::exp;
    exps[k] = exp(eig.values[k]);
  }
  return SpdTensor<Scalar>(compose_spectral(eig.vectors, exps));
}

/// Log-Euclidean geodesic distance: Frobenius norm of log(S1) - log(S2).
template <typename Scalar>
Scalar geodesic_distance(const SpdTensor<Scalar>& s1, const SpdTensor<Scalar>& s2) {
  return (matrix_log(s1) - matrix_log(s2)).norm();
}

template <typename Scalar>
struct ScalarDiffusion {
  Scalar fa;
  Scalar md;
  Vector3<Scalar> eigenvalues;  // descending
};

/// FA from an eigenvalue triple (any order, all >= 0, not all zero).
template <typename Scalar>
Scalar fractional_anisotropy(const Vector3<Scalar>& lambda) {
  const Scalar sum_sq = lambda.squaredNorm();
  if (!(sum_sq > Scalar(0))) throw Error(ErrorCode::DegenerateTensor, "all eigenvalues are zero");
  if (lambda.minCoeff() < Scalar(0)) throw Error(ErrorCode::NotPositiveDefinite, "negative eigenvalue");
  const Scalar mean = lambda.sum() / Scalar(3);
  const Scalar dev = (lambda.array() - mean).square().sum();
  using std::sqrt;
  return std::clamp(sqrt(Scalar(3) * dev / (Scalar(2) * sum_sq)), Scalar(0), Scalar(1));
}

template <typename Scalar>
ScalarDiffusion<Scalar> scalar_diffusion(const SpdTensor<Scalar>& s) {
  const auto eig = spd_eigen_decompose(s.base());
  return {fractional_anisotropy(eig.values), eig.values.sum() / Scalar(3), eig.values};
}

}  // namespace vcdf
