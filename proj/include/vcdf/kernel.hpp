#pragma once

// Kernel machinery shared by every local-linear estimator in the library.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "vcdf/error.hpp"

namespace vcdf {

enum class KernelType { Epanechnikov, Uniform };

/// K_h(t) = K(t / h) / h with K supported on [-1, 1].
template <typename Scalar>
Scalar kernel_weight(Scalar t, Scalar h, KernelType kernel = KernelType::Epanechnikov) {
  if (!(h > Scalar(0))) throw Error(ErrorCode::InvalidBandwidth, "bandwidth must be positive");
  const Scalar u = t / h;
  if (u > Scalar(1) || u < Scalar(-1)) return Scalar(0);
  switch (kernel) {
    case KernelType::Uniform: return Scalar(0.5) / h;
    case KernelType::Epanechnikov: break;
  }
  return Scalar(0.75) * (Scalar(1) - u * u) / h;
}

/// Local-linear design vector (1, (x_j - x) / h).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> design_vector(Scalar xj, Scalar x, Scalar h) {
  if (!(h > Scalar(0))) throw Error(ErrorCode::InvalidBandwidth, "bandwidth must be positive");
  return {Scalar(1), (xj - x) / h};
}

/// Ordered arc-length sample points on [0, L0].
class Grid {
 public:
  Grid() = default;
  /// Validates strict increase and containment in [0, length].
  Grid(std::vector<double> points, double length);

  static Grid uniform(int count, double length);

  int size() const { return static_cast<int>(points_.size()); }
  double operator[](int j) const { return points_[static_cast<std::size_t>(j)]; }
  double length() const { return length_; }
  std::span<const double> points() const { return points_; }
  double max_spacing() const;

  bool operator==(const Grid& o) const { return points_ == o.points_ && length_ == o.length_; }

 private:
  std::vector<double> points_;
  double length_ = 0.0;
};

/// Weights of the local-linear fit at one location: the fitted value is
/// sum_j value[j] * y_j and the h-scaled slope is sum_j slope[j] * y_j.
struct LocalLinearWeights {
  Eigen::VectorXd value;
  Eigen::VectorXd slope;
};

/// Throws BandwidthTooSmall when fewer than two distinct grid points carry
/// weight at x (the 2x2 local design is rank deficient).
LocalLinearWeights local_linear_weights(const Grid& grid, double x, double h,
                                        KernelType kernel = KernelType::Epanechnikov);

/// True when every location in `at` has a non-degenerate local design.
bool bandwidth_feasible(const Grid& grid, std::span<const double> at, double h,
                        KernelType kernel = KernelType::Epanechnikov);
bool bandwidth_feasible(const Grid& grid, double h, KernelType kernel = KernelType::Epanechnikov);

/// Equivalent-kernel smoother on the grid: row j holds the local-linear
/// weights at x_j.
struct SmootherMatrix {
  Eigen::MatrixXd entries;
  double bandwidth = 0.0;
};

SmootherMatrix smoother_matrix(const Grid& grid, double h, KernelType kernel = KernelType::Epanechnikov);

/// Local-linear weights at arbitrary query points, stacked by row.
struct LocalLinearOperator {
  Eigen::MatrixXd value;  // queries x grid
  Eigen::MatrixXd slope;  // queries x grid
  double bandwidth = 0.0;
};

LocalLinearOperator local_linear_operator(const Grid& grid, std::span<const double> queries, double h,
                                          KernelType kernel = KernelType::Epanechnikov);

/// `count` log-spaced bandwidths from 1.5 * max spacing to L0 / 2.
std::vector<double> default_bandwidth_candidates(const Grid& grid, int count = 20);

}  // namespace vcdf
