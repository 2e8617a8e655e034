#include "vcdf/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vcdf {

Grid::Grid(std::vector<double> points, double length) : points_(std::move(points)), length_(length) {
  if (!(length_ > 0.0)) throw Error(ErrorCode::ValidationError, "grid length must be positive");
  if (points_.empty()) throw Error(ErrorCode::ValidationError, "grid is empty");
  for (std::size_t j = 0; j < points_.size(); ++j) {
    if (!(points_[j] >= 0.0 && points_[j] <= length_)) {
      throw Error(ErrorCode::ValidationError, "grid point " + std::to_string(j) + " outside [0, L0]");
    }
    if (j > 0 && !(points_[j] > points_[j - 1])) {
      throw Error(ErrorCode::ValidationError, "grid not strictly increasing at point " + std::to_string(j));
    }
  }
}

Grid Grid::uniform(int count, double length) {
  if (count < 2) throw Error(ErrorCode::ValidationError, "uniform grid needs at least two points");
  std::vector<double> pts(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) pts[static_cast<std::size_t>(j)] = length * j / (count - 1);
  pts.back() = length;
  return Grid(std::move(pts), length);
}

double Grid::max_spacing() const {
  double m = 0.0;
  for (std::size_t j = 1; j < points_.size(); ++j) m = std::max(m, points_[j] - points_[j - 1]);
  return m;
}

namespace {

// Returns false instead of throwing so that feasibility scans stay cheap.
bool try_local_linear(const Grid& grid, double x, double h, KernelType kernel, double* value, double* slope) {
  double a00 = 0.0, a01 = 0.0, a11 = 0.0;
  const int n = grid.size();
  for (int j = 0; j < n; ++j) {
    const double k = kernel_weight(grid[j] - x, h, kernel);
    if (k == 0.0) continue;
    const double t = (grid[j] - x) / h;
    a00 += k;
    a01 += k * t;
    a11 += k * t * t;
  }
  const double det = a00 * a11 - a01 * a01;
  if (!(a00 > 0.0) || !(det > 1e-10 * a00 * a11) || !(a11 > 0.0)) return false;
  if (value == nullptr) return true;
  const double i00 = a11 / det, i01 = -a01 / det, i11 = a00 / det;
  for (int j = 0; j < n; ++j) {
    const double k = kernel_weight(grid[j] - x, h, kernel);
    const double t = (grid[j] - x) / h;
    value[j] = k == 0.0 ? 0.0 : k * (i00 + i01 * t);
    slope[j] = k == 0.0 ? 0.0 : k * (i01 + i11 * t);
  }
  return true;
}

}  // namespace

LocalLinearWeights local_linear_weights(const Grid& grid, double x, double h, KernelType kernel) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidBandwidth, "bandwidth must be positive");
  LocalLinearWeights w{Eigen::VectorXd(grid.size()), Eigen::VectorXd(grid.size())};
  if (!try_local_linear(grid, x, h, kernel, w.value.data(), w.slope.data())) {
    throw Error(ErrorCode::BandwidthTooSmall,
                "local design rank deficient at x=" + std::to_string(x) + " for h=" + std::to_string(h));
  }
  return w;
}

bool bandwidth_feasible(const Grid& grid, std::span<const double> at, double h, KernelType kernel) {
  if (!(h > 0.0)) return false;
  return std::all_of(at.begin(), at.end(),
                     [&](double x) { return try_local_linear(grid, x, h, kernel, nullptr, nullptr); });
}

bool bandwidth_feasible(const Grid& grid, double h, KernelType kernel) {
  return bandwidth_feasible(grid, grid.points(), h, kernel);
}

LocalLinearOperator local_linear_operator(const Grid& grid, std::span<const double> queries, double h,
                                          KernelType kernel) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidBandwidth, "bandwidth must be positive");
  const auto nq = static_cast<Eigen::Index>(queries.size());
  LocalLinearOperator op{Eigen::MatrixXd(nq, grid.size()), Eigen::MatrixXd(nq, grid.size()), h};
  // Row-major scratch so that each query writes a contiguous row.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> value(nq, grid.size()),
      slope(nq, grid.size());
  for (Eigen::Index q = 0; q < nq; ++q) {
    if (!try_local_linear(grid, queries[static_cast<std::size_t>(q)], h, kernel, value.row(q).data(),
                          slope.row(q).data())) {
      throw Error(ErrorCode::BandwidthTooSmall, "local design rank deficient at x=" +
                                                    std::to_string(queries[static_cast<std::size_t>(q)]) +
                                                    " for h=" + std::to_string(h));
    }
  }
  op.value = value;
  op.slope = slope;
  return op;
}

SmootherMatrix smoother_matrix(const Grid& grid, double h, KernelType kernel) {
  return {local_linear_operator(grid, grid.points(), h, kernel).value, h};
}

std::vector<double> default_bandwidth_candidates(const Grid& grid, int count) {
  const double lo = 1.5 * grid.max_spacing();
  const double hi = grid.length() / 2.0;
  if (count <= 1 || !(hi > lo)) return {lo};
  std::vector<double> out(static_cast<std::size_t>(count));
  const double step = std::log(hi / lo) / (count - 1);
  for (int k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = lo * std::exp(step * k);
  out.back() = hi;
  return out;
}

}  // namespace vcdf
