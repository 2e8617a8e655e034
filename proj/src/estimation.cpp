#include "vcdf/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

namespace vcdf {

namespace {

// Inverse of a symmetric positive definite Gram matrix, or nullopt when its
// condition number exceeds 1e12.
std::optional<Eigen::MatrixXd> invert_gram(const Eigen::MatrixXd& gram) {
  if (gram.rows() == 0) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 1e-12 * hi)) return std::nullopt;
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::VectorXd CoefficientField::coefficient(int k, int l) const {
  Eigen::VectorXd out(size());
  for (int j = 0; j < size(); ++j) out[j] = B[static_cast<std::size_t>(j)](k, l);
  return out;
}

CoefficientEstimator::CoefficientEstimator(const Grid& grid, const Eigen::MatrixXd& covariates, double h,
                                           std::span<const double> queries, KernelType kernel)
    : queries_(queries.begin(), queries.end()), covariates_(covariates) {
  auto inv = invert_gram(covariates.transpose() * covariates);
  if (!inv) throw Error(ErrorCode::SingularDesign, "covariate Gram matrix is singular");
  gram_inverse_ = std::move(*inv);
  try {
    op_ = local_linear_operator(grid, queries, h, kernel);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BandwidthTooSmall) throw;
    throw Error(ErrorCode::SingularDesign, e.what());
  }
}

Eigen::MatrixXd CoefficientEstimator::pooled_moments(const std::vector<Eigen::MatrixXd>& values) const {
  // Column block l holds sum_i z_il * Y_i, so row j is vec(sum_i z_i v_ij^T).
  const auto r = covariates_.cols();
  const auto q = values.front().cols();
  Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(values.front().rows(), r * q);
  for (std::size_t i = 0; i < values.size(); ++i)
    for (Eigen::Index l = 0; l < r; ++l) {
      const double z = covariates_(static_cast<Eigen::Index>(i), l);
      if (z != 0.0) flat.middleCols(l * q, q) += z * values[i];
    }
  return flat;
}

void CoefficientEstimator::fit_values(const std::vector<Eigen::MatrixXd>& values,
                                      std::vector<Eigen::MatrixXd>& out) const {
  const auto r = covariates_.cols();
  const auto q = values.front().cols();
  const Eigen::MatrixXd p0 = op_.value * pooled_moments(values);
  out.resize(queries_.size());
  Eigen::MatrixXd pq(r, q);
  for (Eigen::Index s = 0; s < p0.rows(); ++s) {
    for (Eigen::Index l = 0; l < r; ++l) pq.row(l) = p0.row(s).segment(l * q, q);
    out[static_cast<std::size_t>(s)].noalias() = (gram_inverse_ * pq).transpose();
  }
}

CoefficientField CoefficientEstimator::fit(const std::vector<Eigen::MatrixXd>& values) const {
  const auto r = covariates_.cols();
  const auto q = values.front().cols();
  const Eigen::MatrixXd flat = pooled_moments(values);
  const Eigen::MatrixXd p0 = op_.value * flat;
  const Eigen::MatrixXd p1 = op_.slope * flat;
  CoefficientField field{queries_, {}, {}, op_.bandwidth};
  field.B.resize(queries_.size());
  field.Bdot.resize(queries_.size());
  Eigen::MatrixXd pq(r, q);
  for (Eigen::Index s = 0; s < p0.rows(); ++s) {
    for (Eigen::Index l = 0; l < r; ++l) pq.row(l) = p0.row(s).segment(l * q, q);
    field.B[static_cast<std::size_t>(s)] = (gram_inverse_ * pq).transpose();
    for (Eigen::Index l = 0; l < r; ++l) pq.row(l) = p1.row(s).segment(l * q, q);
    field.Bdot[static_cast<std::size_t>(s)] = (gram_inverse_ * pq).transpose();
  }
  return field;
}

CoefficientField fit_coefficients(const FunctionalResponse& data, double h1, std::span<const double> queries,
                                  const EstimationOptions& options) {
  data.validate();
  return CoefficientEstimator(data.grid, data.covariates, h1, queries, options.kernel).fit(data.values);
}

CoefficientField fit_coefficients(const FunctionalResponse& data, double h1, const EstimationOptions& options) {
  return fit_coefficients(data, h1, data.grid.points(), options);
}

CoefficientField fit_coefficients(const TractDataset& data, double h1, const Grid& query,
                                  const EstimationOptions& options) {
  return fit_coefficients(data.log_response(), h1, query.points(), options);
}

double cv1_score(const FunctionalResponse& data, double h1, const EstimationOptions& options) {
  data.validate();
  const int n = data.subjects();
  const int r = data.covariate_count();
  const int q = data.components();
  const int ng = data.points();
  if (n <= r) throw Error(ErrorCode::InsufficientSubjects, "leave-one-out needs more subjects than covariates");

  Eigen::MatrixXd smoother;
  try {
    smoother = smoother_matrix(data.grid, h1, options.kernel).entries;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BandwidthTooSmall) throw;
    throw Error(ErrorCode::SingularDesign, e.what());
  }
  const Eigen::VectorXd metric = options.weighted_metric ? data.metric : Eigen::VectorXd::Ones(q);
  const Eigen::MatrixXd gram = data.covariates.transpose() * data.covariates;

  // Pooled smoothed moments P_j = sum_k S_jk sum_i z_i v_ik^T, stored as ng x (r*q).
  Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(ng, r * q);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < r; ++l) flat.middleCols(l * q, q) += data.covariates(i, l) * data.values[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd pooled = smoother * flat;

  double total = 0.0;
  Eigen::MatrixXd pj(r, q);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd zi = data.covariates.row(i).transpose();
    auto inv = invert_gram(gram - zi * zi.transpose());
    if (!inv) {
      throw Error(ErrorCode::SingularDesign, "covariate Gram matrix singular without subject " + std::to_string(i));
    }
    const Eigen::VectorXd w = *inv * zi;
    const double shrink = zi.dot(w);
    const auto& yi = data.values[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd own = smoother * yi;  // subject i's smoothed contribution
    for (int j = 0; j < ng; ++j) {
      for (int l = 0; l < r; ++l) pj.row(l) = pooled.row(j).segment(l * q, q);
      const Eigen::VectorXd pred = pj.transpose() * w - shrink * own.row(j).transpose();
      const Eigen::VectorXd e = yi.row(j).transpose() - pred;
      total += e.cwiseAbs2().dot(metric);
    }
  }
  return total / (static_cast<double>(n) * ng);
}

BandwidthSelection select_bandwidth(std::vector<double> candidates, const std::function<double(double)>& score,
                                    double tie_tolerance) {
  if (candidates.empty()) throw Error(ErrorCode::NoFeasibleBandwidth, "no candidate bandwidths");
  std::sort(candidates.begin(), candidates.end());
  BandwidthSelection out{0.0, candidates, std::vector<double>(candidates.size(), std::nan(""))};
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    try {
      out.scores[k] = score(candidates[k]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BandwidthTooSmall && e.code() != ErrorCode::SingularDesign &&
          e.code() != ErrorCode::EmptyWindow && e.code() != ErrorCode::InvalidBandwidth &&
          e.code() != ErrorCode::DegenerateDenominator)
        throw;
      continue;
    }
    if (!std::isfinite(out.scores[k])) continue;
    if (!found || out.scores[k] < best - tie_tolerance - 1e-9 * std::abs(best)) {
      best = out.scores[k];
      out.selected = candidates[k];
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::NoFeasibleBandwidth, "every candidate bandwidth is infeasible");
  return out;
}

double score_tie_tolerance(const FunctionalResponse& data) {
  double sum = 0.0, count = 0.0;
  for (const auto& v : data.values) {
    sum += (v.cwiseAbs2() * data.metric).sum();
    count += static_cast<double>(v.rows());
  }
  return 1e-20 * (1.0 + (count > 0 ? sum / count : 0.0));
}

BandwidthSelection select_h1(const FunctionalResponse& data, std::vector<double> candidates,
                             const EstimationOptions& options) {
  if (data.subjects() <= data.covariate_count()) {
    throw Error(ErrorCode::InsufficientSubjects, "leave-one-out needs more subjects than covariates");
  }
  return select_bandwidth(
      std::move(candidates), [&](double h) { return cv1_score(data, h, options); }, score_tie_tolerance(data));
}

}  // namespace vcdf
