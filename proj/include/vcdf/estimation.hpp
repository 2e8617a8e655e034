#pragma once

// Local-linear weighted least squares for the varying coefficient matrix
// B(x) (q x r), pooled over subjects, and leave-one-subject-out bandwidth
// selection.
//
// All subjects share one grid, so the pooled normal matrix factorizes as
// Sigma(h, x) = (Z^T Z) kron A_h(x) with A_h(x) = sum_j K_h(x_j - x) y y^T.
// The estimator therefore reduces to
//   B(x)^T = (Z^T Z)^{-1} sum_j s_j(x) sum_i z_i v_ij^T,
// where s_j(x) are the local-linear equivalent-kernel weights.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "vcdf/dataset.hpp"
#include "vcdf/kernel.hpp"

namespace vcdf {

struct EstimationOptions {
  KernelType kernel = KernelType::Epanechnikov;
  /// Use the response metric (Frobenius for tensors) in cross-validation
  /// distances; false weights every component equally.
  bool weighted_metric = true;
};

/// B(x) and h-scaled derivative h * dB/dx evaluated at query locations.
struct CoefficientField {
  std::vector<double> x;
  std::vector<Eigen::MatrixXd> B;     // q x r per location
  std::vector<Eigen::MatrixXd> Bdot;  // q x r per location
  double bandwidth = 0.0;

  int size() const { return static_cast<int>(x.size()); }
  Eigen::VectorXd fitted(int j, const Eigen::VectorXd& z) const { return B[static_cast<std::size_t>(j)] * z; }
  /// Entry (k, l) of B along all locations.
  Eigen::VectorXd coefficient(int k, int l) const;
};

/// Precomputed linear map from responses to the coefficient field for a
/// fixed design (grid, covariates, bandwidth, query locations). Refits on
/// new responses sharing that design cost one pass over the data.
class CoefficientEstimator {
 public:
  CoefficientEstimator(const Grid& grid, const Eigen::MatrixXd& covariates, double h,
                       std::span<const double> queries, KernelType kernel = KernelType::Epanechnikov);

  CoefficientField fit(const std::vector<Eigen::MatrixXd>& values) const;
  /// B(x) only, written into `out` (resized as needed).
  void fit_values(const std::vector<Eigen::MatrixXd>& values, std::vector<Eigen::MatrixXd>& out) const;

  const LocalLinearOperator& local_operator() const { return op_; }
  const Eigen::MatrixXd& gram_inverse() const { return gram_inverse_; }

 private:
  Eigen::MatrixXd pooled_moments(const std::vector<Eigen::MatrixXd>& values) const;

  std::vector<double> queries_;
  Eigen::MatrixXd covariates_;
  LocalLinearOperator op_;
  Eigen::MatrixXd gram_inverse_;
};

/// Throws SingularDesign (naming the location) when Sigma(h1, x) is singular.
CoefficientField fit_coefficients(const FunctionalResponse& data, double h1, std::span<const double> queries,
                                  const EstimationOptions& options = {});
CoefficientField fit_coefficients(const FunctionalResponse& data, double h1, const EstimationOptions& options = {});
CoefficientField fit_coefficients(const TractDataset& data, double h1, const Grid& query,
                                  const EstimationOptions& options = {});

/// Leave-one-subject-out cross-validation score, computed by downdating the
/// pooled sums by each subject's contribution.
double cv1_score(const FunctionalResponse& data, double h1, const EstimationOptions& options = {});

/// Candidate bandwidths with their scores; infeasible candidates score NaN.
struct BandwidthSelection {
  double selected = 0.0;
  std::vector<double> candidates;
  std::vector<double> scores;
};

/// Minimizes `score` over ascending candidates; scores within `tie_tolerance`
/// of the best keep the smaller bandwidth. Candidates whose score throws
/// BandwidthTooSmall or SingularDesign are marked infeasible.
BandwidthSelection select_bandwidth(std::vector<double> candidates, const std::function<double(double)>& score,
                                    double tie_tolerance);

/// Absolute tie tolerance for criteria measured in squared response units.
double score_tie_tolerance(const FunctionalResponse& data);

BandwidthSelection select_h1(const FunctionalResponse& data, std::vector<double> candidates,
                             const EstimationOptions& options = {});

}  // namespace vcdf
