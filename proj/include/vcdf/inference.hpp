#pragma once

// Wald-type local and global tests on linear functionals of B(x), the wild
// bootstrap for their p-values, and simultaneous confidence bands from
// resampled Gaussian-process paths.
//
// vec(B) for a q x r coefficient matrix is taken row by row: entry (k, l)
// sits at k * r + l, so that its covariance is Sigma_u kron Omega_z^{-1} / n.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vcdf/dataset.hpp"
#include "vcdf/estimation.hpp"
#include "vcdf/model.hpp"

namespace vcdf {

inline int vec_index(int k, int l, int r) { return k * r + l; }
Eigen::VectorXd vec_rows(const Eigen::MatrixXd& b);

/// H0: C vec(B(x)) = b0 for all x, with b0 constant along the tract.
struct LinearHypothesis {
  Eigen::MatrixXd C;   // c x (q r)
  Eigen::VectorXd b0;  // c

  int rows() const { return static_cast<int>(C.rows()); }
  /// Throws ValidationError unless C has full row rank (relative 1e-10).
  void validate(int components, int covariates) const;
};

/// C selecting every component of the listed covariate columns, b0 = 0.
LinearHypothesis covariate_hypothesis(int components, int covariates, const std::vector<int>& columns);

/// Per-point inverses of C (Sigma_u(x_j, x_j)_+ kron Omega_z^{-1}) C^T.
struct WaldWeights {
  std::vector<Eigen::MatrixXd> inverse_middle;
  int ridge_events = 0;
};

/// Sigma_u(x_j, x_j) is symmetrized and clipped to PSD before use. A ridge
/// is added when the middle matrix is ill-conditioned; SingularMiddleMatrix
/// when it vanishes.
WaldWeights wald_weights(const LinearHypothesis& hyp, const CovarianceField& covariance,
                         const Eigen::MatrixXd& omega_z);

/// T_n(x_j) = n d^T M^{-1} d with d = C vec(B(x_j)) - b0.
double local_test(const Eigen::MatrixXd& b, const LinearHypothesis& hyp, const Eigen::MatrixXd& inverse_middle,
                  int subjects);
std::vector<double> local_tests(const std::vector<Eigen::MatrixXd>& b, const LinearHypothesis& hyp,
                                const WaldWeights& weights, int subjects);

/// Trapezoid rule of the local statistics over the grid.
double trapezoid(std::span<const double> x, std::span<const double> y);
double global_test(const std::vector<double>& local_stats, const Grid& grid);

/// Weighted least-squares fit of B under H0. Both B(x) and its derivative
/// are kept in the constraint set. Throws InfeasibleConstraint when C
/// vec(B) = b0 has no solution.
CoefficientField constrained_fit(const FunctionalResponse& data, const LinearHypothesis& hyp, double h1,
                                 const EstimationOptions& options = {});

/// Fraction of `stats` that are >= `observed`.
double exceedance_fraction(std::span<const double> stats, double observed);

struct BootstrapOptions {
  int G = 200;
  std::uint64_t seed = 0;
  int threads = 0;
  /// Treat 6-component responses as vecs(log S) and require the rebuilt
  /// tensors to be representable.
  bool tensor_response = true;
  /// Recompute Sigma_u from each replicate's own residual curves (smoothed
  /// at the fit's h2) instead of reusing the observed estimate.
  bool restudentize = true;
  CovarianceOptions covariance;
};

struct TestReport {
  std::vector<double> x;
  std::vector<double> local_stats;
  double global_stat = 0.0;
  double global_p = 1.0;
  std::vector<double> local_p_corrected;
  std::vector<double> bootstrap_global;
  std::vector<double> bootstrap_max;
  int G = 0;
  std::uint64_t seed = 0;
  int redraws = 0;
  int ridge_events = 0;
};

/// Wild bootstrap under H0. `fit` is the unconstrained model fit of `data`;
/// its Sigma_u and bandwidths are reused for every replicate.
TestReport wild_bootstrap(const FunctionalResponse& data, const ModelFit& fit, const LinearHypothesis& hyp,
                          const BootstrapOptions& options, const EstimationOptions& estimation = {});

/// One resampled path X_B(x_j) = sqrt(n) * fit of {tau_i r_i}, q x r per point.
std::vector<Eigen::MatrixXd> resample_path(const CoefficientEstimator& estimator,
                                           const std::vector<Eigen::MatrixXd>& residuals,
                                           std::span<const double> tau);

/// G independent paths; replicate g draws its tau from stream (seed, g).
std::vector<std::vector<Eigen::MatrixXd>> resample_XB(const CoefficientEstimator& estimator,
                                                      const std::vector<Eigen::MatrixXd>& residuals, int G,
                                                      std::uint64_t seed, int threads = 0);

/// Order statistic ceil((1 - alpha) G) of `values`. Throws TooFewResamples
/// when G < ceil(1 / alpha).
double upper_percentile(std::vector<double> values, double alpha);

struct CoefficientBand {
  int k = 0;
  int l = 0;
  std::vector<double> x;
  Eigen::VectorXd estimate;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double critical = 0.0;
};

CoefficientBand coefficient_band(const std::vector<std::vector<Eigen::MatrixXd>>& paths,
                                 const CoefficientField& field, int k, int l, double alpha, int subjects);

/// Critical value for the geodesic distance between S(B(x), z) and S(B_hat(x), z).
double spd_band_critical(const std::vector<std::vector<Eigen::MatrixXd>>& paths, const Eigen::VectorXd& z,
                         double alpha, int subjects);

/// Bandwidth for band estimates: h1 * shrink, raised to the smallest
/// feasible value on the grid when needed.
double band_bandwidth(const Grid& grid, double h1, double shrink = 1.0 / 6.0,
                      KernelType kernel = KernelType::Epanechnikov);

}  // namespace vcdf
