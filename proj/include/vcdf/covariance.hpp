#pragma once

// Individual deviation curves, their covariance Sigma_u(x, x') and the
// measurement-error covariance Sigma_eps(x, x).

#include <vector>

#include <Eigen/Core>

#include "vcdf/dataset.hpp"
#include "vcdf/estimation.hpp"
#include "vcdf/kernel.hpp"

namespace vcdf {

enum class CovarianceDivisor { NMinus6, NMinus1 };

struct CovarianceOptions {
  KernelType kernel = KernelType::Epanechnikov;
  CovarianceDivisor divisor = CovarianceDivisor::NMinus6;
  /// GCV denominator {1 - tr(S)/n_G}^2 instead of {1 - tr(S)/n}^2.
  bool gcv_grid_normalization = false;
};

/// n - 6 or n - 1; throws TooFewSubjects when the divisor is not positive.
double covariance_divisor(int subjects, const CovarianceOptions& options);

/// R_i with row j = v_i(x_j) - B(x_j) z_i. Throws GridMismatch when the
/// field is not evaluated on the data grid.
std::vector<Eigen::MatrixXd> residual_matrix(const FunctionalResponse& data, const CoefficientField& field);

struct DeviationField {
  std::vector<Eigen::MatrixXd> u_hat;  // n_G x q per subject
  Eigen::MatrixXd u_mean;              // n_G x q
  double bandwidth_h2 = 0.0;

  int subjects() const { return static_cast<int>(u_hat.size()); }
};

/// u_i = S R_i for the local-linear smoother S at bandwidth h2.
DeviationField smooth_deviations(const std::vector<Eigen::MatrixXd>& residuals, const Grid& grid, double h2,
                                 KernelType kernel = KernelType::Epanechnikov);

/// GCV(h2) = n^{-1} sum_i ||R_i - S R_i||_F^2 / {1 - n^{-1} tr S}^2.
/// Throws DegenerateDenominator when the normalized trace reaches 1.
double gcv_score(const std::vector<Eigen::MatrixXd>& residuals, const Grid& grid, double h2,
                 const CovarianceOptions& options = {});

BandwidthSelection select_h2(const std::vector<Eigen::MatrixXd>& residuals, const Grid& grid,
                             std::vector<double> candidates, const CovarianceOptions& options = {});

/// Stacked (q n_G) x (q n_G) estimate; block (j, k) is Sigma_u(x_j, x_k) and
/// lives at rows j*q.., columns k*q...
Eigen::MatrixXd estimate_sigma_u(const DeviationField& dev, const CovarianceOptions& options = {});

/// eps_i = R_i - u_i.
std::vector<Eigen::MatrixXd> error_residuals(const std::vector<Eigen::MatrixXd>& residuals,
                                             const DeviationField& dev);

/// Kernel-smoothed error covariance at each grid point. Throws EmptyWindow
/// when a grid point has no kernel mass.
std::vector<Eigen::MatrixXd> estimate_sigma_eps(const std::vector<Eigen::MatrixXd>& errors, const Grid& grid,
                                                double h3, const CovarianceOptions& options = {});

struct Cv2Score {
  double score = 0.0;
  /// Grid points where the normalizer needed a ridge term.
  int ridge_events = 0;
};

/// Leave-one-subject-out criterion for h3. The held-out estimate averages
/// the remaining n - 1 subjects.
Cv2Score cv2_score(const std::vector<Eigen::MatrixXd>& errors, const Grid& grid, double h3,
                   const CovarianceOptions& options = {});

BandwidthSelection select_h3(const std::vector<Eigen::MatrixXd>& errors, const Grid& grid,
                             std::vector<double> candidates, const CovarianceOptions& options = {});

/// Inverse of a symmetric PSD matrix, adding 1e-10 * tr / dim to the
/// diagonal when the condition number exceeds 1e12. Throws `on_zero` when
/// the trace vanishes. Sets *ridged when the ridge was used.
Eigen::MatrixXd ridge_inverse(const Eigen::MatrixXd& m, ErrorCode on_zero, bool* ridged = nullptr);

/// Symmetrize and clip negative eigenvalues at zero.
Eigen::MatrixXd psd_clip(const Eigen::MatrixXd& m);

struct CovarianceField {
  Eigen::MatrixXd sigma_u;
  std::vector<Eigen::MatrixXd> sigma_eps;
  double bandwidth_h2 = 0.0;
  double bandwidth_h3 = 0.0;
  int components = 0;

  int points() const { return components == 0 ? 0 : static_cast<int>(sigma_u.rows()) / components; }
  Eigen::MatrixXd sigma_u_block(int j, int k) const {
    return sigma_u.block(j * components, k * components, components, components);
  }
};

}  // namespace vcdf
