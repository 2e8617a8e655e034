#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "vcdf/kernel.hpp"
#include "vcdf/spd.hpp"

namespace vcdf {

/// Vector-valued functional responses on a shared grid: subject i carries an
/// n_G x q matrix whose row j is the response at x_j. `metric` holds the
/// per-component weights of the squared distance used by cross-validation
/// (Frobenius weights for vecs-encoded tensors).
struct FunctionalResponse {
  Grid grid;
  Eigen::MatrixXd covariates;  // n x r
  std::vector<Eigen::MatrixXd> values;
  Eigen::VectorXd metric;

  int subjects() const { return static_cast<int>(values.size()); }
  int points() const { return grid.size(); }
  int covariate_count() const { return static_cast<int>(covariates.cols()); }
  int components() const { return static_cast<int>(metric.size()); }

  /// Throws ShapeMismatch when the blocks disagree in size.
  void validate() const;
  /// Copy with subject `i` removed.
  FunctionalResponse without_subject(int i) const;
  /// Copy keeping only the listed covariate columns.
  FunctionalResponse with_covariates(const std::vector<int>& columns) const;
};

/// n subjects x n_G points of diffusion tensors plus per-subject covariates.
/// The vecs(log S) responses are computed once at construction.
class TractDataset {
 public:
  using Tensor = SpdTensor<double>;

  TractDataset() = default;

  /// Validates sizes, n >= r and an invertible covariate Gram matrix.
  TractDataset(Grid grid, std::vector<std::vector<Tensor>> tensors, Eigen::MatrixXd covariates,
               std::vector<std::string> covariate_names, std::string units = "mm^2/s");

  const Grid& grid() const { return log_.grid; }
  int subjects() const { return static_cast<int>(tensors_.size()); }
  int points() const { return log_.grid.size(); }
  int covariate_count() const { return static_cast<int>(log_.covariates.cols()); }
  const Tensor& tensor(int i, int j) const { return tensors_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
  const Eigen::MatrixXd& covariates() const { return log_.covariates; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  const std::string& units() const { return units_; }
  /// Condition number of n^{-1} sum z_i z_i^T.
  double gram_condition() const { return gram_condition_; }

  /// vecs(log S_i(x_j)) with Frobenius metric weights.
  const FunctionalResponse& log_response() const { return log_; }

  /// Index of a named covariate; throws ValidationError if absent.
  int covariate_index(const std::string& name) const;

 private:
  std::vector<std::vector<Tensor>> tensors_;
  std::vector<std::string> names_;
  std::string units_;
  FunctionalResponse log_;
  double gram_condition_ = 0.0;
};

/// Scalar-diffusion responses (FA, MD or both) derived per tensor.
enum class ScalarQuantity { FA, MD, FAandMD };
FunctionalResponse scalar_response(const TractDataset& data, ScalarQuantity quantity);

}  // namespace vcdf
