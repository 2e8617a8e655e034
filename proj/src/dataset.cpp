#include "vcdf/dataset.hpp"

#include <Eigen/Eigenvalues>

namespace vcdf {

void FunctionalResponse::validate() const {
  if (covariates.rows() != static_cast<Eigen::Index>(values.size())) {
    throw Error(ErrorCode::ShapeMismatch, "covariate rows do not match subject count");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows() != grid.size() || values[i].cols() != metric.size()) {
      throw Error(ErrorCode::ShapeMismatch, "response block of subject " + std::to_string(i) + " has wrong shape");
    }
  }
}

FunctionalResponse FunctionalResponse::without_subject(int i) const {
  FunctionalResponse out{grid, Eigen::MatrixXd(subjects() - 1, covariate_count()), {}, metric};
  out.values.reserve(values.size() - 1);
  for (int k = 0, row = 0; k < subjects(); ++k) {
    if (k == i) continue;
    out.covariates.row(row++) = covariates.row(k);
    out.values.push_back(values[static_cast<std::size_t>(k)]);
  }
  return out;
}

FunctionalResponse FunctionalResponse::with_covariates(const std::vector<int>& columns) const {
  FunctionalResponse out{grid, Eigen::MatrixXd(subjects(), static_cast<Eigen::Index>(columns.size())), values,
                         metric};
  for (std::size_t c = 0; c < columns.size(); ++c) out.covariates.col(static_cast<Eigen::Index>(c)) = covariates.col(columns[c]);
  return out;
}

TractDataset::TractDataset(Grid grid, std::vector<std::vector<Tensor>> tensors, Eigen::MatrixXd covariates,
                           std::vector<std::string> covariate_names, std::string units)
    : tensors_(std::move(tensors)), names_(std::move(covariate_names)), units_(std::move(units)) {
  const auto n = static_cast<Eigen::Index>(tensors_.size());
  if (covariates.rows() != n) throw Error(ErrorCode::ValidationError, "covariate rows do not match subject count");
  if (static_cast<Eigen::Index>(names_.size()) != covariates.cols()) {
    throw Error(ErrorCode::ValidationError, "covariate names do not match covariate columns");
  }
  if (n < covariates.cols()) throw Error(ErrorCode::ValidationError, "fewer subjects than covariates");

  const Eigen::MatrixXd omega = covariates.transpose() * covariates / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * hi)) throw Error(ErrorCode::ValidationError, "covariate Gram matrix is singular");
  gram_condition_ = hi / lo;

  log_.grid = std::move(grid);
  log_.covariates = std::move(covariates);
  log_.metric = frobenius_weights<double>();
  log_.values.resize(tensors_.size());
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (static_cast<int>(tensors_[i].size()) != log_.grid.size()) {
      throw Error(ErrorCode::ValidationError, "subject " + std::to_string(i) + " has wrong point count");
    }
    log_.values[i].resize(log_.grid.size(), 6);
    for (int j = 0; j < log_.grid.size(); ++j) {
      log_.values[i].row(j) = vecs(matrix_log(tensors_[i][static_cast<std::size_t>(j)])).transpose();
    }
  }
}

int TractDataset::covariate_index(const std::string& name) const {
  for (std::size_t k = 0; k < names_.size(); ++k)
    if (names_[k] == name) return static_cast<int>(k);
  throw Error(ErrorCode::ValidationError, "unknown covariate '" + name + "'");
}

FunctionalResponse scalar_response(const TractDataset& data, ScalarQuantity quantity) {
  const int q = quantity == ScalarQuantity::FAandMD ? 2 : 1;
  FunctionalResponse out{data.grid(), data.covariates(), {}, Eigen::VectorXd::Ones(q)};
  out.values.resize(static_cast<std::size_t>(data.subjects()));
  for (int i = 0; i < data.subjects(); ++i) {
    auto& v = out.values[static_cast<std::size_t>(i)];
    v.resize(data.points(), q);
    for (int j = 0; j < data.points(); ++j) {
      const auto sd = scalar_diffusion(data.tensor(i, j));
      switch (quantity) {
        case ScalarQuantity::FA: v(j, 0) = sd.fa; break;
        case ScalarQuantity::MD: v(j, 0) = sd.md; break;
        case ScalarQuantity::FAandMD:
          v(j, 0) = sd.fa;
          v(j, 1) = sd.md;
          break;
      }
    }
  }
  if (q == 2) {
    // Put FA and MD on a common scale for the cross-validation distance.
    for (int k = 0; k < q; ++k) {
      double sum = 0.0, sum_sq = 0.0, count = 0.0;
      for (const auto& v : out.values) {
        sum += v.col(k).sum();
        sum_sq += v.col(k).squaredNorm();
        count += static_cast<double>(v.rows());
      }
      const double var = sum_sq / count - (sum / count) * (sum / count);
      out.metric[k] = var > 0.0 ? 1.0 / var : 1.0;
    }
  }
  return out;
}

}  // namespace vcdf
