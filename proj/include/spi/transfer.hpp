#pragma once

// Knowledge transfer between feature spaces: leaf-score encodings of the
// decision-space forest, ridge regressors over them, and the direct
// feature-transfer baseline.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "spi/forest.hpp"
#include "spi/types.hpp"

namespace spi {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct LeafEntry {
  std::uint32_t tree;
  std::uint32_t leaf;
  // Position in the concatenated leaf space.
  std::size_t index;
  double value;
};

// One entry per tree, ordered by tree; every other coordinate is zero.
struct LeafScoreVector {
  std::vector<LeafEntry> entries;
  std::size_t total_dim = 0;

  Vector dense() const;
  double sum() const;
};

class RidgeRegressor {
 public:
  RidgeRegressor() = default;
  RidgeRegressor(Vector weights, double intercept, double lambda);

  double predict(std::span<const double> x) const;
  double predict(const LeafScoreVector& z) const;

  const Vector& weights() const { return weights_; }
  double intercept() const { return intercept_; }
  double lambda() const { return lambda_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(weights_.size()); }

 private:
  Vector weights_;
  double intercept_ = 0.0;
  double lambda_ = 0.0;
};

// Minimizes sum (y - w.x - b)^2 + lambda |w|^2 with an unpenalized intercept.
// Solves the primal normal equations when inputs have no more columns than
// rows, otherwise the equivalent dual (Gram) system.
RidgeRegressor fit_ridge(const Matrix& inputs, std::span<const double> targets, double lambda);

// One regressor per target column, sharing a single factorization.
std::vector<RidgeRegressor> fit_ridge_multi(const Matrix& inputs, const Matrix& targets,
                                            double lambda);
std::vector<RidgeRegressor> fit_ridge_multi(const SparseMatrix& inputs, const Matrix& targets,
                                            double lambda);

LeafScoreVector build_leaf_vector(const IsolationForest& forest, std::span<const double> x);
std::vector<LeafScoreVector> build_leaf_vectors(const IsolationForest& forest, const Matrix& rows);

// Stacks leaf vectors into an n x total_dim sparse design.
SparseMatrix to_design(std::span<const LeafScoreVector> z);

struct FragmentSet {
  std::vector<RidgeRegressor> regressors;
};

// The k-th regressor maps leaf vectors onto the k-th privileged tree's score.
FragmentSet fit_fragment_regressors(std::span<const LeafScoreVector> z,
                                    const IsolationForest& privileged_forest,
                                    const Matrix& x_star, double lambda);

Vector predict_fragment_vector(const FragmentSet& fragments, const LeafScoreVector& z);

// Fragment vectors for many encodings, one row per input.
Matrix predict_fragment_matrix(const FragmentSet& fragments, std::span<const LeafScoreVector> z);

struct FeatureTransferModel {
  std::vector<RidgeRegressor> regressors;
  std::size_t input_dim = 0;
};

FeatureTransferModel fit_feature_transfer(const Matrix& x, const Matrix& x_star, double lambda);

Vector apply_feature_transfer(const FeatureTransferModel& model, std::span<const double> x);

Matrix apply_feature_transfer(const FeatureTransferModel& model, const Matrix& x);

}  // namespace spi
