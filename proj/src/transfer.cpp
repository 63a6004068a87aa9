#include "spi/transfer.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "spi/error.hpp"
#include "spi/parallel.hpp"

namespace spi {

namespace {

[[noreturn]] void throw_dim(const char* what, std::size_t expected, std::size_t got) {
  throw DataError(std::string("dimension mismatch in ") + what + ": expected " +
                  std::to_string(expected) + ", got " + std::to_string(got));
}

Eigen::MatrixXd solve_normal_system(const Eigen::MatrixXd& system, const Eigen::MatrixXd& rhs,
                                    double lambda) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
  if (ldlt.info() != Eigen::Success) throw NumericError("singular design; increase lambda");
  const Vector pivots = ldlt.vectorD();
  const double largest = pivots.cwiseAbs().maxCoeff();
  const double smallest = pivots.minCoeff();
  const double floor = lambda > 0.0 ? 0.0 : 1e-12 * largest;
  if (!(smallest > floor)) throw NumericError("singular design; increase lambda");
  return ldlt.solve(rhs);
}

Eigen::MatrixXd to_dense(const Eigen::MatrixXd& m) { return m; }
template <typename Expr>
Eigen::MatrixXd to_dense(const Eigen::SparseMatrixBase<Expr>& m) {
  return Eigen::MatrixXd(m);
}

template <typename Design>
std::vector<RidgeRegressor> solve_ridge(const Design& inputs, const Matrix& targets,
                                        double lambda) {
  const Index n = inputs.rows();
  const Index q = inputs.cols();
  if (n < 1) throw DataError("empty dataset");
  if (q < 1) throw DataError("no features");
  if (targets.rows() != n) throw_dim("ridge targets", n, targets.rows());
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be >= 0");

  const Vector ones = Vector::Ones(n);
  const Vector input_mean = (inputs.transpose() * ones) / static_cast<double>(n);
  const Eigen::RowVectorXd target_mean = targets.colwise().mean();
  const Eigen::MatrixXd centered_targets = targets.rowwise() - target_mean;

  Eigen::MatrixXd weights;
  if (q <= n) {
    Eigen::MatrixXd system = to_dense(inputs.transpose() * inputs);
    system -= static_cast<double>(n) * input_mean * input_mean.transpose();
    system.diagonal().array() += lambda;
    const Eigen::MatrixXd rhs = to_dense(inputs.transpose() * centered_targets);
    weights = solve_normal_system(system, rhs, lambda);
  } else {
    // Dual form: w = Xc' a with (Xc Xc' + lambda I) a = yc.
    const Eigen::MatrixXd gram = to_dense(inputs * inputs.transpose());
    const Vector row_mean = gram.rowwise().mean();
    const double grand_mean = row_mean.mean();
    Eigen::MatrixXd system = gram;
    system.colwise() -= row_mean;
    system.rowwise() -= row_mean.transpose();
    system.array() += grand_mean;
    system.diagonal().array() += lambda;
    const Eigen::MatrixXd dual = solve_normal_system(system, centered_targets, lambda);
    weights = to_dense(inputs.transpose() * dual);
    weights -= input_mean * dual.colwise().sum();
  }
  if (!weights.allFinite()) throw NumericError("singular design; increase lambda");

  std::vector<RidgeRegressor> out;
  out.reserve(static_cast<std::size_t>(targets.cols()));
  for (Index t = 0; t < targets.cols(); ++t) {
    const Vector w = weights.col(t);
    const double intercept = target_mean[t] - input_mean.dot(w);
    out.emplace_back(w, intercept, lambda);
  }
  return out;
}

}  // namespace

Vector LeafScoreVector::dense() const {
  Vector out = Vector::Zero(static_cast<Index>(total_dim));
  for (const auto& e : entries) out[static_cast<Index>(e.index)] = e.value;
  return out;
}

double LeafScoreVector::sum() const {
  double total = 0.0;
  for (const auto& e : entries) total += e.value;
  return total;
}

RidgeRegressor::RidgeRegressor(Vector weights, double intercept, double lambda)
    : weights_(std::move(weights)), intercept_(intercept), lambda_(lambda) {}

double RidgeRegressor::predict(std::span<const double> x) const {
  if (x.size() != input_dim()) throw_dim("regressor input", input_dim(), x.size());
  double acc = intercept_;
  for (std::size_t i = 0; i < x.size(); ++i) acc += weights_[static_cast<Index>(i)] * x[i];
  return acc;
}

double RidgeRegressor::predict(const LeafScoreVector& z) const {
  if (z.total_dim != input_dim()) throw_dim("leaf vector", input_dim(), z.total_dim);
  double acc = intercept_;
  for (const auto& e : z.entries) acc += weights_[static_cast<Index>(e.index)] * e.value;
  return acc;
}

RidgeRegressor fit_ridge(const Matrix& inputs, std::span<const double> targets, double lambda) {
  if (static_cast<Index>(targets.size()) != inputs.rows()) {
    throw_dim("ridge targets", static_cast<std::size_t>(inputs.rows()), targets.size());
  }
  Matrix y(inputs.rows(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) y(static_cast<Index>(i), 0) = targets[i];
  return solve_ridge(Eigen::MatrixXd(inputs), y, lambda).front();
}

std::vector<RidgeRegressor> fit_ridge_multi(const Matrix& inputs, const Matrix& targets,
                                            double lambda) {
  return solve_ridge(Eigen::MatrixXd(inputs), targets, lambda);
}

std::vector<RidgeRegressor> fit_ridge_multi(const SparseMatrix& inputs, const Matrix& targets,
                                            double lambda) {
  return solve_ridge(inputs, targets, lambda);
}

LeafScoreVector build_leaf_vector(const IsolationForest& forest, std::span<const double> x) {
  if (static_cast<std::int64_t>(x.size()) != forest.feature_dim) {
    throw_dim("leaf vector input", static_cast<std::size_t>(forest.feature_dim), x.size());
  }
  LeafScoreVector z;
  z.entries.reserve(forest.trees.size());
  std::size_t offset = 0;
  for (std::size_t k = 0; k < forest.trees.size(); ++k) {
    const IsoTree& tree = forest.trees[k];
    const LeafHit hit = leaf_of(tree, x);
    const double value =
        (hit.depth + path_correction(hit.training_count)) / path_correction(tree.sample_size);
    z.entries.push_back({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(hit.leaf_index),
                         offset + static_cast<std::size_t>(hit.leaf_index), value});
    offset += static_cast<std::size_t>(tree.leaf_count);
  }
  z.total_dim = offset;
  return z;
}

std::vector<LeafScoreVector> build_leaf_vectors(const IsolationForest& forest, const Matrix& rows) {
  std::vector<LeafScoreVector> out(static_cast<std::size_t>(rows.rows()));
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = build_leaf_vector(forest, row_of(rows, static_cast<Index>(i)));
  });
  return out;
}

SparseMatrix to_design(std::span<const LeafScoreVector> z) {
  const std::size_t dim = z.empty() ? 0 : z.front().total_dim;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i].total_dim != dim) throw_dim("leaf design", dim, z[i].total_dim);
    for (const auto& e : z[i].entries) {
      triplets.emplace_back(static_cast<Index>(i), static_cast<Index>(e.index), e.value);
    }
  }
  SparseMatrix design(static_cast<Index>(z.size()), static_cast<Index>(dim));
  design.setFromTriplets(triplets.begin(), triplets.end());
  return design;
}

FragmentSet fit_fragment_regressors(std::span<const LeafScoreVector> z,
                                    const IsolationForest& privileged_forest,
                                    const Matrix& x_star, double lambda) {
  if (static_cast<Index>(z.size()) != x_star.rows()) {
    throw_dim("fragment rows", z.size(), static_cast<std::size_t>(x_star.rows()));
  }
  if (z.size() < 2) throw DataError("need at least 2 rows to fit fragment regressors");
  const auto n = static_cast<Index>(z.size());
  const auto fragments = static_cast<Index>(privileged_forest.trees.size());
  Matrix targets(n, fragments);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto row = row_of(x_star, static_cast<Index>(i));
    for (Index k = 0; k < fragments; ++k) {
      targets(static_cast<Index>(i), k) = tree_score(privileged_forest.trees[static_cast<std::size_t>(k)], row);
    }
  });
  return FragmentSet{fit_ridge_multi(to_design(z), targets, lambda)};
}

Vector predict_fragment_vector(const FragmentSet& fragments, const LeafScoreVector& z) {
  Vector out(static_cast<Index>(fragments.regressors.size()));
  for (std::size_t k = 0; k < fragments.regressors.size(); ++k) {
    out[static_cast<Index>(k)] = fragments.regressors[k].predict(z);
  }
  return out;
}

Matrix predict_fragment_matrix(const FragmentSet& fragments, std::span<const LeafScoreVector> z) {
  Matrix out(static_cast<Index>(z.size()), static_cast<Index>(fragments.regressors.size()));
  parallel_for(z.size(), [&](std::size_t i) {
    out.row(static_cast<Index>(i)) = predict_fragment_vector(fragments, z[i]).transpose();
  });
  return out;
}

FeatureTransferModel fit_feature_transfer(const Matrix& x, const Matrix& x_star, double lambda) {
  if (x.rows() != x_star.rows()) {
    throw_dim("feature transfer rows", static_cast<std::size_t>(x.rows()),
              static_cast<std::size_t>(x_star.rows()));
  }
  if (x.rows() < 2) throw DataError("need at least 2 rows to fit feature transfer");
  return FeatureTransferModel{fit_ridge_multi(x, x_star, lambda), static_cast<std::size_t>(x.cols())};
}

Vector apply_feature_transfer(const FeatureTransferModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim) throw_dim("feature transfer input", model.input_dim, x.size());
  Vector out(static_cast<Index>(model.regressors.size()));
  for (std::size_t j = 0; j < model.regressors.size(); ++j) {
    out[static_cast<Index>(j)] = model.regressors[j].predict(x);
  }
  return out;
}

Matrix apply_feature_transfer(const FeatureTransferModel& model, const Matrix& x) {
  Matrix out(x.rows(), static_cast<Index>(model.regressors.size()));
  for (Index i = 0; i < x.rows(); ++i) {
    out.row(i) = apply_feature_transfer(model, row_of(x, i)).transpose();
  }
  return out;
}

}  // namespace spi
