#include "spi/transfer.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "spi/error.hpp"
#include "support/oracles.hpp"

namespace spi {
namespace {

double objective(const Matrix& x, const Vector& y, const Vector& w, double b, double lambda) {
  const Vector r = y - x * w - Vector::Constant(y.size(), b);
  return r.squaredNorm() + lambda * w.squaredNorm();
}

double r_squared(const Vector& y, const Vector& pred) {
  const double mean = y.mean();
  return 1.0 - (y - pred).squaredNorm() / (y.array() - mean).matrix().squaredNorm();
}

TEST(Ridge, ExactLine) {
  Matrix x(2, 1);
  x << 0.0, 1.0;
  const std::vector<double> y = {0.0, 1.0};
  const RidgeRegressor r = fit_ridge(x, y, 0.0);
  EXPECT_NEAR(r.weights()[0], 1.0, 1e-12);
  EXPECT_NEAR(r.intercept(), 0.0, 1e-12);
  EXPECT_NEAR(r.predict(std::vector<double>{0.5}), 0.5, 1e-12);
}

TEST(Ridge, HugeLambdaPredictsMean) {
  Rng rng(1);
  const Matrix x = testing::random_matrix(30, 4, rng);
  const Vector y = testing::random_vector(30, rng, 3.0);
  const RidgeRegressor r = fit_ridge(x, as_span(y), 1e9);
  for (Index i = 0; i < x.rows(); ++i) EXPECT_NEAR(r.predict(row_of(x, i)), y.mean(), 1e-3);
}

TEST(Ridge, MatchesNormalEquationOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Matrix x = testing::random_matrix(20, 5, rng);
    const Vector y = testing::random_vector(20, rng);
    const RidgeRegressor r = fit_ridge(x, as_span(y), 0.1);
    const auto oracle = testing::ridge_oracle(x, testing::to_std(y), 0.1);
    for (Index j = 0; j < 5; ++j) EXPECT_NEAR(r.weights()[j], oracle[static_cast<std::size_t>(j)], 1e-8);
    EXPECT_NEAR(r.intercept(), oracle[5], 1e-8);
  }
}

TEST(Ridge, WideDesignMatchesOracle) {
  // More columns than rows routes through the dual system.
  Rng rng(3);
  const Matrix x = testing::random_matrix(8, 15, rng);
  const Vector y = testing::random_vector(8, rng);
  const RidgeRegressor r = fit_ridge(x, as_span(y), 0.7);
  const auto oracle = testing::ridge_oracle(x, testing::to_std(y), 0.7);
  for (Index j = 0; j < 15; ++j) EXPECT_NEAR(r.weights()[j], oracle[static_cast<std::size_t>(j)], 1e-8);
  EXPECT_NEAR(r.intercept(), oracle[15], 1e-8);
}

TEST(Ridge, SingularDesignWithoutPenalty) {
  Matrix x(4, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8;
  const std::vector<double> y = {1, 2, 3, 4};
  try {
    fit_ridge(x, y, 0.0);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_STREQ(e.what(), "singular design; increase lambda");
  }
  EXPECT_NO_THROW(fit_ridge(x, y, 0.5));
  EXPECT_THROW(fit_ridge(x, y, -1.0), UsageError);
  EXPECT_THROW(fit_ridge(x, std::vector<double>{1, 2}, 1.0), DataError);
}

TEST(Ridge, PerturbingWeightsNeverImprovesObjective) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 40);
    const Matrix x = testing::random_matrix(25, 4, rng);
    const Vector y = testing::random_vector(25, rng);
    const double lambda = 0.5;
    const RidgeRegressor r = fit_ridge(x, as_span(y), lambda);
    const double base = objective(x, y, r.weights(), r.intercept(), lambda);
    for (Index j = 0; j < 4; ++j) {
      for (double eps : {1e-4, -1e-4}) {
        Vector w = r.weights();
        w[j] += eps;
        EXPECT_GE(objective(x, y, w, r.intercept(), lambda), base);
      }
    }
    for (double eps : {1e-4, -1e-4}) {
      EXPECT_GE(objective(x, y, r.weights(), r.intercept() + eps, lambda), base);
    }
  }
}

TEST(Ridge, ShrinkageIsMonotone) {
  Rng rng(77);
  const Matrix x = testing::random_matrix(30, 6, rng);
  const Vector y = testing::random_vector(30, rng);
  double previous = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e4}) {
    const double norm = fit_ridge(x, as_span(y), lambda).weights().norm();
    EXPECT_LE(norm, previous + 1e-12) << lambda;
    previous = norm;
  }
}

TEST(Ridge, MultiTargetMatchesSingle) {
  Rng rng(5);
  const Matrix x = testing::random_matrix(12, 3, rng);
  const Matrix targets = testing::random_matrix(12, 4, rng);
  const auto multi = fit_ridge_multi(x, targets, 0.3);
  ASSERT_EQ(multi.size(), 4u);
  for (Index k = 0; k < 4; ++k) {
    const Vector col = targets.col(k);
    const RidgeRegressor single = fit_ridge(x, as_span(col), 0.3);
    EXPECT_NEAR((multi[static_cast<std::size_t>(k)].weights() - single.weights()).norm(), 0.0, 1e-10);
    EXPECT_NEAR(multi[static_cast<std::size_t>(k)].intercept(), single.intercept(), 1e-10);
  }
  SparseMatrix sparse = x.sparseView();
  const auto from_sparse = fit_ridge_multi(sparse, targets, 0.3);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR((from_sparse[k].weights() - multi[k].weights()).norm(), 0.0, 1e-10);
  }
}

TEST(LeafVector, SingleTreeDenseForm) {
  Matrix data(2, 1);
  data << 0.0, 1.0;
  const IsolationForest f = fit_forest(data, {.tree_count = 1, .max_depth = 8, .seed = 3});
  const LeafScoreVector z = build_leaf_vector(f, row_of(data, 0));
  ASSERT_EQ(z.total_dim, 2u);
  const Vector dense = z.dense();
  const LeafHit hit = leaf_of(f.trees[0], row_of(data, 0));
  EXPECT_DOUBLE_EQ(dense[hit.leaf_index], 1.0);
  EXPECT_DOUBLE_EQ(dense[1 - hit.leaf_index], 0.0);
}

TEST(LeafVector, BlockStructureAndSum) {
  Rng rng(2);
  const Matrix data = testing::random_matrix(40, 3, rng);
  const IsolationForest f = fit_forest(data, {.tree_count = 6, .subsample_size = 16, .seed = 8});
  const auto offsets = f.leaf_offsets();
  const Matrix probes = testing::random_matrix(30, 3, rng, 2.0);
  for (Index i = 0; i < probes.rows(); ++i) {
    const LeafScoreVector z = build_leaf_vector(f, row_of(probes, i));
    ASSERT_EQ(z.entries.size(), 6u);
    EXPECT_EQ(z.total_dim, f.total_leaves());
    double sum = 0.0;
    for (std::size_t k = 0; k < 6; ++k) {
      const LeafEntry& e = z.entries[k];
      EXPECT_EQ(e.tree, k);
      EXPECT_GE(e.index, offsets[k]);
      EXPECT_LT(e.index, offsets[k] + static_cast<std::size_t>(f.trees[k].leaf_count));
      EXPECT_EQ(e.index, offsets[k] + e.leaf);
      EXPECT_GE(e.value, 0.0);
      EXPECT_DOUBLE_EQ(e.value, tree_score(f.trees[k], row_of(probes, i)));
      sum += e.value;
    }
    EXPECT_EQ(z.sum(), sum);
    EXPECT_EQ(z.sum(), forest_score(f, row_of(probes, i)));
    EXPECT_EQ((z.dense().array() != 0.0).count(), 6);
  }
  EXPECT_THROW(build_leaf_vector(f, std::vector<double>{1.0}), DataError);
}

TEST(LeafVector, TwoTreesWithTwoAndThreeLeaves) {
  IsolationForest f;
  f.feature_dim = 1;
  f.config.tree_count = 2;
  IsoTree a;
  a.feature_dim = 1;
  a.sample_size = 2;
  a.leaf_count = 2;
  a.nodes = {{0, 0.0, 1, 2, -1, 0, 2}, {-1, 0, -1, -1, 0, 1, 1}, {-1, 0, -1, -1, 1, 1, 1}};
  IsoTree b;
  b.feature_dim = 1;
  b.sample_size = 3;
  b.leaf_count = 3;
  b.nodes = {{0, 0.0, 1, 2, -1, 0, 3},     {-1, 0, -1, -1, 0, 1, 1}, {0, 1.0, 3, 4, -1, 1, 2},
             {-1, 0, -1, -1, 1, 2, 1}, {-1, 0, -1, -1, 2, 2, 1}};
  f.trees = {a, b};
  const LeafScoreVector z = build_leaf_vector(f, std::vector<double>{0.5});
  EXPECT_EQ(z.total_dim, 5u);
  const Vector d = z.dense();
  EXPECT_EQ((d.array() != 0.0).count(), 2);
  EXPECT_NE(d[1], 0.0);
  EXPECT_NE(d[3], 0.0);
}

TEST(Fragments, ConstantPrivilegedTree) {
  Rng rng(4);
  const Matrix x = testing::random_matrix(20, 3, rng);
  const Matrix x_star = Matrix::Constant(20, 2, 1.0);
  const IsolationForest f = fit_forest(x, {.tree_count = 5, .seed = 1});
  const IsolationForest fs = fit_forest(x_star, {.tree_count = 1, .seed = 2});
  const auto z = build_leaf_vectors(f, x);
  const FragmentSet frags = fit_fragment_regressors(z, fs, x_star, 1.0);
  ASSERT_EQ(frags.regressors.size(), 1u);
  const Matrix probes = testing::random_matrix(10, 3, rng);
  for (Index i = 0; i < probes.rows(); ++i) {
    EXPECT_NEAR(predict_fragment_vector(frags, build_leaf_vector(f, row_of(probes, i)))[0], 1.0, 1e-10);
  }
}

TEST(Fragments, LengthMatchesPrivilegedTreesAndDotProduct) {
  Rng rng(6);
  const Matrix x = testing::random_matrix(30, 3, rng);
  const Matrix x_star = testing::random_matrix(30, 2, rng);
  const IsolationForest f = fit_forest(x, {.tree_count = 8, .subsample_size = 16, .seed = 1});
  const IsolationForest fs = fit_forest(x_star, {.tree_count = 3, .subsample_size = 16, .seed = 2});
  const auto z = build_leaf_vectors(f, x);
  const FragmentSet frags = fit_fragment_regressors(z, fs, x_star, 0.5);
  ASSERT_EQ(frags.regressors.size(), 3u);
  const Matrix phi = predict_fragment_matrix(frags, z);
  ASSERT_EQ(phi.rows(), 30);
  ASSERT_EQ(phi.cols(), 3);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Vector dense = z[i].dense();
    const Vector v = predict_fragment_vector(frags, z[i]);
    for (std::size_t k = 0; k < 3; ++k) {
      const double oracle = frags.regressors[k].weights().dot(dense) + frags.regressors[k].intercept();
      EXPECT_NEAR(v[static_cast<Index>(k)], oracle, 1e-12);
      EXPECT_EQ(phi(static_cast<Index>(i), static_cast<Index>(k)), v[static_cast<Index>(k)]);
    }
  }
}

TEST(Fragments, ConstantRegressorsGiveIntercepts) {
  FragmentSet frags;
  frags.regressors = {RidgeRegressor(Vector::Zero(4), 1.5, 0.0), RidgeRegressor(Vector::Zero(4), -2.0, 0.0)};
  LeafScoreVector z;
  z.total_dim = 4;
  z.entries = {{0, 1, 1, 0.7}, {1, 0, 2, 0.3}};
  const Vector v = predict_fragment_vector(frags, z);
  ASSERT_EQ(v.size(), 2);
  EXPECT_EQ(v[0], 1.5);
  EXPECT_EQ(v[1], -2.0);
  z.total_dim = 5;
  EXPECT_THROW(predict_fragment_vector(frags, z), DataError);
}

TEST(Fragments, MimicWhenSpacesCoincide) {
  Rng rng(10);
  const Matrix x = testing::random_matrix(50, 3, rng);
  const IsolationForest f = fit_forest(x, {.tree_count = 50, .subsample_size = 50, .seed = 1});
  const IsolationForest fs = fit_forest(x, {.tree_count = 5, .subsample_size = 50, .seed = 2});
  const auto z = build_leaf_vectors(f, x);
  const FragmentSet frags = fit_fragment_regressors(z, fs, x, 1e-6);
  const Matrix phi = predict_fragment_matrix(frags, z);
  for (std::size_t k = 0; k < fs.trees.size(); ++k) {
    Vector target(x.rows());
    for (Index i = 0; i < x.rows(); ++i) target[i] = tree_score(fs.trees[k], row_of(x, i));
    EXPECT_GE(r_squared(target, phi.col(static_cast<Index>(k))), 0.9) << k;
  }
}

TEST(FeatureTransfer, CopiedColumnIsReproduced) {
  Rng rng(12);
  const Matrix x = testing::random_matrix(40, 3, rng);
  Matrix x_star = x.col(1);
  const FeatureTransferModel m = fit_feature_transfer(x, x_star, 1e-8);
  ASSERT_EQ(m.regressors.size(), 1u);
  const Matrix pred = apply_feature_transfer(m, x);
  EXPECT_GT(r_squared(x_star.col(0), pred.col(0)), 0.999999);
}

TEST(FeatureTransfer, RecoversLinearMap) {
  Rng rng(13);
  const Index n = 500;
  const Matrix x = testing::random_matrix(n, 3, rng);
  Matrix a(4, 3);
  a << 1, -2, 0.5, 0, 1, 1, 3, 0, -1, 0.2, 0.4, 0.6;
  Matrix x_star = x * a.transpose();
  x_star += testing::random_matrix(n, 4, rng, 0.1);
  const FeatureTransferModel m = fit_feature_transfer(x, x_star, 1e-3);
  ASSERT_EQ(m.regressors.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) {
    for (Index c = 0; c < 3; ++c) {
      EXPECT_NEAR(m.regressors[j].weights()[c], a(static_cast<Index>(j), c), 0.1);
    }
  }
}

TEST(FeatureTransfer, ApplyMatchesOracle) {
  FeatureTransferModel zero;
  zero.input_dim = 3;
  zero.regressors = {RidgeRegressor(Vector::Zero(3), 0.25, 1.0), RidgeRegressor(Vector::Zero(3), -4.0, 1.0)};
  const Vector out = apply_feature_transfer(zero, std::vector<double>{9, 9, 9});
  ASSERT_EQ(out.size(), 2);
  EXPECT_EQ(out[0], 0.25);
  EXPECT_EQ(out[1], -4.0);
  EXPECT_THROW(apply_feature_transfer(zero, std::vector<double>{1, 2}), DataError);

  Rng rng(14);
  FeatureTransferModel m;
  m.input_dim = 3;
  for (int j = 0; j < 2; ++j) {
    m.regressors.emplace_back(testing::random_vector(3, rng), standard_normal(rng), 1.0);
  }
  const Vector x = testing::random_vector(3, rng);
  const Vector y = apply_feature_transfer(m, as_span(x));
  for (std::size_t j = 0; j < 2; ++j) {
    const double oracle = x[0] * m.regressors[j].weights()[0] + x[1] * m.regressors[j].weights()[1] +
                          x[2] * m.regressors[j].weights()[2] + m.regressors[j].intercept();
    EXPECT_NEAR(y[static_cast<Index>(j)], oracle, 1e-12);
  }
}

}  // namespace
}  // namespace spi
