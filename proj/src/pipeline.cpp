#include "spi/pipeline.hpp"

#include <string>

#include "spi/error.hpp"
#include "spi/parallel.hpp"
#include "spi/random.hpp"

namespace spi {

namespace {

enum StreamKey : std::uint64_t { kDecisionForest = 1, kPrivilegedForest, kPairs, kFtForest };

ForestConfig forest_config(const DetectorOptions& options, int trees, StreamKey key) {
  ForestConfig config;
  config.tree_count = trees;
  config.subsample_size = options.subsample_size;
  config.max_depth = options.max_depth;
  config.seed = derive_seed(options.seed, {key});
  return config;
}

int privileged_tree_count(const DetectorOptions& options) {
  return options.privileged_trees > 0 ? options.privileged_trees : options.trees;
}

void train_spi(TrainedDetector& model, const Matrix& x, const Matrix& x_star) {
  const DetectorOptions& options = model.options;
  model.privileged_forest = fit_forest(
      x_star, forest_config(options, privileged_tree_count(options), kPrivilegedForest));
  model.decision_forest = fit_forest(x, forest_config(options, options.trees, kDecisionForest));
  const std::vector<LeafScoreVector> z = build_leaf_vectors(*model.decision_forest, x);
  const Vector s_star = forest_scores(*model.privileged_forest, x_star);

  if (model.kind == DetectorKind::kSpiLite) {
    Matrix targets = s_star;
    model.lite_regressor = fit_ridge_multi(to_design(z), targets, options.lambda).front();
    return;
  }

  model.fragments = fit_fragment_regressors(z, *model.privileged_forest, x_star, options.lambda);
  const Matrix phi = predict_fragment_matrix(*model.fragments, z);
  const std::vector<PairTarget> pairs = pairwise_targets(
      as_span(s_star), options.max_pairs, derive_seed(options.seed, {kPairs}));
  if (options.ranker == RankerType::kLinear) {
    model.ranker = fit_linear_ranker(phi, pairs, options.optimizer);
  } else {
    const RbfKernel kernel{options.kernel_bandwidth.value_or(median_heuristic_bandwidth(phi))};
    model.ranker = fit_kernel_ranker(phi, pairs, kernel, options.optimizer);
  }
}

}  // namespace

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kIf: return "if";
    case DetectorKind::kIfStar: return "if-star";
    case DetectorKind::kFt: return "ft";
    case DetectorKind::kSpiLite: return "spi-lite";
    case DetectorKind::kSpi: return "spi";
  }
  return "unknown";
}

DetectorKind parse_detector_kind(std::string_view name) {
  for (const auto kind : {DetectorKind::kIf, DetectorKind::kIfStar, DetectorKind::kFt,
                          DetectorKind::kSpiLite, DetectorKind::kSpi}) {
    if (to_string(kind) == name) return kind;
  }
  throw UsageError("unknown detector kind: " + std::string(name));
}

std::string_view to_string(RankerType type) {
  return type == RankerType::kLinear ? "linear" : "kernel";
}

RankerType parse_ranker_type(std::string_view name) {
  if (name == "linear") return RankerType::kLinear;
  if (name == "kernel") return RankerType::kKernel;
  throw UsageError("unknown ranker: " + std::string(name));
}

bool uses_privileged_training(DetectorKind kind) { return kind != DetectorKind::kIf; }

void DetectorOptions::validate() const {
  if (trees < 1) throw UsageError("trees must be >= 1");
  if (privileged_trees < 0) throw UsageError("privileged_trees must be >= 0");
  if (subsample_size < 2) throw UsageError("subsample must be >= 2");
  if (max_depth < 0) throw UsageError("max_depth must be >= 0");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
  if (max_pairs == 0) throw UsageError("max_pairs must be positive");
  if (optimizer.max_iters < 0) throw UsageError("max_iters must be >= 0");
  if (kernel_bandwidth && !(*kernel_bandwidth > 0.0)) {
    throw UsageError("kernel bandwidth must be positive");
  }
}

TrainedDetector train_detector(DetectorKind kind, const Matrix& x,
                               const std::optional<Matrix>& x_star,
                               const DetectorOptions& options) {
  options.validate();
  if (x.rows() < 4) throw DataError("need at least 4 training rows");
  if (uses_privileged_training(kind)) {
    if (!x_star) {
      throw UsageError(std::string("detector '") + std::string(to_string(kind)) +
                       "' requires privileged training features");
    }
    if (x_star->rows() != x.rows()) {
      throw DataError("row count mismatch: " + std::to_string(x.rows()) + " primary vs " +
                      std::to_string(x_star->rows()) + " privileged rows");
    }
    if (x_star->cols() == 0) throw DataError("no privileged features");
  }
  if (kind != DetectorKind::kIfStar && x.cols() == 0) throw DataError("no features");

  TrainedDetector model;
  model.kind = kind;
  model.options = options;
  model.primary_dim = static_cast<std::size_t>(x.cols());
  model.privileged_dim = x_star ? static_cast<std::size_t>(x_star->cols()) : 0;

  switch (kind) {
    case DetectorKind::kIf:
      model.decision_forest = fit_forest(x, forest_config(options, options.trees, kDecisionForest));
      break;
    case DetectorKind::kIfStar:
      model.privileged_forest = fit_forest(
          *x_star, forest_config(options, privileged_tree_count(options), kPrivilegedForest));
      break;
    case DetectorKind::kFt: {
      model.ft_model = fit_feature_transfer(x, *x_star, options.lambda);
      const Matrix predicted = apply_feature_transfer(*model.ft_model, x);
      model.ft_forest =
          fit_forest(options.ft_forest_on_true_privileged ? *x_star : predicted,
                     forest_config(options, privileged_tree_count(options), kFtForest));
      break;
    }
    case DetectorKind::kSpiLite:
    case DetectorKind::kSpi:
      train_spi(model, x, *x_star);
      break;
  }
  return model;
}

Vector score_detector(const TrainedDetector& model, const Matrix& x_test,
                      const std::optional<Matrix>& x_star_test) {
  if (model.kind == DetectorKind::kIfStar) {
    if (!x_star_test) throw UsageError("if-star scoring requires privileged test features");
    if (static_cast<std::size_t>(x_star_test->cols()) != model.privileged_dim) {
      throw DataError("dimension mismatch: model expects " + std::to_string(model.privileged_dim) +
                      " privileged columns, got " + std::to_string(x_star_test->cols()));
    }
    return forest_scores(*model.privileged_forest, *x_star_test);
  }
  if (x_star_test) throw UsageError("privileged features forbidden at test time");
  if (static_cast<std::size_t>(x_test.cols()) != model.primary_dim) {
    throw DataError("dimension mismatch: model expects " + std::to_string(model.primary_dim) +
                    " columns, got " + std::to_string(x_test.cols()));
  }

  switch (model.kind) {
    case DetectorKind::kIf:
      return forest_scores(*model.decision_forest, x_test);
    case DetectorKind::kFt:
      return forest_scores(*model.ft_forest, apply_feature_transfer(*model.ft_model, x_test));
    case DetectorKind::kSpiLite:
    case DetectorKind::kSpi: {
      Vector scores(x_test.rows());
      parallel_for(static_cast<std::size_t>(x_test.rows()), [&](std::size_t i) {
        const auto row = static_cast<Index>(i);
        const LeafScoreVector z = build_leaf_vector(*model.decision_forest, row_of(x_test, row));
        if (model.kind == DetectorKind::kSpiLite) {
          scores[row] = model.lite_regressor->predict(z);
          return;
        }
        const Vector phi = predict_fragment_vector(*model.fragments, z);
        // The ranker scores higher-is-more-anomalous; flip to the shared
        // orientation. 0.0 - r keeps a zero score at +0.0.
        scores[row] = 0.0 - predict_rank_score(*model.ranker, as_span(phi));
      });
      return scores;
    }
    case DetectorKind::kIfStar:
      break;
  }
  throw UsageError("unsupported detector kind");
}

}  // namespace spi
