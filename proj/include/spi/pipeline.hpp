#pragma once

// End-to-end detectors. All of them emit anomaly scores where LOWER means
// MORE anomalous.
//
//   kIf       isolation forest on the decision space only
//   kIfStar   isolation forest on the privileged space (reference; needs
//             privileged features at test time)
//   kFt       regress x -> x*, then an isolation forest on predicted x*
//   kSpiLite  one ridge regressor from leaf vectors onto the privileged
//             ensemble score
//   kSpi      per-tree fragment regressors plus a pairwise ranker

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "spi/forest.hpp"
#include "spi/rank.hpp"
#include "spi/transfer.hpp"
#include "spi/types.hpp"

namespace spi {

enum class DetectorKind { kIf, kIfStar, kFt, kSpiLite, kSpi };

enum class RankerType { kLinear, kKernel };

std::string_view to_string(DetectorKind kind);
DetectorKind parse_detector_kind(std::string_view name);
std::string_view to_string(RankerType type);
RankerType parse_ranker_type(std::string_view name);

bool uses_privileged_training(DetectorKind kind);

struct DetectorOptions {
  std::uint64_t seed = 0;
  int trees = 100;
  // Trees in the privileged forest; 0 means same as `trees`.
  int privileged_trees = 0;
  int subsample_size = 256;
  int max_depth = 0;
  double lambda = 1.0;
  RankerType ranker = RankerType::kLinear;
  std::size_t max_pairs = 100000;
  OptimizerOptions optimizer;
  // Kernel ranker bandwidth; unset selects the median heuristic.
  std::optional<double> kernel_bandwidth;
  // FT only: grow its forest on the true privileged rows instead of the
  // predicted ones.
  bool ft_forest_on_true_privileged = false;

  void validate() const;
};

struct TrainedDetector {
  DetectorKind kind = DetectorKind::kIf;
  DetectorOptions options;
  std::size_t primary_dim = 0;
  std::size_t privileged_dim = 0;

  std::optional<IsolationForest> decision_forest;
  // Kept for inspection; scoring never reads it except for kIfStar.
  std::optional<IsolationForest> privileged_forest;
  std::optional<FragmentSet> fragments;
  std::optional<RidgeRegressor> lite_regressor;
  std::optional<Ranker> ranker;
  std::optional<FeatureTransferModel> ft_model;
  std::optional<IsolationForest> ft_forest;
};

TrainedDetector train_detector(DetectorKind kind, const Matrix& x,
                               const std::optional<Matrix>& x_star,
                               const DetectorOptions& options);

// x_test holds decision-space columns. Privileged test columns are accepted
// only by kIfStar, which scores them and ignores x_test.
Vector score_detector(const TrainedDetector& model, const Matrix& x_test,
                      const std::optional<Matrix>& x_star_test = std::nullopt);

}  // namespace spi
