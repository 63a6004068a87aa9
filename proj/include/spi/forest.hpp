#pragma once

// Isolation forest: randomized axis-parallel trees whose leaf depths measure
// how easily a point is separated from the training sample. Per-tree scores
// are normalized path lengths, so lower values mean more anomalous.

#include <cstdint>
#include <span>
#include <vector>

#include "spi/types.hpp"

namespace spi {

struct ForestConfig {
  int tree_count = 100;
  // Capped at the number of training rows when fitting.
  int subsample_size = 256;
  // 0 selects ceil(log2(effective subsample size)).
  int max_depth = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IsoNode {
  // Internal nodes: feature >= 0, children set. Leaves: feature == -1.
  std::int32_t feature = -1;
  double split = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t leaf_index = -1;
  std::int32_t depth = 0;
  std::int32_t training_count = 0;

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const IsoNode&, const IsoNode&) = default;
};

struct LeafHit {
  std::int32_t leaf_index;
  std::int32_t depth;
  std::int32_t training_count;
};

struct IsoTree {
  // nodes[0] is the root.
  std::vector<IsoNode> nodes;
  std::int32_t leaf_count = 0;
  // Rows the tree was grown on; c(sample_size) normalizes its scores.
  std::int32_t sample_size = 0;
  std::int32_t feature_dim = 0;

  friend bool operator==(const IsoTree&, const IsoTree&) = default;
};

struct IsolationForest {
  std::vector<IsoTree> trees;
  // Resolved values: subsample_size is the effective size, max_depth is set.
  ForestConfig config;
  std::int32_t feature_dim = 0;

  // Offset of each tree's block in the concatenated leaf space.
  std::vector<std::size_t> leaf_offsets() const;
  std::size_t total_leaves() const;

  friend bool operator==(const IsolationForest& a, const IsolationForest& b) {
    return a.trees == b.trees && a.feature_dim == b.feature_dim &&
           a.config.tree_count == b.config.tree_count &&
           a.config.subsample_size == b.config.subsample_size &&
           a.config.max_depth == b.config.max_depth && a.config.seed == b.config.seed;
  }
};

// Average unsuccessful-search path length of a binary search tree over n
// points: 0 for n < 2, 1 for n == 2, 2 H(n-1) - 2(n-1)/n otherwise.
double path_correction(std::int64_t n);

IsolationForest fit_forest(const Matrix& data, ForestConfig config);

LeafHit leaf_of(const IsoTree& tree, std::span<const double> x);

// (depth + c(leaf training count)) / c(sample size).
double tree_score(const IsoTree& tree, std::span<const double> x);

// Sum of tree scores.
double forest_score(const IsolationForest& forest, std::span<const double> x);

Vector forest_scores(const IsolationForest& forest, const Matrix& rows);

}  // namespace spi
