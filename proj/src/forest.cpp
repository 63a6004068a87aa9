#include "spi/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spi/error.hpp"
#include "spi/parallel.hpp"
#include "spi/random.hpp"

namespace spi {

namespace {

constexpr double kEulerGamma = 0.5772156649;

int default_max_depth(int sample_size) {
  return std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(sample_size)))));
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& data, int max_depth, Rng& rng)
      : data_(data), max_depth_(max_depth), rng_(rng) {}

  IsoTree build(std::vector<std::size_t> sample) {
    tree_.sample_size = static_cast<std::int32_t>(sample.size());
    tree_.feature_dim = static_cast<std::int32_t>(data_.cols());
    grow(std::span<std::size_t>(sample), 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::span<std::size_t> rows, int depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[id].depth = depth;
    tree_.nodes[id].training_count = static_cast<std::int32_t>(rows.size());

    if (depth >= max_depth_ || rows.size() <= 1 || !pick_split(rows)) {
      tree_.nodes[id].leaf_index = tree_.leaf_count++;
      return id;
    }
    const int feature = chosen_feature_;
    const double split = chosen_split_;
    auto mid = std::stable_partition(rows.begin(), rows.end(), [&](std::size_t r) {
      return data_(static_cast<Index>(r), feature) < split;
    });
    const auto left_size = static_cast<std::size_t>(mid - rows.begin());

    tree_.nodes[id].feature = feature;
    tree_.nodes[id].split = split;
    const std::int32_t left = grow(rows.first(left_size), depth + 1);
    const std::int32_t right = grow(rows.subspan(left_size), depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  // Chooses a feature uniformly among the non-constant ones and a threshold
  // uniformly inside its range. False when every feature is constant.
  bool pick_split(std::span<const std::size_t> rows) {
    candidates_.clear();
    lows_.assign(data_.cols(), 0.0);
    highs_.assign(data_.cols(), 0.0);
    for (Index f = 0; f < data_.cols(); ++f) {
      double lo = data_(static_cast<Index>(rows[0]), f);
      double hi = lo;
      for (const std::size_t r : rows) {
        const double v = data_(static_cast<Index>(r), f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi > lo) {
        candidates_.push_back(static_cast<int>(f));
        lows_[f] = lo;
        highs_[f] = hi;
      }
    }
    if (candidates_.empty()) return false;
    chosen_feature_ = candidates_[uniform_index(rng_, candidates_.size())];
    chosen_split_ = uniform_open(rng_, lows_[chosen_feature_], highs_[chosen_feature_]);
    return true;
  }

  const Matrix& data_;
  int max_depth_;
  Rng& rng_;
  IsoTree tree_;
  std::vector<int> candidates_;
  std::vector<double> lows_;
  std::vector<double> highs_;
  int chosen_feature_ = -1;
  double chosen_split_ = 0.0;
};

}  // namespace

void ForestConfig::validate() const {
  if (tree_count < 1) throw UsageError("tree_count must be >= 1");
  if (subsample_size < 2) throw UsageError("subsample_size must be >= 2");
  if (max_depth < 0) throw UsageError("max_depth must be >= 1 (or 0 for automatic)");
}

std::vector<std::size_t> IsolationForest::leaf_offsets() const {
  std::vector<std::size_t> offsets(trees.size());
  std::size_t acc = 0;
  for (std::size_t k = 0; k < trees.size(); ++k) {
    offsets[k] = acc;
    acc += static_cast<std::size_t>(trees[k].leaf_count);
  }
  return offsets;
}

std::size_t IsolationForest::total_leaves() const {
  std::size_t acc = 0;
  for (const auto& tree : trees) acc += static_cast<std::size_t>(tree.leaf_count);
  return acc;
}

double path_correction(std::int64_t n) {
  if (n < 2) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n - 1);
  return 2.0 * (std::log(m) + kEulerGamma) - 2.0 * m / static_cast<double>(n);
}

IsolationForest fit_forest(const Matrix& data, ForestConfig config) {
  config.validate();
  if (data.rows() == 0) throw DataError("empty dataset");
  if (data.cols() == 0) throw DataError("no features");
  if (data.rows() < 2) throw DataError("need at least 2 rows to fit a forest");

  const auto n = static_cast<std::size_t>(data.rows());
  config.subsample_size = static_cast<int>(std::min<std::size_t>(config.subsample_size, n));
  if (config.max_depth == 0) config.max_depth = default_max_depth(config.subsample_size);

  IsolationForest forest;
  forest.config = config;
  forest.feature_dim = static_cast<std::int32_t>(data.cols());
  forest.trees.resize(static_cast<std::size_t>(config.tree_count));

  parallel_for(forest.trees.size(), [&](std::size_t k) {
    Rng rng = make_stream(config.seed, {k});
    // Partial Fisher-Yates draws the subsample without replacement.
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto take = static_cast<std::size_t>(config.subsample_size);
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(rows[i], rows[i + uniform_index(rng, n - i)]);
    }
    rows.resize(take);
    std::sort(rows.begin(), rows.end());
    TreeBuilder builder(data, config.max_depth, rng);
    forest.trees[k] = builder.build(std::move(rows));
  });
  return forest;
}

LeafHit leaf_of(const IsoTree& tree, std::span<const double> x) {
  if (static_cast<std::int64_t>(x.size()) != tree.feature_dim) {
    throw DataError("dimension mismatch: tree expects " + std::to_string(tree.feature_dim) +
                    " features, got " + std::to_string(x.size()));
  }
  const IsoNode* node = &tree.nodes.front();
  while (!node->is_leaf()) {
    node = &tree.nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] < node->split
                                                     ? node->left
                                                     : node->right)];
  }
  return {node->leaf_index, node->depth, node->training_count};
}

double tree_score(const IsoTree& tree, std::span<const double> x) {
  const LeafHit hit = leaf_of(tree, x);
  return (hit.depth + path_correction(hit.training_count)) / path_correction(tree.sample_size);
}

double forest_score(const IsolationForest& forest, std::span<const double> x) {
  double total = 0.0;
  for (const auto& tree : forest.trees) total += tree_score(tree, x);
  return total;
}

Vector forest_scores(const IsolationForest& forest, const Matrix& rows) {
  Vector out(rows.rows());
  parallel_for(static_cast<std::size_t>(rows.rows()), [&](std::size_t i) {
    out[static_cast<Index>(i)] = forest_score(forest, row_of(rows, static_cast<Index>(i)));
  });
  return out;
}

}  // namespace spi
