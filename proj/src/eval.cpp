#include "spi/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "spi/error.hpp"

namespace spi {

namespace {

void check_scores(const LabeledScores& s) {
  if (s.anomalousness.size() != s.labels.size()) {
    throw DataError("scores and labels differ in length: " + std::to_string(s.anomalousness.size()) +
                    " vs " + std::to_string(s.labels.size()));
  }
  for (const int label : s.labels) {
    if (label != 0 && label != 1) throw DataError("labels must be 0 or 1");
  }
}

std::size_t count_positives(const LabeledScores& s) {
  return static_cast<std::size_t>(std::count(s.labels.begin(), s.labels.end(), 1));
}

// Indices sorted by descending anomalousness; equal scores keep index order.
std::vector<std::size_t> descending_order(const LabeledScores& s) {
  std::vector<std::size_t> order(s.anomalousness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s.anomalousness[a] > s.anomalousness[b];
  });
  return order;
}

// Average (1-based) ranks of values, ascending, ties sharing their mean rank.
std::vector<double> average_ranks_ascending(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

// Demsar (2006), table 5(a); k = 11..20 extend it with the same convention.
constexpr std::array<double, 19> kQ05 = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031,
                                         3.102, 3.164, 3.219, 3.268, 3.313, 3.354, 3.391,
                                         3.426, 3.458, 3.489, 3.517, 3.544};
constexpr std::array<double, 19> kQ10 = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780,
                                         2.855, 2.920, 2.978, 3.030, 3.077, 3.120, 3.159,
                                         3.196, 3.230, 3.261, 3.291, 3.319};

}  // namespace

LabeledScores from_detector_scores(std::span<const double> scores, std::span<const int> labels) {
  LabeledScores out;
  out.anomalousness.reserve(scores.size());
  for (const double v : scores) out.anomalousness.push_back(-v);
  out.labels.assign(labels.begin(), labels.end());
  check_scores(out);
  return out;
}

double average_precision(const LabeledScores& s) {
  check_scores(s);
  if (count_positives(s) == 0) throw DataError("average precision needs at least one anomaly");
  const auto order = descending_order(s);
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (s.labels[order[r]] == 1) {
      ++hits;
      total += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return total / static_cast<double>(hits);
}

double roc_auc(const LabeledScores& s) {
  check_scores(s);
  const std::size_t positives = count_positives(s);
  const std::size_t negatives = s.labels.size() - positives;
  if (positives == 0 || negatives == 0) throw DataError("roc_auc needs both classes");
  const auto ranks = average_ranks_ascending(s.anomalousness);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (s.labels[i] == 1) rank_sum += ranks[i];
  }
  const double p = static_cast<double>(positives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double ndcg_at_k(const LabeledScores& s, std::size_t k) {
  check_scores(s);
  if (k == 0) throw UsageError("k must be >= 1");
  const auto order = descending_order(s);
  const std::size_t depth = std::min(k, order.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (s.labels[order[r]] == 1) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  const std::size_t ideal_hits = std::min(depth, count_positives(s));
  double ideal = 0.0;
  for (std::size_t r = 0; r < ideal_hits; ++r) ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return ideal > 0.0 ? dcg / ideal : 0.0;
}

double precision_at_k(const LabeledScores& s, std::size_t k) {
  check_scores(s);
  if (k == 0) throw UsageError("k must be >= 1");
  const auto order = descending_order(s);
  const std::size_t depth = std::min(k, order.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < depth; ++r) hits += static_cast<std::size_t>(s.labels[order[r]]);
  return static_cast<double>(hits) / static_cast<double>(k);
}

RankTable rank_methods(const Matrix& metric_table) {
  RankTable table;
  table.ranks.resize(metric_table.rows(), metric_table.cols());
  std::vector<double> negated(static_cast<std::size_t>(metric_table.cols()));
  for (Index r = 0; r < metric_table.rows(); ++r) {
    for (Index c = 0; c < metric_table.cols(); ++c) negated[static_cast<std::size_t>(c)] = -metric_table(r, c);
    const auto ranks = average_ranks_ascending(negated);
    for (Index c = 0; c < metric_table.cols(); ++c) table.ranks(r, c) = ranks[static_cast<std::size_t>(c)];
  }
  table.average = table.ranks.colwise().mean().transpose();
  return table;
}

FriedmanResult friedman_test(const Matrix& metric_table) {
  const Index datasets = metric_table.rows();
  const Index methods = metric_table.cols();
  if (datasets < 2 || methods < 2) {
    throw DataError("friedman test needs at least 2 datasets and 2 methods");
  }
  FriedmanResult result;
  result.ranks = rank_methods(metric_table);
  const double n = static_cast<double>(datasets);
  const double k = static_cast<double>(methods);
  const double spread = result.ranks.average.squaredNorm() - k * (k + 1.0) * (k + 1.0) / 4.0;
  const double chi2 = 12.0 * n / (k * (k + 1.0)) * spread;
  // Equal average ranks give zero up to rounding.
  result.chi2 = chi2 > 1e-12 ? chi2 : 0.0;
  result.p_value = result.chi2 > 0.0 ? boost::math::gamma_q((k - 1.0) / 2.0, result.chi2 / 2.0) : 1.0;
  return result;
}

double nemenyi_critical_value(int k, double alpha) {
  if (k < 2 || k > 20) {
    throw UsageError("nemenyi table covers 2..20 methods, got " + std::to_string(k));
  }
  const auto idx = static_cast<std::size_t>(k - 2);
  if (std::abs(alpha - 0.05) < 1e-12) return kQ05[idx];
  if (std::abs(alpha - 0.10) < 1e-12) return kQ10[idx];
  throw UsageError("nemenyi table supports alpha 0.05 and 0.10 only");
}

double nemenyi_cd(int k, int datasets, double alpha) {
  if (datasets < 1) throw UsageError("nemenyi_cd needs at least one dataset");
  const double q = nemenyi_critical_value(k, alpha);
  return q * std::sqrt(static_cast<double>(k) * (k + 1) / (6.0 * datasets));
}

}  // namespace spi
