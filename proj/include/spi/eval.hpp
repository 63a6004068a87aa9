#pragma once

// Ranking metrics over anomaly scores and cross-dataset comparison of
// detectors with the Friedman test and the Nemenyi critical difference.

#include <span>
#include <vector>

#include "spi/types.hpp"

namespace spi {

// Higher anomalousness means more anomalous. Labels: 1 anomaly, 0 normal.
struct LabeledScores {
  std::vector<double> anomalousness;
  std::vector<int> labels;
};

// Flips detector scores (lower = more anomalous) into LabeledScores.
LabeledScores from_detector_scores(std::span<const double> scores, std::span<const int> labels);

// Mean precision at the rank of each positive. Ranking is descending by
// anomalousness, ties broken by original index.
double average_precision(const LabeledScores& s);

// Mann-Whitney form; tied pos/neg pairs count one half.
double roc_auc(const LabeledScores& s);

// Binary-gain NDCG with log2(rank + 1) discounts. k beyond the number of
// points is truncated. Zero when there are no positives.
double ndcg_at_k(const LabeledScores& s, std::size_t k);

double precision_at_k(const LabeledScores& s, std::size_t k);

struct RankTable {
  // N datasets x k methods; rank 1 is best (highest metric), ties averaged.
  Matrix ranks;
  Vector average;
};

RankTable rank_methods(const Matrix& metric_table);

struct FriedmanResult {
  RankTable ranks;
  double chi2 = 0.0;
  double p_value = 1.0;
};

FriedmanResult friedman_test(const Matrix& metric_table);

// Two-tailed Nemenyi critical value q_alpha for k methods (studentized range
// over sqrt 2, infinite degrees of freedom). alpha must be 0.05 or 0.10.
double nemenyi_critical_value(int k, double alpha = 0.05);

double nemenyi_cd(int k, int datasets, double alpha = 0.05);

}  // namespace spi
