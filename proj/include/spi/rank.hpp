#pragma once

// Pairwise learning to rank with a cross-entropy cost. Target pair
// probabilities come from privileged-space scores; the model learns a
// (possibly kernelized) linear score over fragment vectors whose pairwise
// differences reproduce them.
//
// Orientation: p*_ij is the probability that i is more anomalous than j, and
// the model's pair logit is score_i - score_j. A fitted ranker therefore
// assigns HIGHER scores to more anomalous points.

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "spi/types.hpp"

namespace spi {

struct PairTarget {
  std::uint32_t i;
  std::uint32_t j;
  double p_star;
};

double sigmoid(double v);

// log(1 + e^v) without overflow.
double log1p_exp(double v);

// sigma(-(s_i - s_j)) for privileged scores where lower is more anomalous.
double target_probability(double s_star_i, double s_star_j);

// All pairs i < j when there are at most max_pairs of them, otherwise
// max_pairs distinct pairs drawn uniformly. Output is sorted by (i, j).
std::vector<PairTarget> pairwise_targets(std::span<const double> s_star, std::size_t max_pairs,
                                         std::uint64_t seed);

struct Objective {
  double cost;
  Vector gradient;
};

Objective linear_rank_objective(const Vector& beta, const Matrix& fragments,
                                std::span<const PairTarget> pairs);

struct RbfKernel {
  double bandwidth = 1.0;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double bandwidth);

// Median of pairwise Euclidean distances between rows; 1.0 if all coincide.
double median_heuristic_bandwidth(const Matrix& points);

Matrix gram_matrix(const Matrix& points, const RbfKernel& kernel);

Objective kernel_rank_objective(const Vector& gamma, const Matrix& train_fragments,
                                std::span<const PairTarget> pairs, const RbfKernel& kernel);

// Same objective over a precomputed Gram matrix.
Objective kernel_rank_objective(const Vector& gamma, const Matrix& gram,
                                std::span<const PairTarget> pairs);

struct OptimizerOptions {
  int max_iters = 500;
  double tolerance = 1e-6;
  double armijo = 1e-4;
  double shrink = 0.5;
  // Kernel fit only: adds ridge * |gamma|^2 to the cost.
  double kernel_ridge = 1e-6;
};

struct OptimizerTrace {
  // Cost before the first step and after each accepted step.
  std::vector<double> costs;
  int iterations = 0;
  bool converged = false;
};

struct LinearRanker {
  Vector beta;
};

struct KernelRanker {
  Vector gamma;
  Matrix train_fragments;
  RbfKernel kernel;
};

using Ranker = std::variant<LinearRanker, KernelRanker>;

LinearRanker fit_linear_ranker(const Matrix& fragments, std::span<const PairTarget> pairs,
                               const OptimizerOptions& options, OptimizerTrace* trace = nullptr);

KernelRanker fit_kernel_ranker(const Matrix& train_fragments, std::span<const PairTarget> pairs,
                               const RbfKernel& kernel, const OptimizerOptions& options,
                               OptimizerTrace* trace = nullptr);

double predict_rank_score(const LinearRanker& model, std::span<const double> phi);
double predict_rank_score(const KernelRanker& model, std::span<const double> phi);
double predict_rank_score(const Ranker& model, std::span<const double> phi);

}  // namespace spi
