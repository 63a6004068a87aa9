#include "spi/rank.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_set>

#include "spi/error.hpp"
#include "spi/random.hpp"

namespace spi {

namespace {

void check_pairs(std::span<const PairTarget> pairs, Index n) {
  for (const auto& p : pairs) {
    if (static_cast<Index>(p.i) >= n || static_cast<Index>(p.j) >= n) {
      throw DataError("dimension mismatch: pair index out of range for " + std::to_string(n) +
                      " rows");
    }
  }
}

// Cost and per-row residual sums for pair logits u_i - u_j. The gradient
// with respect to u is the returned vector; callers chain it through u.
Objective pair_cost(const Vector& u, std::span<const PairTarget> pairs) {
  Objective out{0.0, Vector::Zero(u.size())};
  for (const auto& p : pairs) {
    const double delta = u[p.i] - u[p.j];
    out.cost += -p.p_star * delta + log1p_exp(delta);
    const double residual = sigmoid(delta) - p.p_star;
    out.gradient[p.i] += residual;
    out.gradient[p.j] -= residual;
  }
  return out;
}

using ObjectiveFn = std::function<Objective(const Vector&)>;

Vector descend(const ObjectiveFn& objective, Index dim, const OptimizerOptions& options,
               OptimizerTrace* trace) {
  Vector x = Vector::Zero(dim);
  Objective current = objective(x);
  if (!std::isfinite(current.cost) || !current.gradient.allFinite()) throw NumericError("diverged");
  OptimizerTrace local;
  local.costs.push_back(current.cost);

  double step = 1.0;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    if (current.gradient.lpNorm<Eigen::Infinity>() <= options.tolerance) {
      local.converged = true;
      break;
    }
    const double slope = current.gradient.squaredNorm();
    bool accepted = false;
    double t = step;
    // Backtracking until the Armijo condition holds or the step underflows.
    while (t > 1e-30) {
      Vector candidate = x - t * current.gradient;
      Objective next = objective(candidate);
      if (std::isfinite(next.cost) && next.cost <= current.cost - options.armijo * t * slope) {
        if (!next.gradient.allFinite()) throw NumericError("diverged");
        x = std::move(candidate);
        current = std::move(next);
        accepted = true;
        break;
      }
      t *= options.shrink;
    }
    if (!accepted) break;
    local.costs.push_back(current.cost);
    local.iterations = iter + 1;
    step = std::min(t * 2.0, 1e12);
  }
  if (!local.converged && current.gradient.lpNorm<Eigen::Infinity>() <= options.tolerance) {
    local.converged = true;
  }
  if (trace) *trace = std::move(local);
  return x;
}

}  // namespace

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double log1p_exp(double v) {
  if (v > 0.0) return v + std::log1p(std::exp(-v));
  return std::log1p(std::exp(v));
}

double target_probability(double s_star_i, double s_star_j) {
  return sigmoid(-(s_star_i - s_star_j));
}

std::vector<PairTarget> pairwise_targets(std::span<const double> s_star, std::size_t max_pairs,
                                         std::uint64_t seed) {
  const std::uint64_t n = s_star.size();
  if (n < 2) throw DataError("need >=2 examples");
  if (max_pairs == 0) throw UsageError("max_pairs must be positive");
  const std::uint64_t total = n * (n - 1) / 2;

  std::vector<PairTarget> out;
  auto emit = [&](std::uint64_t i, std::uint64_t j) {
    out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                   target_probability(s_star[i], s_star[j])});
  };
  if (total <= max_pairs) {
    out.reserve(total);
    for (std::uint64_t i = 0; i < n; ++i) {
      for (std::uint64_t j = i + 1; j < n; ++j) emit(i, j);
    }
    return out;
  }

  // Floyd's algorithm over linear pair ids, then decode to (i, j).
  Rng rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(max_pairs * 2);
  for (std::uint64_t r = total - max_pairs; r < total; ++r) {
    const std::uint64_t v = uniform_index(rng, r + 1);
    if (!chosen.insert(v).second) chosen.insert(r);
  }
  std::vector<std::uint64_t> ids(chosen.begin(), chosen.end());
  std::sort(ids.begin(), ids.end());
  out.reserve(ids.size());
  // Row i owns ids [start(i), start(i) + n - 1 - i).
  std::uint64_t i = 0;
  std::uint64_t row_start = 0;
  for (const std::uint64_t id : ids) {
    while (id >= row_start + (n - 1 - i)) {
      row_start += n - 1 - i;
      ++i;
    }
    emit(i, i + 1 + (id - row_start));
  }
  return out;
}

Objective linear_rank_objective(const Vector& beta, const Matrix& fragments,
                                std::span<const PairTarget> pairs) {
  if (beta.size() != fragments.cols()) {
    throw DataError("dimension mismatch: beta has " + std::to_string(beta.size()) +
                    " entries, fragments have " + std::to_string(fragments.cols()) + " columns");
  }
  check_pairs(pairs, fragments.rows());
  const Vector u = fragments * beta;
  Objective per_row = pair_cost(u, pairs);
  return {per_row.cost, fragments.transpose() * per_row.gradient};
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double bandwidth) {
  if (!(bandwidth > 0.0)) throw UsageError("kernel bandwidth must be positive");
  if (a.size() != b.size()) throw DataError("dimension mismatch in rbf_kernel");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::exp(-sq / (2.0 * bandwidth * bandwidth));
}

double median_heuristic_bandwidth(const Matrix& points) {
  std::vector<double> distances;
  const Index n = points.rows();
  distances.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) distances.push_back((points.row(i) - points.row(j)).norm());
  }
  if (distances.empty()) return 1.0;
  const auto mid = distances.begin() + static_cast<std::ptrdiff_t>(distances.size() / 2);
  std::nth_element(distances.begin(), mid, distances.end());
  double median = *mid;
  if (distances.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(distances.begin(), mid));
  }
  return median > 0.0 ? median : 1.0;
}

Matrix gram_matrix(const Matrix& points, const RbfKernel& kernel) {
  const Index n = points.rows();
  Matrix gram(n, n);
  for (Index i = 0; i < n; ++i) {
    gram(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      gram(i, j) = gram(j, i) = rbf_kernel(row_of(points, i), row_of(points, j), kernel.bandwidth);
    }
  }
  return gram;
}

Objective kernel_rank_objective(const Vector& gamma, const Matrix& train_fragments,
                                std::span<const PairTarget> pairs, const RbfKernel& kernel) {
  if (gamma.size() != train_fragments.rows()) {
    throw DataError("dimension mismatch: gamma has " + std::to_string(gamma.size()) +
                    " entries, expected " + std::to_string(train_fragments.rows()));
  }
  return kernel_rank_objective(gamma, gram_matrix(train_fragments, kernel), pairs);
}

Objective kernel_rank_objective(const Vector& gamma, const Matrix& gram,
                                std::span<const PairTarget> pairs) {
  if (gram.rows() != gram.cols() || gamma.size() != gram.rows()) {
    throw DataError("dimension mismatch: gamma and Gram matrix disagree");
  }
  check_pairs(pairs, gram.rows());
  // K is symmetric, so u = K gamma and the gradient is K r.
  const Vector u = gram * gamma;
  Objective per_row = pair_cost(u, pairs);
  return {per_row.cost, gram * per_row.gradient};
}

LinearRanker fit_linear_ranker(const Matrix& fragments, std::span<const PairTarget> pairs,
                               const OptimizerOptions& options, OptimizerTrace* trace) {
  if (pairs.empty()) throw DataError("need at least one pair");
  check_pairs(pairs, fragments.rows());
  auto objective = [&](const Vector& beta) {
    return linear_rank_objective(beta, fragments, pairs);
  };
  return LinearRanker{descend(objective, fragments.cols(), options, trace)};
}

KernelRanker fit_kernel_ranker(const Matrix& train_fragments, std::span<const PairTarget> pairs,
                               const RbfKernel& kernel, const OptimizerOptions& options,
                               OptimizerTrace* trace) {
  if (pairs.empty()) throw DataError("need at least one pair");
  if (!(kernel.bandwidth > 0.0)) throw UsageError("kernel bandwidth must be positive");
  check_pairs(pairs, train_fragments.rows());
  const Matrix gram = gram_matrix(train_fragments, kernel);
  const double ridge = options.kernel_ridge;
  auto objective = [&](const Vector& gamma) {
    Objective out = kernel_rank_objective(gamma, gram, pairs);
    out.cost += ridge * gamma.squaredNorm();
    out.gradient += 2.0 * ridge * gamma;
    return out;
  };
  return KernelRanker{descend(objective, train_fragments.rows(), options, trace), train_fragments,
                      kernel};
}

double predict_rank_score(const LinearRanker& model, std::span<const double> phi) {
  if (static_cast<Index>(phi.size()) != model.beta.size()) {
    throw DataError("dimension mismatch: fragment vector has " + std::to_string(phi.size()) +
                    " entries, ranker expects " + std::to_string(model.beta.size()));
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) acc += model.beta[static_cast<Index>(k)] * phi[k];
  return acc;
}

double predict_rank_score(const KernelRanker& model, std::span<const double> phi) {
  if (static_cast<Index>(phi.size()) != model.train_fragments.cols()) {
    throw DataError("dimension mismatch: fragment vector has " + std::to_string(phi.size()) +
                    " entries, ranker expects " + std::to_string(model.train_fragments.cols()));
  }
  double acc = 0.0;
  for (Index l = 0; l < model.gamma.size(); ++l) {
    acc += model.gamma[l] * rbf_kernel(row_of(model.train_fragments, l), phi, model.kernel.bandwidth);
  }
  return acc;
}

double predict_rank_score(const Ranker& model, std::span<const double> phi) {
  return std::visit([&](const auto& m) { return predict_rank_score(m, phi); }, model);
}

}  // namespace spi
