#pragma once

// Benchmark construction with synthetic privileged information and the
// multi-run experiment driver.
//
// Subset protocol: a fraction of normal rows is designated anomalous and
// Gaussian noise with matching per-column variance is added on p randomly
// chosen columns. round(gamma p) of those columns form the privileged space;
// the rest join the untouched columns in the decision space.
//
// Noise protocol: the original columns are the privileged candidates and the
// decision space gains 10 p columns of N(0.01 mu, (0.01 sigma)^2) noise.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spi/eval.hpp"
#include "spi/pipeline.hpp"
#include "spi/types.hpp"

namespace spi {

struct PerturbSpec {
  double anomaly_fraction = 0.1;
  int pi_feature_count = 10;
  double gamma = 0.7;
  std::uint64_t seed = 0;
};

struct BenchDataset {
  Matrix x;
  Matrix x_star;
  std::vector<int> labels;
  // Source column of every x / x_star column.
  std::vector<std::size_t> primary_columns;
  std::vector<std::size_t> privileged_columns;
};

struct FeatureSplit {
  std::vector<std::size_t> privileged;
  std::vector<std::size_t> primary;
};

// Nearest integer, halves rounded up.
std::size_t round_count(double v);

FeatureSplit split_feature_spaces(std::span<const std::size_t> perturbed_columns,
                                  std::span<const std::size_t> other_columns, double gamma,
                                  std::uint64_t seed);

BenchDataset designate_and_perturb(const Matrix& normals, const PerturbSpec& spec);

struct NoiseAugmented {
  // Original columns first, then the generated noise columns.
  Matrix features;
  std::vector<std::size_t> original_columns;
  std::vector<std::size_t> noise_columns;
};

NoiseAugmented noise_augment(const Matrix& original, std::uint64_t seed);

// Gamma-split of an augmented matrix into a BenchDataset with the given
// ground-truth labels.
BenchDataset split_augmented(const NoiseAugmented& augmented, std::vector<int> labels,
                             double gamma, std::uint64_t seed);

std::pair<BenchDataset, BenchDataset> stratified_split(const BenchDataset& dataset,
                                                       double train_fraction, std::uint64_t seed);

// Normal observations from a three-cluster latent-factor Gaussian model.
Matrix make_synthetic_normals(std::size_t rows, std::size_t cols, std::uint64_t seed);

enum class Protocol { kSubset, kNoise };

std::string_view to_string(Protocol protocol);
Protocol parse_protocol(std::string_view name);

struct BenchSource {
  std::string name;
  Matrix data;
  // Ground-truth labels; required by the noise protocol, ignored otherwise.
  std::vector<int> labels;
};

struct BenchConfig {
  std::vector<DetectorKind> kinds;
  std::vector<double> gammas = {0.7};
  int runs = 5;
  std::uint64_t seed = 0;
  Protocol protocol = Protocol::kSubset;
  int pi_features = 10;
  double anomaly_fraction = 0.1;
  double train_fraction = 0.5;
  std::size_t k = 10;
  DetectorOptions detector;
};

struct MetricValues {
  double map = 0.0;
  double auc = 0.0;
  double ndcg = 0.0;
  double precision = 0.0;
};

MetricValues compute_metrics(std::span<const double> detector_scores, std::span<const int> labels,
                             std::size_t k);

struct CellResult {
  std::string dataset;
  double gamma = 0.0;
  DetectorKind kind = DetectorKind::kIf;
  std::vector<MetricValues> runs;
  MetricValues mean;
};

struct ComparisonStats {
  RankTable ranks;
  std::optional<double> chi2;
  std::optional<double> p_value;
  std::optional<double> critical_difference;
};

// Friedman statistics when there are >= 2 datasets and methods, plus the
// Nemenyi CD at alpha 0.05 when the method count is in table range.
ComparisonStats compare_methods(const Matrix& metric_table);

struct GammaSummary {
  double gamma = 0.0;
  std::vector<std::string> datasets;
  // datasets x kinds tables of run-averaged metrics.
  Matrix map;
  Matrix auc;
  Matrix ndcg;
  Matrix precision;
  ComparisonStats map_stats;
  Vector auc_average_ranks;
  Vector ndcg_average_ranks;
  Vector precision_average_ranks;
};

struct EvalReport {
  BenchConfig config;
  std::vector<CellResult> cells;
  std::vector<GammaSummary> summaries;
};

EvalReport run_benchmark(std::span<const BenchSource> sources, const BenchConfig& config);

// Writes metrics.csv, runs.csv, ranks.csv and stats.json into dir.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace spi
