#include "spi/bench.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "spi/csv.hpp"
#include "spi/error.hpp"
#include "spi/parallel.hpp"
#include "spi/random.hpp"

namespace spi {

namespace {

using json = nlohmann::json;

// Fisher-Yates prefix: `take` distinct values of `pool`, returned sorted.
std::vector<std::size_t> choose_subset(std::vector<std::size_t> pool, std::size_t take, Rng& rng) {
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  }
  pool.resize(take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<std::size_t> iota_vector(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

BenchDataset assemble(const Matrix& features, std::vector<int> labels, FeatureSplit split) {
  BenchDataset out;
  out.x = select_columns(features, split.primary);
  out.x_star = select_columns(features, split.privileged);
  out.labels = std::move(labels);
  out.primary_columns = std::move(split.primary);
  out.privileged_columns = std::move(split.privileged);
  return out;
}

BenchDataset take_rows(const BenchDataset& d, std::span<const std::size_t> rows) {
  BenchDataset out;
  out.x = select_rows(d.x, rows);
  out.x_star = select_rows(d.x_star, rows);
  out.labels.reserve(rows.size());
  for (const std::size_t r : rows) out.labels.push_back(d.labels[r]);
  out.primary_columns = d.primary_columns;
  out.privileged_columns = d.privileged_columns;
  return out;
}

template <typename Fn>
auto with_context(const std::string& context, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(context + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw DataError(context + ": " + e.what());
  }
}

MetricValues average(std::span<const MetricValues> runs) {
  MetricValues m;
  for (const auto& r : runs) {
    m.map += r.map;
    m.auc += r.auc;
    m.ndcg += r.ndcg;
    m.precision += r.precision;
  }
  const double n = static_cast<double>(runs.size());
  m.map /= n;
  m.auc /= n;
  m.ndcg /= n;
  m.precision /= n;
  return m;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json ranks_by_kind(const Vector& ranks, std::span<const DetectorKind> kinds) {
  json out = json::object();
  for (std::size_t c = 0; c < kinds.size(); ++c) {
    out[std::string(to_string(kinds[c]))] = ranks[static_cast<Index>(c)];
  }
  return out;
}

}  // namespace

std::size_t round_count(double v) {
  return static_cast<std::size_t>(std::floor(v + 0.5 + 1e-9));
}

FeatureSplit split_feature_spaces(std::span<const std::size_t> perturbed_columns,
                                  std::span<const std::size_t> other_columns, double gamma,
                                  std::uint64_t seed) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("gamma must lie in (0, 1]");
  const std::size_t p = perturbed_columns.size();
  const std::size_t take = std::min(p, round_count(gamma * static_cast<double>(p)));
  if (take == 0) throw UsageError("gamma leaves no privileged columns");
  Rng rng(seed);
  FeatureSplit split;
  split.privileged = choose_subset({perturbed_columns.begin(), perturbed_columns.end()}, take, rng);
  split.primary.assign(other_columns.begin(), other_columns.end());
  for (const std::size_t c : perturbed_columns) {
    if (!std::binary_search(split.privileged.begin(), split.privileged.end(), c)) {
      split.primary.push_back(c);
    }
  }
  std::sort(split.primary.begin(), split.primary.end());
  return split;
}

BenchDataset designate_and_perturb(const Matrix& normals, const PerturbSpec& spec) {
  const auto n = static_cast<std::size_t>(normals.rows());
  const auto cols = static_cast<std::size_t>(normals.cols());
  if (n < 10) throw DataError("need at least 10 normal rows");
  if (spec.pi_feature_count < 1 || static_cast<std::size_t>(spec.pi_feature_count) > cols) {
    throw UsageError("p = " + std::to_string(spec.pi_feature_count) +
                     " exceeds the " + std::to_string(cols) + " available columns");
  }
  if (!(spec.anomaly_fraction > 0.0 && spec.anomaly_fraction < 1.0)) {
    throw UsageError("anomaly fraction must lie in (0, 1)");
  }
  const auto p = static_cast<std::size_t>(spec.pi_feature_count);
  const std::size_t anomalies = round_count(spec.anomaly_fraction * static_cast<double>(n));
  if (anomalies == 0 || anomalies >= n) throw UsageError("anomaly fraction selects no rows");

  Rng row_rng = make_stream(spec.seed, {1});
  Rng col_rng = make_stream(spec.seed, {2});
  Rng noise_rng = make_stream(spec.seed, {3});
  const auto rows = choose_subset(iota_vector(0, n), anomalies, row_rng);
  const auto selected = choose_subset(iota_vector(0, cols), p, col_rng);

  Matrix features = normals;
  std::vector<double> scale(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto column = normals.col(static_cast<Index>(selected[j]));
    const double mean = column.mean();
    const double var = (column.array() - mean).square().sum() / static_cast<double>(n - 1);
    scale[j] = std::sqrt(var);
  }
  std::vector<int> labels(n, 0);
  for (const std::size_t r : rows) {
    labels[r] = 1;
    for (std::size_t j = 0; j < p; ++j) {
      features(static_cast<Index>(r), static_cast<Index>(selected[j])) +=
          scale[j] * standard_normal(noise_rng);
    }
  }

  std::vector<std::size_t> others;
  for (std::size_t c = 0; c < cols; ++c) {
    if (!std::binary_search(selected.begin(), selected.end(), c)) others.push_back(c);
  }
  return assemble(features, std::move(labels),
                  split_feature_spaces(selected, others, spec.gamma, derive_seed(spec.seed, {4})));
}

NoiseAugmented noise_augment(const Matrix& original, std::uint64_t seed) {
  const Index n = original.rows();
  const Index p = original.cols();
  if (p < 1) throw DataError("no features");
  if (n < 1) throw DataError("empty dataset");
  const double count = static_cast<double>(original.size());
  const double mean = original.mean();
  const double sd = count > 1 ? std::sqrt((original.array() - mean).square().sum() / (count - 1)) : 0.0;

  NoiseAugmented out;
  out.features.resize(n, 11 * p);
  out.features.leftCols(p) = original;
  Rng rng(seed);
  for (Index i = 0; i < n; ++i) {
    for (Index j = p; j < 11 * p; ++j) {
      out.features(i, j) = 0.01 * mean + 0.01 * sd * standard_normal(rng);
    }
  }
  out.original_columns = iota_vector(0, static_cast<std::size_t>(p));
  out.noise_columns = iota_vector(static_cast<std::size_t>(p), static_cast<std::size_t>(11 * p));
  return out;
}

BenchDataset split_augmented(const NoiseAugmented& augmented, std::vector<int> labels,
                             double gamma, std::uint64_t seed) {
  if (static_cast<Index>(labels.size()) != augmented.features.rows()) {
    throw DataError("label count does not match row count");
  }
  return assemble(augmented.features, std::move(labels),
                  split_feature_spaces(augmented.original_columns, augmented.noise_columns, gamma, seed));
}

std::pair<BenchDataset, BenchDataset> stratified_split(const BenchDataset& dataset,
                                                       double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("train fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (const int label : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
      if (dataset.labels[i] == label) members.push_back(i);
    }
    if (members.size() < 2) {
      throw DataError("class " + std::to_string(label) + " has fewer than 2 rows; cannot stratify");
    }
    std::size_t take = round_count(train_fraction * static_cast<double>(members.size()));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    const auto chosen = choose_subset(members, take, rng);
    for (const std::size_t m : members) {
      (std::binary_search(chosen.begin(), chosen.end(), m) ? train : test).push_back(m);
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {take_rows(dataset, train), take_rows(dataset, test)};
}

Matrix make_synthetic_normals(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  constexpr Index kFactors = 4;
  constexpr Index kClusters = 3;
  const auto d = static_cast<Index>(cols);
  Rng rng(seed);
  Matrix centers(kClusters, d);
  for (Index c = 0; c < kClusters; ++c) {
    for (Index j = 0; j < d; ++j) centers(c, j) = 3.0 * standard_normal(rng);
  }
  Matrix loadings(d, kFactors);
  for (Index j = 0; j < d; ++j) {
    for (Index f = 0; f < kFactors; ++f) loadings(j, f) = standard_normal(rng);
  }
  const std::array<double, kClusters> cumulative = {0.5, 0.8, 1.0};
  Matrix out(static_cast<Index>(rows), d);
  Vector factors(kFactors);
  for (Index i = 0; i < out.rows(); ++i) {
    const double u = uniform01(rng);
    Index cluster = 0;
    while (cluster + 1 < kClusters && u >= cumulative[static_cast<std::size_t>(cluster)]) ++cluster;
    for (Index f = 0; f < kFactors; ++f) factors[f] = standard_normal(rng);
    for (Index j = 0; j < d; ++j) {
      out(i, j) = centers(cluster, j) + loadings.row(j).dot(factors) + 0.5 * standard_normal(rng);
    }
  }
  return out;
}

std::string_view to_string(Protocol protocol) {
  return protocol == Protocol::kSubset ? "subset" : "noise";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "subset") return Protocol::kSubset;
  if (name == "noise") return Protocol::kNoise;
  throw UsageError("unknown protocol: " + std::string(name));
}

MetricValues compute_metrics(std::span<const double> detector_scores, std::span<const int> labels,
                             std::size_t k) {
  const LabeledScores s = from_detector_scores(detector_scores, labels);
  return {average_precision(s), roc_auc(s), ndcg_at_k(s, k), precision_at_k(s, k)};
}

ComparisonStats compare_methods(const Matrix& metric_table) {
  ComparisonStats stats;
  const auto datasets = static_cast<int>(metric_table.rows());
  const auto methods = static_cast<int>(metric_table.cols());
  if (datasets >= 2 && methods >= 2) {
    FriedmanResult f = friedman_test(metric_table);
    stats.ranks = std::move(f.ranks);
    stats.chi2 = f.chi2;
    stats.p_value = f.p_value;
  } else {
    stats.ranks = rank_methods(metric_table);
  }
  if (datasets >= 1 && methods >= 2 && methods <= 20) {
    stats.critical_difference = nemenyi_cd(methods, datasets, 0.05);
  }
  return stats;
}

EvalReport run_benchmark(std::span<const BenchSource> sources, const BenchConfig& config) {
  if (sources.empty()) throw UsageError("benchmark needs at least one dataset");
  if (config.kinds.empty()) throw UsageError("benchmark needs at least one detector kind");
  if (config.gammas.empty()) throw UsageError("benchmark needs at least one gamma");
  if (config.runs < 1) throw UsageError("runs must be >= 1");
  config.detector.validate();

  struct Cell {
    std::size_t source;
    std::size_t gamma;
    int run;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t g = 0; g < config.gammas.size(); ++g) {
      for (int r = 0; r < config.runs; ++r) cells.push_back({s, g, r});
    }
  }
  const std::size_t kinds = config.kinds.size();
  std::vector<MetricValues> results(cells.size() * kinds);

  parallel_for(cells.size(), [&](std::size_t c) {
    const Cell& cell = cells[c];
    const BenchSource& source = sources[cell.source];
    const double gamma = config.gammas[cell.gamma];
    std::ostringstream context;
    context << "dataset '" << source.name << "', gamma " << gamma << ", run " << cell.run;
    with_context(context.str(), [&] {
      const std::uint64_t cell_seed = derive_seed(
          config.seed, {hash_name(source.name), std::bit_cast<std::uint64_t>(gamma),
                        static_cast<std::uint64_t>(cell.run)});
      BenchDataset dataset;
      if (config.protocol == Protocol::kSubset) {
        PerturbSpec spec{config.anomaly_fraction, config.pi_features, gamma,
                         derive_seed(cell_seed, {1})};
        dataset = designate_and_perturb(source.data, spec);
      } else {
        const NoiseAugmented augmented = noise_augment(source.data, derive_seed(cell_seed, {1}));
        dataset = split_augmented(augmented, source.labels, gamma, derive_seed(cell_seed, {4}));
      }
      const auto [train, test] =
          stratified_split(dataset, config.train_fraction, derive_seed(cell_seed, {2}));
      DetectorOptions options = config.detector;
      options.seed = derive_seed(cell_seed, {3});
      for (std::size_t k = 0; k < kinds; ++k) {
        const DetectorKind kind = config.kinds[k];
        const TrainedDetector model =
            train_detector(kind, train.x, std::optional<Matrix>(train.x_star), options);
        const Vector scores = kind == DetectorKind::kIfStar
                                  ? score_detector(model, test.x, test.x_star)
                                  : score_detector(model, test.x);
        results[c * kinds + k] = compute_metrics(as_span(scores), test.labels, config.k);
      }
      return 0;
    });
  });

  EvalReport report;
  report.config = config;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t g = 0; g < config.gammas.size(); ++g) {
      for (std::size_t k = 0; k < kinds; ++k) {
        CellResult cell;
        cell.dataset = sources[s].name;
        cell.gamma = config.gammas[g];
        cell.kind = config.kinds[k];
        for (std::size_t c = 0; c < cells.size(); ++c) {
          if (cells[c].source == s && cells[c].gamma == g) cell.runs.push_back(results[c * kinds + k]);
        }
        cell.mean = average(cell.runs);
        report.cells.push_back(std::move(cell));
      }
    }
  }

  const auto n_sources = static_cast<Index>(sources.size());
  const auto n_kinds = static_cast<Index>(kinds);
  for (std::size_t g = 0; g < config.gammas.size(); ++g) {
    GammaSummary summary;
    summary.gamma = config.gammas[g];
    summary.map.resize(n_sources, n_kinds);
    summary.auc.resize(n_sources, n_kinds);
    summary.ndcg.resize(n_sources, n_kinds);
    summary.precision.resize(n_sources, n_kinds);
    for (std::size_t s = 0; s < sources.size(); ++s) {
      summary.datasets.push_back(sources[s].name);
      for (std::size_t k = 0; k < kinds; ++k) {
        const MetricValues& m =
            report.cells[(s * config.gammas.size() + g) * kinds + k].mean;
        const auto r = static_cast<Index>(s);
        const auto c = static_cast<Index>(k);
        summary.map(r, c) = m.map;
        summary.auc(r, c) = m.auc;
        summary.ndcg(r, c) = m.ndcg;
        summary.precision(r, c) = m.precision;
      }
    }
    summary.map_stats = compare_methods(summary.map);
    summary.auc_average_ranks = rank_methods(summary.auc).average;
    summary.ndcg_average_ranks = rank_methods(summary.ndcg).average;
    summary.precision_average_ranks = rank_methods(summary.precision).average;
    report.summaries.push_back(std::move(summary));
  }
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& config = report.config;
  const std::string k = std::to_string(config.k);

  std::string metrics = "dataset,gamma,detector,runs,map,auc,ndcg_at_" + k + ",precision_at_" + k + "\n";
  std::string runs = "dataset,gamma,detector,run,map,auc,ndcg_at_" + k + ",precision_at_" + k + "\n";
  for (const auto& cell : report.cells) {
    const std::string prefix = csv_field(cell.dataset) + "," + format_real(cell.gamma) + "," +
                               std::string(to_string(cell.kind));
    metrics += prefix + "," + std::to_string(cell.runs.size()) + "," + format_real(cell.mean.map) +
               "," + format_real(cell.mean.auc) + "," + format_real(cell.mean.ndcg) + "," +
               format_real(cell.mean.precision) + "\n";
    for (std::size_t r = 0; r < cell.runs.size(); ++r) {
      const auto& m = cell.runs[r];
      runs += prefix + "," + std::to_string(r) + "," + format_real(m.map) + "," +
              format_real(m.auc) + "," + format_real(m.ndcg) + "," + format_real(m.precision) + "\n";
    }
  }
  write_text_file(dir / "metrics.csv", metrics);
  write_text_file(dir / "runs.csv", runs);

  std::string ranks = "gamma,dataset";
  for (const auto kind : config.kinds) ranks += "," + std::string(to_string(kind));
  ranks += "\n";
  for (const auto& summary : report.summaries) {
    const Matrix& table = summary.map_stats.ranks.ranks;
    for (Index r = 0; r < table.rows(); ++r) {
      ranks += format_real(summary.gamma) + "," + csv_field(summary.datasets[static_cast<std::size_t>(r)]);
      for (Index c = 0; c < table.cols(); ++c) ranks += "," + format_real(table(r, c));
      ranks += "\n";
    }
    ranks += format_real(summary.gamma) + ",(average)";
    for (Index c = 0; c < table.cols(); ++c) ranks += "," + format_real(summary.map_stats.ranks.average[c]);
    ranks += "\n";
  }
  write_text_file(dir / "ranks.csv", ranks);

  json stats;
  json kinds = json::array();
  for (const auto kind : config.kinds) kinds.push_back(std::string(to_string(kind)));
  stats["detectors"] = kinds;
  stats["protocol"] = std::string(to_string(config.protocol));
  stats["seed"] = config.seed;
  stats["runs"] = config.runs;
  stats["train_fraction"] = config.train_fraction;
  stats["anomaly_fraction"] = config.anomaly_fraction;
  stats["pi_features"] = config.pi_features;
  stats["k"] = config.k;
  stats["count_rounding"] = "nearest, halves up";
  json summaries = json::array();
  for (const auto& summary : report.summaries) {
    json s;
    s["gamma"] = summary.gamma;
    s["datasets"] = summary.datasets.size();
    s["friedman_chi2"] = optional_number(summary.map_stats.chi2);
    s["friedman_p_value"] = optional_number(summary.map_stats.p_value);
    s["nemenyi_cd"] = optional_number(summary.map_stats.critical_difference);
    s["nemenyi_alpha"] = 0.05;
    s["average_ranks"] = {
        {"map", ranks_by_kind(summary.map_stats.ranks.average, config.kinds)},
        {"auc", ranks_by_kind(summary.auc_average_ranks, config.kinds)},
        {"ndcg", ranks_by_kind(summary.ndcg_average_ranks, config.kinds)},
        {"precision", ranks_by_kind(summary.precision_average_ranks, config.kinds)},
    };
    summaries.push_back(std::move(s));
  }
  stats["summaries"] = std::move(summaries);
  write_text_file(dir / "stats.json", stats.dump(2) + "\n");
}

}  // namespace spi
