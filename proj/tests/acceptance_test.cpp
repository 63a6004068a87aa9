// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spi/bench.hpp"
#include "spi/cli.hpp"
#include "spi/csv.hpp"
#include "spi/eval.hpp"
#include "spi/forest.hpp"
#include "spi/pipeline.hpp"
#include "spi/rank.hpp"
#include "support/oracles.hpp"
#include "support/reference_ranks.hpp"

namespace spi {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::vector<PairTarget> random_pairs(Index n, std::size_t count, Rng& rng) {
  std::vector<PairTarget> pairs;
  while (pairs.size() < count) {
    const auto i = static_cast<std::uint32_t>(uniform_index(rng, static_cast<std::size_t>(n)));
    const auto j = static_cast<std::uint32_t>(uniform_index(rng, static_cast<std::size_t>(n)));
    if (i != j) pairs.push_back({i, j, uniform01(rng)});
  }
  return pairs;
}

bool bit_identical(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(1000 + trial);
    const Index n = 3 + static_cast<Index>(uniform_index(rng, 8));
    const Index t = 1 + static_cast<Index>(uniform_index(rng, 5));
    const Matrix phi = testing::random_matrix(n, t, rng);
    const auto pairs = random_pairs(n, 2 + uniform_index(rng, 20), rng);

    const Vector beta = testing::random_vector(t, rng);
    const auto linear = [&](const Vector& b) { return linear_rank_objective(b, phi, pairs).cost; };
    worst = std::max(worst, testing::relative_error(linear_rank_objective(beta, phi, pairs).gradient,
                                                    testing::numeric_gradient(linear, beta)));

    const Vector gamma = testing::random_vector(n, rng);
    const RbfKernel kernel{0.5 + 2.0 * uniform01(rng)};
    const auto rbf = [&](const Vector& g) { return kernel_rank_objective(g, phi, pairs, kernel).cost; };
    worst = std::max(worst, testing::relative_error(kernel_rank_objective(gamma, phi, pairs, kernel).gradient,
                                                    testing::numeric_gradient(rbf, gamma)));
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-5 && elapsed < 5.0, fmt("max relative error %.3g over 20 instances, %.2f s", worst, elapsed)};
}

Outcome convex_cost_sanity() {
  int bad = 0;
  const int trials = 50;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    Rng rng(2000 + trial);
    const Index n = 5 + static_cast<Index>(uniform_index(rng, 40));
    const Index t = 1 + static_cast<Index>(uniform_index(rng, 8));
    const Matrix phi = testing::random_matrix(n, t, rng, 3.0);
    const auto pairs = random_pairs(n, 5 + uniform_index(rng, 200), rng);
    OptimizerTrace trace;
    fit_linear_ranker(phi, pairs, {}, &trace);
    bool ok = !trace.costs.empty();
    for (std::size_t i = 1; i < trace.costs.size(); ++i) ok = ok && trace.costs[i] <= trace.costs[i - 1];
    ok = ok && trace.costs.back() <= static_cast<double>(pairs.size()) * std::log(2.0);
    bad += ok ? 0 : 1;
  }
  return {bad == 0, fmt("%d/%d instances violate monotone cost or the |pairs| ln 2 bound", bad, trials)};
}

Outcome metric_oracles() {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    Rng rng(3000 + trial);
    const std::size_t m = 2 + uniform_index(rng, 11);
    std::vector<double> scores(m);
    std::vector<int> labels(m);
    for (std::size_t i = 0; i < m; ++i) {
      // Coarse grid so ties appear.
      scores[i] = static_cast<double>(uniform_index(rng, 6));
      labels[i] = uniform01(rng) < 0.4 ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    const LabeledScores s{scores, labels};
    worst = std::max(worst, std::abs(roc_auc(s) - testing::auc_by_pairs(scores, labels)));
    worst = std::max(worst, std::abs(average_precision(s) - testing::ap_by_ranks(scores, labels)));
  }
  return {worst <= 1e-12, fmt("max deviation %.3g over 1000 trials", worst)};
}

Outcome statistics_reproduction() {
  const double cd = nemenyi_cd(6, 17, 0.05);
  // Friedman ranks best = 1 on the highest metric, so feed negated ranks.
  const Matrix ranks = testing::reference_ranks();
  const FriedmanResult f = friedman_test(-ranks);
  const double expected[] = {5.11, 4.23, 4.88, 3.29, 2.35, 1.11};
  double worst_avg = 0.0;
  for (Index j = 0; j < 6; ++j) {
    worst_avg = std::max(worst_avg, std::abs(ranks.col(j).mean() - expected[j]));
    worst_avg = std::max(worst_avg, std::abs(f.ranks.average[j] - expected[j]));
  }
  const double ratio = f.p_value / 2.16e-11;
  const bool pass = std::abs(cd - 1.82) <= 0.02 && ratio >= 1.0 / 3.0 && ratio <= 3.0 && worst_avg <= 0.01;
  return {pass, fmt("CD %.4f, chi2 %.4f, p %.3g (x%.2f of reference), max average-rank gap %.4f", cd, f.chi2,
                    f.p_value, ratio, worst_avg)};
}

Outcome isolation_property() {
  const auto start = Clock::now();
  int hits = 0;
  const double sd = 1.0 / std::sqrt(12.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(4000 + seed);
    Matrix data(257, 2);
    for (Index i = 0; i < 256; ++i) {
      for (Index j = 0; j < 2; ++j) data(i, j) = uniform01(rng);
    }
    data(256, 0) = 0.5 + 10.0 * sd;
    data(256, 1) = 0.5 + 10.0 * sd;
    const IsolationForest forest = fit_forest(data, {.tree_count = 100, .subsample_size = 64, .seed = seed});
    Index argmin = 0;
    forest_scores(forest, data).minCoeff(&argmin);
    hits += argmin == 256 ? 1 : 0;
  }
  const double elapsed = seconds_since(start);
  return {hits >= 9 && elapsed < 10.0, fmt("outlier is the argmin in %d/10 seeds, %.2f s", hits, elapsed)};
}

Outcome pi_independence() {
  int changed = 0;
  int checks = 0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Rng rng(5000 + trial);
    const Index n = 20 + static_cast<Index>(uniform_index(rng, 60));
    const Index d = 1 + static_cast<Index>(uniform_index(rng, 5));
    const Index d_star = 1 + static_cast<Index>(uniform_index(rng, 4));
    const Matrix x = testing::random_matrix(n, d, rng);
    const Matrix x_star = testing::random_matrix(n, d_star, rng);
    const Index m = 10 + static_cast<Index>(uniform_index(rng, 20));
    // A full test table: primary columns first, privileged after.
    Matrix table = testing::random_matrix(m, d + d_star, rng);
    Matrix mutated = table;
    mutated.rightCols(d_star) = testing::random_matrix(m, d_star, rng, 1000.0);

    DetectorOptions o;
    o.seed = trial;
    o.trees = 10 + static_cast<int>(uniform_index(rng, 20));
    o.privileged_trees = 5 + static_cast<int>(uniform_index(rng, 10));
    o.subsample_size = 16 + static_cast<int>(uniform_index(rng, 48));
    o.max_pairs = 1000;
    o.ranker = trial % 2 == 0 ? RankerType::kLinear : RankerType::kKernel;
    for (DetectorKind kind : {DetectorKind::kSpi, DetectorKind::kSpiLite, DetectorKind::kFt}) {
      const TrainedDetector model = train_detector(kind, x, x_star, o);
      const Vector before = score_detector(model, table.leftCols(d));
      const Vector after = score_detector(model, mutated.leftCols(d));
      changed += bit_identical(before, after) ? 0 : 1;
      ++checks;
    }
  }
  return {changed == 0, fmt("%d/%d detector outputs changed under privileged-column mutation", changed, checks)};
}

BenchConfig synthetic_config() {
  BenchConfig c;
  c.kinds = {DetectorKind::kIf, DetectorKind::kSpi, DetectorKind::kIfStar};
  c.gammas = {0.7};
  c.runs = 5;
  c.seed = 11;
  c.pi_features = 10;
  return c;
}

std::vector<BenchSource> synthetic_sources() {
  std::vector<BenchSource> sources;
  for (int i = 1; i <= 5; ++i) {
    const std::string name = "s" + std::to_string(i);
    // 500 x (p + d) normal rows, p = 10 perturbed and d = 20 untouched.
    sources.push_back({name, make_synthetic_normals(500, 30, hash_name(name)), {}});
  }
  return sources;
}

Outcome desk_scale_benefit() {
  const auto start = Clock::now();
  const EvalReport report = run_benchmark(synthetic_sources(), synthetic_config());
  const double elapsed = seconds_since(start);
  const Matrix& map = report.summaries.at(0).map;
  const double map_if = map.col(0).mean();
  const double map_spi = map.col(1).mean();
  const double map_star = map.col(2).mean();
  const bool pass = map_star >= map_spi && map_spi >= map_if && map_spi - map_if >= 0.05 && elapsed < 180.0;
  return {pass, fmt("mean MAP IF* %.4f, SPI %.4f, IF %.4f, SPI-IF %+.4f (need >= 0.05), %.1f s", map_star, map_spi,
                    map_if, map_spi - map_if, elapsed)};
}

Outcome mimicry() {
  std::vector<double> rhos;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(8000 + seed);
    const Matrix x = testing::random_matrix(200, 4, rng);
    const Matrix test = testing::random_matrix(200, 4, rng);
    DetectorOptions o;
    o.seed = seed;
    o.max_pairs = 20000;
    const TrainedDetector spi = train_detector(DetectorKind::kSpi, x, x, o);
    const TrainedDetector star = train_detector(DetectorKind::kIfStar, x, x, o);
    rhos.push_back(testing::spearman(testing::to_std(score_detector(spi, test)),
                                     testing::to_std(score_detector(star, test, test))));
  }
  std::vector<double> sorted = rhos;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[2];
  return {median >= 0.8, fmt("median Spearman rho %.4f (min %.4f, max %.4f)", median, sorted.front(), sorted.back())};
}

Outcome bench_determinism() {
  const fs::path dir = fs::temp_directory_path() / "spi_acceptance_bench";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nlohmann::json config = {
      {"seed", 99},
      {"runs", 2},
      {"gammas", {0.5, 0.7}},
      {"kinds", {"if", "if-star", "ft", "spi-lite", "spi"}},
      {"detector", {{"trees", 30}}},
      {"datasets",
       {{{"name", "a"}, {"synthetic", {{"rows", 200}, {"cols", 20}}}},
        {{"name", "b"}, {"synthetic", {{"rows", 150}, {"cols", 25}}}}}}};
  write_text_file(dir / "bench.json", config.dump(2));
  std::ostringstream out;
  std::ostringstream err;
  const auto bench = [&](const char* name) {
    return run_cli({"spi", "bench", "--config", (dir / "bench.json").string(), "-o", (dir / name).string()}, out, err);
  };
  if (bench("first") != kExitOk || bench("second") != kExitOk) return {false, "bench failed: " + err.str()};
  int differing = 0;
  for (const char* file : {"metrics.csv", "runs.csv", "ranks.csv", "stats.json"}) {
    differing += read_text_file(dir / "first" / file) == read_text_file(dir / "second" / file) ? 0 : 1;
  }
  fs::remove_all(dir);
  return {differing == 0, fmt("%d/4 report files differ between two runs", differing)};
}

}  // namespace
}  // namespace spi

int main() {
  const std::vector<std::pair<const char*, std::function<spi::Outcome()>>> criteria = {
      {"1 gradient correctness", spi::gradient_correctness},
      {"2 convex cost sanity", spi::convex_cost_sanity},
      {"3 metric oracles", spi::metric_oracles},
      {"4 statistics reproduction", spi::statistics_reproduction},
      {"5 isolation property", spi::isolation_property},
      {"6 privileged-information independence", spi::pi_independence},
      {"7 synthetic benefit over IF", spi::desk_scale_benefit},
      {"8 mimicry", spi::mimicry},
      {"9 bench determinism", spi::bench_determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    spi::Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %s: %s\n", outcome.pass ? "PASS" : "FAIL", name, outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
