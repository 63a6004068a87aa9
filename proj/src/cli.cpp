#include "spi/cli.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "spi/csv.hpp"
#include "spi/dataset.hpp"
#include "spi/error.hpp"
#include "spi/eval.hpp"
#include "spi/model_io.hpp"
#include "spi/pipeline.hpp"
#include "spi/random.hpp"

namespace spi {

namespace {

using json = nlohmann::json;

struct PerturbArgs {
  std::string csv;
  int p = 10;
  double gamma = 0.7;
  double fraction = 0.1;
  std::uint64_t seed = 0;
  std::string protocol = "subset";
  std::string label_column;
  std::string output;
};

struct TrainArgs {
  std::string kind;
  std::string manifest;
  std::string output;
  std::string ranker = "linear";
  std::optional<double> bandwidth;
  DetectorOptions options;
};

struct ScoreArgs {
  std::string model;
  std::string manifest;
  std::string output;
  std::string kind;
};

struct EvalArgs {
  std::string scores;
  std::string labels;
  std::string label_column = "label";
  std::size_t k = 10;
  std::string output;
};

struct BenchArgs {
  std::string config;
  std::string output;
};

void add_detector_flags(CLI::App& cmd, DetectorOptions& o, std::string& ranker,
                        std::optional<double>& bandwidth) {
  cmd.add_option("--trees", o.trees, "Trees per forest")->capture_default_str();
  cmd.add_option("--privileged-trees", o.privileged_trees, "Trees in the privileged forest (0: same as --trees)")
      ->capture_default_str();
  cmd.add_option("--subsample", o.subsample_size, "Rows per tree")->capture_default_str();
  cmd.add_option("--max-depth", o.max_depth, "Depth limit (0: ceil(log2 subsample))")->capture_default_str();
  cmd.add_option("--lambda", o.lambda, "Ridge penalty")->capture_default_str();
  cmd.add_option("--ranker", ranker, "Pairwise ranker")
      ->check(CLI::IsMember({"linear", "kernel"}))
      ->capture_default_str();
  cmd.add_option("--max-pairs", o.max_pairs, "Pair budget for the ranker")->capture_default_str();
  cmd.add_option("--max-iters", o.optimizer.max_iters, "Optimizer iteration cap")->capture_default_str();
  cmd.add_option("--tol", o.optimizer.tolerance, "Gradient infinity-norm tolerance")->capture_default_str();
  cmd.add_option("--bandwidth", bandwidth, "RBF bandwidth (default: median heuristic)");
  cmd.add_flag("--ft-true-privileged", o.ft_forest_on_true_privileged,
               "FT: grow the forest on true privileged rows");
  cmd.add_option("--seed", o.seed, "Master seed")->capture_default_str();
}

std::vector<std::string> feature_names(const CsvTable& table, const std::string& label_column) {
  std::vector<std::string> names;
  for (const auto& h : table.header) {
    if (h != label_column) names.push_back(h);
  }
  return names;
}

Matrix table_matrix(const CsvTable& table, const std::vector<std::string>& names) {
  Matrix m(static_cast<Index>(table.rows.size()), static_cast<Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    const std::size_t idx = column_index(table, names[c]);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      m(static_cast<Index>(r), static_cast<Index>(c)) = parse_real(table.rows[r][idx], r + 1, names[c]);
    }
  }
  return m;
}

std::vector<int> table_labels(const CsvTable& table, const std::string& column) {
  const std::size_t idx = column_index(table, column);
  std::vector<int> labels;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double v = parse_real(table.rows[r][idx], r + 1, column);
    if (v != 0.0 && v != 1.0) throw DataError("label at row " + std::to_string(r + 1) + " must be 0 or 1");
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

void run_perturb(const PerturbArgs& a, std::ostream& out) {
  const Protocol protocol = parse_protocol(a.protocol);
  const CsvTable table = read_csv(a.csv);
  if (table.rows.empty()) throw DataError("empty file: no data rows in " + a.csv);
  const auto names = feature_names(table, a.label_column);
  Matrix data = table_matrix(table, names);

  BenchDataset dataset;
  std::vector<std::string> column_names = names;
  if (protocol == Protocol::kSubset) {
    if (!a.label_column.empty()) {
      // Only normal observations are perturbed; labelled anomalies are dropped.
      const auto labels = table_labels(table, a.label_column);
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) keep.push_back(i);
      }
      data = select_rows(data, keep);
    }
    dataset = designate_and_perturb(data, PerturbSpec{a.fraction, a.p, a.gamma, a.seed});
  } else {
    if (a.label_column.empty()) throw UsageError("--protocol noise requires --label");
    const NoiseAugmented augmented = noise_augment(data, derive_seed(a.seed, {1}));
    for (std::size_t j = 0; j < augmented.noise_columns.size(); ++j) {
      column_names.push_back("noise_" + std::to_string(j));
    }
    dataset = split_augmented(augmented, table_labels(table, a.label_column), a.gamma,
                              derive_seed(a.seed, {4}));
  }

  DatasetManifest manifest;
  manifest.csv_path = "data.csv";
  manifest.label_column = "label";
  for (const auto c : dataset.primary_columns) manifest.primary_columns.push_back(column_names[c]);
  for (const auto c : dataset.privileged_columns) manifest.privileged_columns.push_back(column_names[c]);

  std::string csv;
  bool first = true;
  for (const auto& name : manifest.primary_columns) {
    csv += (first ? "" : ",") + csv_field(name);
    first = false;
  }
  for (const auto& name : manifest.privileged_columns) csv += "," + csv_field(name);
  csv += ",label\n";
  for (Index r = 0; r < dataset.x.rows(); ++r) {
    for (Index c = 0; c < dataset.x.cols(); ++c) csv += (c ? "," : "") + format_real(dataset.x(r, c));
    for (Index c = 0; c < dataset.x_star.cols(); ++c) csv += "," + format_real(dataset.x_star(r, c));
    csv += "," + std::to_string(dataset.labels[static_cast<std::size_t>(r)]) + "\n";
  }
  const std::filesystem::path dir = a.output;
  write_text_file(dir / "data.csv", csv);
  write_manifest(manifest, dir / "manifest.json");
  out << "wrote " << dataset.x.rows() << " rows (" << dataset.x.cols() << " primary, "
      << dataset.x_star.cols() << " privileged columns) to " << dir.string() << "\n";
}

void run_train(TrainArgs a, std::ostream& out) {
  const DetectorKind kind = parse_detector_kind(a.kind);
  a.options.ranker = parse_ranker_type(a.ranker);
  a.options.kernel_bandwidth = a.bandwidth;
  const LoadedData data = load_csv(read_manifest(a.manifest));
  if (uses_privileged_training(kind) && !data.x_star) {
    throw UsageError("detector '" + a.kind + "' needs privileged_columns in the manifest");
  }
  const TrainedDetector model =
      train_detector(kind, data.x, kind == DetectorKind::kIf ? std::nullopt : data.x_star, a.options);
  save_model(model, a.output);
  out << "trained " << a.kind << " on " << data.x.rows() << " rows; model written to " << a.output << "\n";
}

void run_score(const ScoreArgs& a, std::ostream& out) {
  const TrainedDetector model = load_model(a.model);
  if (!a.kind.empty() && parse_detector_kind(a.kind) != model.kind) {
    throw UsageError("--kind " + a.kind + " contradicts the model's kind '" +
                     std::string(to_string(model.kind)) + "'");
  }
  const DatasetManifest manifest = read_manifest(a.manifest);
  if (model.kind != DetectorKind::kIfStar && !manifest.privileged_columns.empty()) {
    throw UsageError("privileged features forbidden at test time");
  }
  const LoadedData data = load_csv(manifest);
  const Vector scores = score_detector(model, data.x, data.x_star);
  std::string csv = "row_index,score\n";
  for (Index i = 0; i < scores.size(); ++i) csv += std::to_string(i) + "," + format_real(scores[i]) + "\n";
  write_text_file(a.output, csv);
  out << "scored " << scores.size() << " rows; scores written to " << a.output << "\n";
}

void run_eval(const EvalArgs& a, std::ostream& out) {
  const CsvTable table = read_csv(a.scores);
  const std::size_t idx_col = column_index(table, "row_index");
  const std::size_t score_col = column_index(table, "score");
  const std::vector<int> labels = read_labels(a.labels, a.label_column);
  std::vector<double> scores(labels.size(), 0.0);
  std::vector<bool> seen(labels.size(), false);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double idx = parse_real(table.rows[r][idx_col], r + 1, "row_index");
    if (idx < 0 || idx >= static_cast<double>(labels.size()) || idx != std::floor(idx) ||
        seen[static_cast<std::size_t>(idx)]) {
      throw DataError("invalid or duplicate row_index at row " + std::to_string(r + 1));
    }
    seen[static_cast<std::size_t>(idx)] = true;
    scores[static_cast<std::size_t>(idx)] = parse_real(table.rows[r][score_col], r + 1, "score");
  }
  if (table.rows.size() != labels.size()) {
    throw DataError("scores cover " + std::to_string(table.rows.size()) + " rows but labels have " +
                    std::to_string(labels.size()));
  }
  const MetricValues m = compute_metrics(scores, labels, a.k);
  json doc = {{"rows", labels.size()},
              {"anomalies", std::count(labels.begin(), labels.end(), 1)},
              {"k", a.k},
              {"map", m.map},
              {"auc", m.auc},
              {"ndcg_at_k", m.ndcg},
              {"precision_at_k", m.precision}};
  write_text_file(a.output, doc.dump(2) + "\n");
  out << "map=" << m.map << " auc=" << m.auc << " ndcg@" << a.k << "=" << m.ndcg << " p@" << a.k
      << "=" << m.precision << "\n";
}

void run_bench(const BenchArgs& a, std::ostream& out) {
  const BenchSetup setup = load_bench_config(a.config);
  const EvalReport report = run_benchmark(setup.sources, setup.config);
  write_report(report, a.output);
  out << "benchmark report written to " << a.output << "\n";
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

}  // namespace

BenchSetup load_bench_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("malformed bench config " + path.string() + ": " + e.what());
  }
  const std::filesystem::path base = path.parent_path();
  static const std::set<std::string> kKnown = {"seed",          "protocol",        "runs",
                                               "gammas",        "kinds",           "pi_features",
                                               "anomaly_fraction", "train_fraction", "k",
                                               "detector",      "datasets"};
  BenchSetup setup;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (!kKnown.count(key)) throw UsageError("unknown bench config field: " + key);
    }
    BenchConfig& c = setup.config;
    c.seed = get_or<std::uint64_t>(doc, "seed", 0);
    c.protocol = parse_protocol(get_or<std::string>(doc, "protocol", "subset"));
    c.runs = get_or<int>(doc, "runs", 5);
    c.gammas = get_or<std::vector<double>>(doc, "gammas", {0.7});
    c.pi_features = get_or<int>(doc, "pi_features", 10);
    c.anomaly_fraction = get_or<double>(doc, "anomaly_fraction", 0.1);
    c.train_fraction = get_or<double>(doc, "train_fraction", 0.5);
    c.k = get_or<std::size_t>(doc, "k", 10);
    for (const auto& kind : doc.at("kinds")) c.kinds.push_back(parse_detector_kind(kind.get<std::string>()));
    if (doc.contains("detector")) {
      const json& d = doc.at("detector");
      DetectorOptions& o = c.detector;
      o.trees = get_or<int>(d, "trees", o.trees);
      o.privileged_trees = get_or<int>(d, "privileged_trees", o.privileged_trees);
      o.subsample_size = get_or<int>(d, "subsample", o.subsample_size);
      o.max_depth = get_or<int>(d, "max_depth", o.max_depth);
      o.lambda = get_or<double>(d, "lambda", o.lambda);
      o.ranker = parse_ranker_type(get_or<std::string>(d, "ranker", "linear"));
      o.max_pairs = get_or<std::size_t>(d, "max_pairs", o.max_pairs);
      o.optimizer.max_iters = get_or<int>(d, "max_iters", o.optimizer.max_iters);
      o.optimizer.tolerance = get_or<double>(d, "tolerance", o.optimizer.tolerance);
      if (d.contains("bandwidth")) o.kernel_bandwidth = d.at("bandwidth").get<double>();
      o.ft_forest_on_true_privileged = get_or<bool>(d, "ft_true_privileged", false);
    }
    std::set<std::string> names;
    for (const auto& entry : doc.at("datasets")) {
      BenchSource source;
      source.name = entry.at("name").get<std::string>();
      if (!names.insert(source.name).second) throw UsageError("duplicate dataset name: " + source.name);
      if (entry.contains("synthetic")) {
        const json& s = entry.at("synthetic");
        source.data = make_synthetic_normals(s.at("rows").get<std::size_t>(), s.at("cols").get<std::size_t>(),
                                             get_or<std::uint64_t>(s, "seed", hash_name(source.name)));
      } else {
        std::filesystem::path csv = entry.at("csv").get<std::string>();
        if (csv.is_relative()) csv = base / csv;
        const CsvTable table = read_csv(csv);
        if (table.rows.empty()) throw DataError("empty file: no data rows in " + csv.string());
        const std::string label = get_or<std::string>(entry, "label_column", "");
        source.data = table_matrix(table, feature_names(table, label));
        if (!label.empty()) {
          const auto labels = table_labels(table, label);
          if (c.protocol == Protocol::kSubset) {
            std::vector<std::size_t> keep;
            for (std::size_t i = 0; i < labels.size(); ++i) {
              if (labels[i] == 0) keep.push_back(i);
            }
            source.data = select_rows(source.data, keep);
          } else {
            source.labels = labels;
          }
        } else if (c.protocol == Protocol::kNoise) {
          throw UsageError("dataset '" + source.name + "': noise protocol needs label_column");
        }
      }
      setup.sources.push_back(std::move(source));
    }
  } catch (const json::exception& e) {
    throw DataError("invalid bench config " + path.string() + ": " + e.what());
  }
  return setup;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anomaly detection with privileged training-only features"};
  app.require_subcommand(1);

  PerturbArgs perturb;
  auto* perturb_cmd = app.add_subcommand("perturb", "Build a benchmark CSV + manifest with privileged columns");
  perturb_cmd->add_option("csv", perturb.csv, "CSV of observations")->required()->check(CLI::ExistingFile);
  perturb_cmd->add_option("--p", perturb.p, "Perturbed columns (subset protocol)")->capture_default_str();
  perturb_cmd->add_option("--gamma", perturb.gamma, "Fraction of candidate columns made privileged")
      ->capture_default_str();
  perturb_cmd->add_option("--fraction", perturb.fraction, "Fraction of rows made anomalous")->capture_default_str();
  perturb_cmd->add_option("--seed", perturb.seed, "Seed")->capture_default_str();
  perturb_cmd->add_option("--protocol", perturb.protocol, "subset or noise")
      ->check(CLI::IsMember({"subset", "noise"}))
      ->capture_default_str();
  perturb_cmd->add_option("--label", perturb.label_column, "Ground-truth label column");
  perturb_cmd->add_option("-o,--output", perturb.output, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a detector");
  train_cmd->add_option("--kind", train.kind, "if, if-star, ft, spi-lite or spi")
      ->required()
      ->check(CLI::IsMember({"if", "if-star", "ft", "spi-lite", "spi"}));
  train_cmd->add_option("--manifest", train.manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  add_detector_flags(*train_cmd, train.options, train.ranker, train.bandwidth);
  train_cmd->add_option("-o,--output", train.output, "Model file")->required();

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score rows with a trained detector");
  score_cmd->add_option("--model", score.model, "Model file")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--manifest", score.manifest, "Test manifest")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--kind", score.kind, "Expected detector kind");
  score_cmd->add_option("-o,--output", score.output, "Scores CSV")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Ranking metrics for a scores file");
  eval_cmd->add_option("--scores", eval.scores, "Scores CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--labels", eval.labels, "CSV with a 0/1 label column")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--label-column", eval.label_column, "Label column name")->capture_default_str();
  eval_cmd->add_option("--k", eval.k, "Cutoff for ndcg@k and precision@k")->capture_default_str();
  eval_cmd->add_option("-o,--output", eval.output, "Metrics JSON")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run a multi-dataset benchmark");
  bench_cmd->add_option("--config", bench.config, "bench.json")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("-o,--output", bench.output, "Report directory")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*perturb_cmd) run_perturb(perturb, out);
    if (*train_cmd) run_train(train, out);
    if (*score_cmd) run_score(score, out);
    if (*eval_cmd) run_eval(eval, out);
    if (*bench_cmd) run_bench(bench, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace spi
