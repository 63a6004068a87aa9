#include "spi/model_io.hpp"

#include <vector>

#include "spi/csv.hpp"
#include "spi/error.hpp"

namespace spi {

namespace {

using json = nlohmann::json;
using Reason = ModelFormatError::Reason;

[[noreturn]] void malformed(const std::string& what) {
  throw ModelFormatError(Reason::kMalformed, "malformed model document: " + what);
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& doc) {
  if (!doc.is_array()) malformed("expected a list of numbers");
  Vector v(static_cast<Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) malformed("expected a number");
    v[static_cast<Index>(i)] = doc[i].get<double>();
  }
  return v;
}

json forest_to_json(const IsolationForest& forest) {
  json trees = json::array();
  for (const auto& tree : forest.trees) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        nodes.push_back({{"leaf", node.leaf_index}, {"depth", node.depth}, {"count", node.training_count}});
      } else {
        nodes.push_back({{"feature", node.feature},
                         {"split", node.split},
                         {"left", node.left},
                         {"right", node.right},
                         {"depth", node.depth},
                         {"count", node.training_count}});
      }
    }
    trees.push_back({{"sample_size", tree.sample_size}, {"leaf_count", tree.leaf_count}, {"nodes", std::move(nodes)}});
  }
  return {{"tree_count", forest.config.tree_count},
          {"subsample_size", forest.config.subsample_size},
          {"max_depth", forest.config.max_depth},
          {"seed", forest.config.seed},
          {"feature_dim", forest.feature_dim},
          {"trees", std::move(trees)}};
}

void validate_tree(const IsoTree& tree) {
  if (tree.nodes.empty()) malformed("tree without nodes");
  if (tree.sample_size < 1) malformed("tree sample size must be positive");
  std::vector<bool> seen(static_cast<std::size_t>(std::max(tree.leaf_count, 0)), false);
  const auto size = static_cast<std::int32_t>(tree.nodes.size());
  for (std::int32_t id = 0; id < size; ++id) {
    const IsoNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) {
      if (node.leaf_index < 0 || node.leaf_index >= tree.leaf_count ||
          seen[static_cast<std::size_t>(node.leaf_index)]) {
        malformed("leaf indices must be unique and within leaf_count");
      }
      seen[static_cast<std::size_t>(node.leaf_index)] = true;
    } else {
      // Children follow their parent in preorder, which also rules out cycles.
      if (node.feature >= tree.feature_dim || node.left <= id || node.right <= id ||
          node.left >= size || node.right >= size) {
        malformed("internal node with invalid feature or child index");
      }
    }
  }
  for (const bool s : seen) {
    if (!s) malformed("leaf indices are not contiguous");
  }
}

IsolationForest forest_from_json(const json& doc) {
  IsolationForest forest;
  forest.config.tree_count = doc.at("tree_count").get<int>();
  forest.config.subsample_size = doc.at("subsample_size").get<int>();
  forest.config.max_depth = doc.at("max_depth").get<int>();
  forest.config.seed = doc.at("seed").get<std::uint64_t>();
  forest.feature_dim = doc.at("feature_dim").get<std::int32_t>();
  for (const auto& t : doc.at("trees")) {
    IsoTree tree;
    tree.sample_size = t.at("sample_size").get<std::int32_t>();
    tree.leaf_count = t.at("leaf_count").get<std::int32_t>();
    tree.feature_dim = forest.feature_dim;
    for (const auto& n : t.at("nodes")) {
      IsoNode node;
      node.depth = n.at("depth").get<std::int32_t>();
      node.training_count = n.at("count").get<std::int32_t>();
      if (n.contains("leaf")) {
        node.leaf_index = n.at("leaf").get<std::int32_t>();
      } else {
        node.feature = n.at("feature").get<std::int32_t>();
        node.split = n.at("split").get<double>();
        node.left = n.at("left").get<std::int32_t>();
        node.right = n.at("right").get<std::int32_t>();
        if (node.feature < 0) malformed("negative split feature");
      }
      tree.nodes.push_back(node);
    }
    validate_tree(tree);
    forest.trees.push_back(std::move(tree));
  }
  if (static_cast<int>(forest.trees.size()) != forest.config.tree_count) {
    malformed("tree_count does not match the number of trees");
  }
  if (forest.feature_dim < 1) malformed("forest feature_dim must be positive");
  return forest;
}

json regressor_to_json(const RidgeRegressor& r) {
  return {{"weights", vector_to_json(r.weights())}, {"intercept", r.intercept()}, {"lambda", r.lambda()}};
}

RidgeRegressor regressor_from_json(const json& doc) {
  return RidgeRegressor(vector_from_json(doc.at("weights")), doc.at("intercept").get<double>(),
                        doc.at("lambda").get<double>());
}

json regressors_to_json(const std::vector<RidgeRegressor>& regressors) {
  json out = json::array();
  for (const auto& r : regressors) out.push_back(regressor_to_json(r));
  return out;
}

std::vector<RidgeRegressor> regressors_from_json(const json& doc) {
  if (!doc.is_array()) malformed("expected a list of regressors");
  std::vector<RidgeRegressor> out;
  for (const auto& r : doc) out.push_back(regressor_from_json(r));
  return out;
}

json ranker_to_json(const Ranker& ranker) {
  if (const auto* linear = std::get_if<LinearRanker>(&ranker)) {
    return {{"type", "linear"}, {"beta", vector_to_json(linear->beta)}};
  }
  const auto& kernel = std::get<KernelRanker>(ranker);
  json anchors = json::array();
  for (Index l = 0; l < kernel.train_fragments.rows(); ++l) {
    anchors.push_back(vector_to_json(kernel.train_fragments.row(l).transpose()));
  }
  return {{"type", "kernel"},
          {"bandwidth", kernel.kernel.bandwidth},
          {"gamma", vector_to_json(kernel.gamma)},
          {"train_fragments", std::move(anchors)}};
}

Ranker ranker_from_json(const json& doc) {
  const auto type = doc.at("type").get<std::string>();
  if (type == "linear") return LinearRanker{vector_from_json(doc.at("beta"))};
  if (type != "kernel") malformed("unknown ranker type '" + type + "'");
  KernelRanker kernel;
  kernel.kernel.bandwidth = doc.at("bandwidth").get<double>();
  if (!(kernel.kernel.bandwidth > 0.0)) malformed("kernel bandwidth must be positive");
  kernel.gamma = vector_from_json(doc.at("gamma"));
  const json& anchors = doc.at("train_fragments");
  if (!anchors.is_array() || anchors.size() != static_cast<std::size_t>(kernel.gamma.size())) {
    malformed("kernel anchors must match gamma length");
  }
  const Index cols = anchors.empty() ? 0 : static_cast<Index>(anchors[0].size());
  kernel.train_fragments.resize(kernel.gamma.size(), cols);
  for (std::size_t l = 0; l < anchors.size(); ++l) {
    const Vector row = vector_from_json(anchors[l]);
    if (row.size() != cols) malformed("ragged kernel anchors");
    kernel.train_fragments.row(static_cast<Index>(l)) = row.transpose();
  }
  return kernel;
}

json options_to_json(const DetectorOptions& o) {
  return {{"seed", o.seed},
          {"trees", o.trees},
          {"privileged_trees", o.privileged_trees},
          {"subsample_size", o.subsample_size},
          {"max_depth", o.max_depth},
          {"lambda", o.lambda},
          {"ranker", std::string(to_string(o.ranker))},
          {"max_pairs", o.max_pairs},
          {"kernel_bandwidth", o.kernel_bandwidth ? json(*o.kernel_bandwidth) : json(nullptr)},
          {"ft_forest_on_true_privileged", o.ft_forest_on_true_privileged},
          {"optimizer",
           {{"max_iters", o.optimizer.max_iters},
            {"tolerance", o.optimizer.tolerance},
            {"armijo", o.optimizer.armijo},
            {"shrink", o.optimizer.shrink},
            {"kernel_ridge", o.optimizer.kernel_ridge}}}};
}

DetectorOptions options_from_json(const json& doc) {
  DetectorOptions o;
  o.seed = doc.at("seed").get<std::uint64_t>();
  o.trees = doc.at("trees").get<int>();
  o.privileged_trees = doc.at("privileged_trees").get<int>();
  o.subsample_size = doc.at("subsample_size").get<int>();
  o.max_depth = doc.at("max_depth").get<int>();
  o.lambda = doc.at("lambda").get<double>();
  o.ranker = parse_ranker_type(doc.at("ranker").get<std::string>());
  o.max_pairs = doc.at("max_pairs").get<std::size_t>();
  if (!doc.at("kernel_bandwidth").is_null()) o.kernel_bandwidth = doc.at("kernel_bandwidth").get<double>();
  o.ft_forest_on_true_privileged = doc.at("ft_forest_on_true_privileged").get<bool>();
  const json& opt = doc.at("optimizer");
  o.optimizer.max_iters = opt.at("max_iters").get<int>();
  o.optimizer.tolerance = opt.at("tolerance").get<double>();
  o.optimizer.armijo = opt.at("armijo").get<double>();
  o.optimizer.shrink = opt.at("shrink").get<double>();
  o.optimizer.kernel_ridge = opt.at("kernel_ridge").get<double>();
  return o;
}

template <typename T, typename Fn>
json optional_to_json(const std::optional<T>& v, Fn&& fn) {
  return v ? fn(*v) : json(nullptr);
}

template <typename T, typename Fn>
std::optional<T> optional_from_json(const json& doc, const char* key, Fn&& fn) {
  const json& v = doc.at(key);
  if (v.is_null()) return std::nullopt;
  return fn(v);
}

void require(bool ok, const std::string& what) {
  if (!ok) malformed(what);
}

// Checks that the populated components match the kind and agree on sizes, so
// that a loaded model cannot index out of range while scoring.
void validate_model(const TrainedDetector& m) {
  const auto dim = static_cast<std::int32_t>(m.primary_dim);
  switch (m.kind) {
    case DetectorKind::kIf:
      require(m.decision_forest.has_value(), "if model needs decision_forest");
      require(m.decision_forest->feature_dim == dim, "decision_forest dimension mismatch");
      break;
    case DetectorKind::kIfStar:
      require(m.privileged_forest.has_value(), "if-star model needs privileged_forest");
      require(m.privileged_forest->feature_dim == static_cast<std::int32_t>(m.privileged_dim),
              "privileged_forest dimension mismatch");
      break;
    case DetectorKind::kFt:
      require(m.ft_model && m.ft_forest, "ft model needs ft_model and ft_forest");
      require(m.ft_model->input_dim == m.primary_dim, "ft_model input dimension mismatch");
      require(m.ft_forest->feature_dim == static_cast<std::int32_t>(m.ft_model->regressors.size()),
              "ft_forest dimension mismatch");
      for (const auto& r : m.ft_model->regressors) {
        require(r.input_dim() == m.primary_dim, "ft regressor dimension mismatch");
      }
      break;
    case DetectorKind::kSpiLite:
    case DetectorKind::kSpi: {
      require(m.decision_forest.has_value(), "spi model needs decision_forest");
      require(m.decision_forest->feature_dim == dim, "decision_forest dimension mismatch");
      const std::size_t leaves = m.decision_forest->total_leaves();
      if (m.kind == DetectorKind::kSpiLite) {
        require(m.lite_regressor.has_value(), "spi-lite model needs lite_regressor");
        require(m.lite_regressor->input_dim() == leaves, "lite_regressor dimension mismatch");
        break;
      }
      require(m.fragments && m.ranker, "spi model needs fragments and ranker");
      for (const auto& r : m.fragments->regressors) {
        require(r.input_dim() == leaves, "fragment regressor dimension mismatch");
      }
      const auto t_star = static_cast<Index>(m.fragments->regressors.size());
      if (const auto* linear = std::get_if<LinearRanker>(&*m.ranker)) {
        require(linear->beta.size() == t_star, "beta length must equal fragment count");
      } else {
        require(std::get<KernelRanker>(*m.ranker).train_fragments.cols() == t_star,
                "kernel anchors must have one column per fragment");
      }
      break;
    }
  }
}

}  // namespace

json model_to_json(const TrainedDetector& model) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["kind"] = std::string(to_string(model.kind));
  doc["metadata"] = {{"tool", "spi"}, {"tool_version", "0.1.0"}};
  doc["options"] = options_to_json(model.options);
  doc["primary_dim"] = model.primary_dim;
  doc["privileged_dim"] = model.privileged_dim;
  doc["decision_forest"] = optional_to_json(model.decision_forest, forest_to_json);
  doc["privileged_forest"] = optional_to_json(model.privileged_forest, forest_to_json);
  doc["fragments"] = optional_to_json(model.fragments, [](const FragmentSet& f) {
    return regressors_to_json(f.regressors);
  });
  doc["lite_regressor"] = optional_to_json(model.lite_regressor, regressor_to_json);
  doc["ranker"] = optional_to_json(model.ranker, ranker_to_json);
  doc["ft_model"] = optional_to_json(model.ft_model, [](const FeatureTransferModel& ft) {
    return json{{"input_dim", ft.input_dim}, {"regressors", regressors_to_json(ft.regressors)}};
  });
  doc["ft_forest"] = optional_to_json(model.ft_forest, forest_to_json);
  return doc;
}

TrainedDetector model_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("format_version")) malformed("missing format_version");
  if (!doc["format_version"].is_number_integer() || doc["format_version"].get<int>() != kModelFormatVersion) {
    throw ModelFormatError(Reason::kUnsupportedVersion,
                           "unsupported model version: " + doc["format_version"].dump());
  }
  TrainedDetector m;
  try {
    m.kind = parse_detector_kind(doc.at("kind").get<std::string>());
    m.options = options_from_json(doc.at("options"));
    m.primary_dim = doc.at("primary_dim").get<std::size_t>();
    m.privileged_dim = doc.at("privileged_dim").get<std::size_t>();
    m.decision_forest = optional_from_json<IsolationForest>(doc, "decision_forest", forest_from_json);
    m.privileged_forest = optional_from_json<IsolationForest>(doc, "privileged_forest", forest_from_json);
    m.fragments = optional_from_json<FragmentSet>(doc, "fragments", [](const json& f) {
      return FragmentSet{regressors_from_json(f)};
    });
    m.lite_regressor = optional_from_json<RidgeRegressor>(doc, "lite_regressor", regressor_from_json);
    m.ranker = optional_from_json<Ranker>(doc, "ranker", ranker_from_json);
    m.ft_model = optional_from_json<FeatureTransferModel>(doc, "ft_model", [](const json& f) {
      return FeatureTransferModel{regressors_from_json(f.at("regressors")),
                                  f.at("input_dim").get<std::size_t>()};
    });
    m.ft_forest = optional_from_json<IsolationForest>(doc, "ft_forest", forest_from_json);
  } catch (const json::exception& e) {
    malformed(e.what());
  } catch (const UsageError& e) {
    malformed(e.what());
  }
  validate_model(m);
  return m;
}

std::string serialize_model(const TrainedDetector& model) {
  return model_to_json(model).dump(1) + "\n";
}

TrainedDetector parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // The parser reports one past the end when it ran out of input.
    if (e.byte > text.size()) {
      throw ModelFormatError(Reason::kTruncated, "truncated model file: " + std::string(e.what()));
    }
    throw ModelFormatError(Reason::kMalformed, "malformed model document: " + std::string(e.what()));
  }
  return model_from_json(doc);
}

void save_model(const TrainedDetector& model, const std::filesystem::path& path) {
  write_text_file(path, serialize_model(model));
}

TrainedDetector load_model(const std::filesystem::path& path) {
  return parse_model(read_text_file(path));
}

}  // namespace spi
