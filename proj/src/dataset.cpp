#include "spi/dataset.hpp"

#include <set>

#include "spi/csv.hpp"
#include "spi/error.hpp"

namespace spi {

namespace {

using json = nlohmann::json;

std::vector<std::string> string_list(const json& doc, const char* key) {
  std::vector<std::string> out;
  if (!doc.contains(key) || doc[key].is_null()) return out;
  if (!doc[key].is_array()) throw DataError(std::string("manifest field '") + key + "' must be a list");
  for (const auto& item : doc[key]) {
    if (!item.is_string()) throw DataError(std::string("manifest field '") + key + "' must hold names");
    out.push_back(item.get<std::string>());
  }
  return out;
}

Matrix gather(const CsvTable& table, const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& name : names) idx.push_back(column_index(table, name));
  Matrix out(static_cast<Index>(table.rows.size()), static_cast<Index>(names.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < idx.size(); ++c) {
      out(static_cast<Index>(r), static_cast<Index>(c)) =
          parse_real(table.rows[r][idx[c]], r + 1, names[c]);
    }
  }
  return out;
}

std::vector<int> parse_labels(const CsvTable& table, const std::string& column) {
  const std::size_t idx = column_index(table, column);
  std::vector<int> labels;
  labels.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double v = parse_real(table.rows[r][idx], r + 1, column);
    if (v != 0.0 && v != 1.0) {
      throw DataError("label at row " + std::to_string(r + 1) + " must be 0 or 1");
    }
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

}  // namespace

DatasetManifest manifest_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw DataError("manifest must be a JSON object");
  if (!doc.contains("csv_path") || !doc["csv_path"].is_string()) {
    throw DataError("manifest is missing 'csv_path'");
  }
  DatasetManifest m;
  const std::filesystem::path csv = doc["csv_path"].get<std::string>();
  m.csv_path = csv.is_absolute() ? csv : base_dir / csv;
  if (doc.contains("label_column") && !doc["label_column"].is_null()) {
    if (!doc["label_column"].is_string()) throw DataError("manifest 'label_column' must be a name");
    m.label_column = doc["label_column"].get<std::string>();
  }
  m.privileged_columns = string_list(doc, "privileged_columns");
  m.primary_columns = string_list(doc, "primary_columns");
  const std::set<std::string> primary(m.primary_columns.begin(), m.primary_columns.end());
  for (const auto& name : m.privileged_columns) {
    if (primary.count(name)) {
      throw DataError("column '" + name + "' is listed as both primary and privileged");
    }
  }
  return m;
}

json manifest_to_json(const DatasetManifest& manifest) {
  json doc;
  doc["csv_path"] = manifest.csv_path.generic_string();
  doc["label_column"] = manifest.label_column ? json(*manifest.label_column) : json(nullptr);
  doc["primary_columns"] = manifest.primary_columns;
  doc["privileged_columns"] = manifest.privileged_columns;
  return doc;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(doc, path.parent_path());
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_text_file(path, manifest_to_json(manifest).dump(2) + "\n");
}

LoadedData load_csv(const DatasetManifest& manifest) {
  const CsvTable table = read_csv(manifest.csv_path);
  if (table.rows.empty()) throw DataError("empty file: no data rows in " + manifest.csv_path.string());
  LoadedData out;
  out.x = gather(table, manifest.primary_columns);
  if (!manifest.privileged_columns.empty()) out.x_star = gather(table, manifest.privileged_columns);
  if (manifest.label_column) out.labels = parse_labels(table, *manifest.label_column);
  return out;
}

std::vector<int> read_labels(const std::filesystem::path& path, const std::string& column) {
  return parse_labels(read_csv(path), column);
}

}  // namespace spi
