#pragma once

// Dataset manifests: a CSV path plus the column roles used by train/score.
//
//   {
//     "csv_path": "data.csv",            // relative to the manifest file
//     "label_column": "label",           // optional, may be null
//     "primary_columns": ["a", "b"],
//     "privileged_columns": ["c"]
//   }

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spi/types.hpp"

namespace spi {

struct DatasetManifest {
  std::filesystem::path csv_path;
  std::optional<std::string> label_column;
  std::vector<std::string> privileged_columns;
  std::vector<std::string> primary_columns;
};

DatasetManifest manifest_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
nlohmann::json manifest_to_json(const DatasetManifest& manifest);

// Resolves csv_path against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct LoadedData {
  Matrix x;
  // Absent when the manifest lists no privileged columns.
  std::optional<Matrix> x_star;
  std::optional<std::vector<int>> labels;
};

LoadedData load_csv(const DatasetManifest& manifest);

// Reads a 0/1 label column from a CSV.
std::vector<int> read_labels(const std::filesystem::path& path, const std::string& column);

}  // namespace spi
