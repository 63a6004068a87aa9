#pragma once

// Versioned JSON persistence for trained detectors. Reals are written in
// shortest round-trip form, so save -> load -> save is byte-identical and a
// loaded model scores exactly like the original.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "spi/pipeline.hpp"

namespace spi {

inline constexpr int kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  enum class Reason { kTruncated, kMalformed, kUnsupportedVersion };

  ModelFormatError(Reason reason, const std::string& message)
      : std::runtime_error(message), reason_(reason) {}

  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

nlohmann::json model_to_json(const TrainedDetector& model);
TrainedDetector model_from_json(const nlohmann::json& doc);

std::string serialize_model(const TrainedDetector& model);
TrainedDetector parse_model(const std::string& text);

void save_model(const TrainedDetector& model, const std::filesystem::path& path);
TrainedDetector load_model(const std::filesystem::path& path);

}  // namespace spi
