#pragma once

// Minimal RFC-4180 reading and writing: header row required, quoted fields
// with doubled quotes, no embedded newlines inside fields.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace spi {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

// Throws DataError "column not found: <name>".
std::size_t column_index(const CsvTable& table, std::string_view name);

// row is the 1-based data row, for messages.
double parse_real(std::string_view cell, std::size_t row, std::string_view column);

// Shortest decimal form that reads back to the same double.
std::string format_real(double v);

std::string csv_field(std::string_view field);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace spi
