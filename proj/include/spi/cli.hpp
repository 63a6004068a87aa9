#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 numeric failure.

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "spi/bench.hpp"

namespace spi {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchSetup {
  BenchConfig config;
  std::vector<BenchSource> sources;
};

// Reads a bench.json document; dataset paths resolve against its directory.
BenchSetup load_bench_config(const std::filesystem::path& path);

}  // namespace spi
