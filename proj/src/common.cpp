#include <algorithm>
#include <cstdlib>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "spi/parallel.hpp"
#include "spi/random.hpp"
#include "spi/types.hpp"

namespace spi {

Matrix select_columns(const Matrix& m, std::span<const std::size_t> columns) {
  Matrix out(m.rows(), static_cast<Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out.col(static_cast<Index>(c)) = m.col(static_cast<Index>(columns[c]));
  }
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Index>(r)) = m.row(static_cast<Index>(rows[r]));
  }
  return out;
}

std::uint64_t mix_seed(std::uint64_t state, std::uint64_t key) {
  std::uint64_t z = state + 0x9e3779b97f4a7c15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t state = mix_seed(master, 0x5350495f53454544ULL);
  for (const auto key : keys) state = mix_seed(state, key);
  return state;
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_open(Rng& rng, double lo, double hi) {
  for (;;) {
    const double v = lo + uniform01(rng) * (hi - lo);
    if (v > lo && v < hi) return v;
    // Spans narrower than a few ulps can only yield an endpoint.
    if (std::nextafter(lo, hi) >= hi) return hi;
  }
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Rejection sampling keeps the draw unbiased and platform independent.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
  for (;;) {
    const std::uint64_t v = rng();
    if (v < limit) return static_cast<std::size_t>(v % bound);
  }
}

double standard_normal(Rng& rng) {
  // Box-Muller; avoids the implementation-defined std::normal_distribution.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("SPI_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace {
// Nested parallel_for calls run serially inside a worker.
thread_local bool in_worker = false;
}  // namespace

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = in_worker ? 1 : std::min(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      in_worker = true;
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  threads.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace spi
