#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace spi {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent stream seeds from a master
// seed and a key path, so that results never depend on construction order.
std::uint64_t mix_seed(std::uint64_t state, std::uint64_t key);

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

// Uniform draw in [0, 1) with 53 bits of resolution.
double uniform01(Rng& rng);

// Uniform draw strictly inside (lo, hi); requires lo < hi.
double uniform_open(Rng& rng, double lo, double hi);

// Uniform integer in [0, n); requires n > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

double standard_normal(Rng& rng);

// FNV-1a, for keying streams by names.
std::uint64_t hash_name(std::string_view name);

}  // namespace spi
