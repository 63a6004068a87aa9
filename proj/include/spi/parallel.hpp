#pragma once

#include <cstddef>
#include <functional>

namespace spi {

// Worker count: SPI_THREADS if set to a positive integer, otherwise the
// hardware concurrency.
std::size_t worker_count();

// Calls fn(i) for every i in [0, count). Work is split into contiguous
// chunks; the first exception thrown by any worker is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace spi
