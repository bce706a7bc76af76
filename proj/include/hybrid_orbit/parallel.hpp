#pragma once

#include <cstddef>
#include <functional>

namespace hybrid_orbit {

// Thread cap from HYBRID_ORBIT_THREADS, else the hardware concurrency
// (at least 1).
unsigned worker_count();

// Calls body(i) for i in [0, n) on up to worker_count() threads. The first
// exception by index is rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hybrid_orbit
