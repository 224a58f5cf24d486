#pragma once

#include <cstddef>
#include <functional>

namespace camd {

// Worker count from CAMD_THREADS (default 1, clamped to >= 1).
std::size_t worker_count();

// Runs body(begin, end) over contiguous chunks of [0, n). Chunks write disjoint
// outputs, so results never depend on the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t workers = worker_count());

}  // namespace camd
