#pragma once

#include <cstddef>
#include <functional>

namespace qicvt {

// Worker count: QICVT_THREADS if set (>= 1), else hardware concurrency.
std::size_t thread_count();

// Runs fn(i) for i in [0, n) over contiguous chunks. Callers write results
// into per-index slots so any reduction happens afterwards in index order.
// The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace qicvt
