#pragma once

#include <cstddef>
#include <functional>

namespace msc {

// Worker count: MSC_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
int worker_count();

// Calls fn(i) for i in [0, n) across worker_count() threads. Callers write
// results into per-index slots so output does not depend on scheduling.
// The first exception thrown by any fn is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace msc
