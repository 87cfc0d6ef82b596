#pragma once

#include <cstddef>
#include <functional>

namespace repgeo {

// Worker count: REPGEO_THREADS if set and positive, else hardware concurrency.
std::size_t default_thread_count();

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is claimed from
// a shared counter, so callers must make fn(i) depend only on i. The first
// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t threads = 0);

}  // namespace repgeo
