#pragma once

#include <cstddef>
#include <functional>

namespace difftomo {

/// Thread count used when a caller passes 0: DIFFTOMO_THREADS if set and
/// positive, otherwise std::thread::hardware_concurrency() (at least 1).
std::size_t default_thread_count();

/// Calls fn(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Work items must be independent. The first exception thrown by any item is
/// rethrown on the calling thread after all workers have stopped.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace difftomo
