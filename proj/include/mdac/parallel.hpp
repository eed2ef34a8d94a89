#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mdac {

/// Thread count from a flag (when > 0), else MDAC_THREADS, else 1.
int resolve_threads(int flag = 0);

/// Calls fn(i) for i in [0, n) on up to `threads` threads. Work is split in
/// contiguous index blocks; the first exception (by index) is rethrown.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace mdac
