#pragma once

#include <cstddef>
#include <functional>

namespace mctm {

/// Worker count from MCTM_THREADS (default 1). Results never depend on it.
int configured_threads();

/// Runs task(i) for i in [0, n) on up to `threads` workers. Each task must
/// write only to its own output slot; the caller combines slots in index
/// order, which keeps reductions bit-stable across thread counts. The first
/// exception thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task, int threads = 0);

}  // namespace mctm
