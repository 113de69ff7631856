#pragma once

#include <cstddef>
#include <functional>

namespace fvp {

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware concurrency).
/// Each index is executed exactly once; callers store per-index results and reduce them
/// in index order, so results do not depend on the worker count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

int resolve_threads(int threads);

}  // namespace fvp
