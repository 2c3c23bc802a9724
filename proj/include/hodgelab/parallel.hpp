#pragma once

// Index-parallel loops with deterministic results: each index writes its own
// slot, and the first failure (by index, not by time) is rethrown.

#include <cstddef>
#include <functional>

namespace hodgelab {

/// Run body(i) for i in [0, count) on up to `workers` threads (workers <= 1: serial).
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace hodgelab
