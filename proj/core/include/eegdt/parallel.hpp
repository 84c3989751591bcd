#pragma once

#include <cstddef>
#include <functional>

namespace eegdt {

// Worker count: hardware concurrency, capped by the SDF_THREADS environment
// variable when set to a positive integer.
size_t worker_count();

// Runs fn(i) for i in [0, n). Each index must write only to its own output
// slot; callers reduce the slots in index order, so results do not depend on
// the number of workers.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace eegdt
