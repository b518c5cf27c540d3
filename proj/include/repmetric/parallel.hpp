#pragma once

#include <cstddef>
#include <functional>

namespace repmetric {

// Worker cap: min(hardware threads, REPMETRIC_THREADS when set). At least 1.
int worker_count();

// Static range partition across workers; every chunk writes disjoint
// output, so results do not depend on scheduling. Exceptions from workers
// are rethrown on the caller thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn);

}  // namespace repmetric
