#pragma once

#include <cstddef>
#include <functional>

namespace meshseq {

// Worker count: MESHSEQ_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
unsigned thread_count();

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
// write results into slots owned by i so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace meshseq
