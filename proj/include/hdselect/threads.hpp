#pragma once
#include <cstddef>
#include <functional>

namespace hdselect {

// Worker count for a parallel section: the requested count (0 = hardware
// concurrency) capped by the HDSELECT_THREADS environment variable.
std::size_t worker_count(std::size_t requested);

// Run body(i) for i in [0, n) across at most `workers` threads. Work is
// split into contiguous index blocks, so any reduction the caller performs
// afterwards over preallocated slots is scheduling-independent.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace hdselect
