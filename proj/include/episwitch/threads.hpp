#pragma once

#include <cstddef>
#include <functional>

namespace episwitch {

// Worker count: EPISWITCH_THREADS caps it, 0 or unset means auto.
std::size_t worker_count();

// Runs fn(i) for i in [0, n).  Work is split into fixed-size blocks assigned
// round-robin, so each index is processed exactly once and results written to
// per-index slots are identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace episwitch
