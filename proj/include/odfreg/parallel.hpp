#pragma once

#include <cstdint>
#include <functional>

namespace odf {

// Process-wide worker budget.  Resolution order: explicit set_max_threads()
// call, then the ODFREG_THREADS environment variable, then
// hardware_concurrency().  A value of 1 disables thread spawning entirely.
void set_max_threads(int n);
int max_threads();

// Runs fn(begin, end) over a partition of [0, n).  Results must be written
// to disjoint slots: reductions are the caller's job (map into a buffer,
// then sum serially) so that output bits never depend on the thread count.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace odf
