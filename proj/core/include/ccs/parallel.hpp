#pragma once

#include <cstdint>
#include <functional>

namespace ccs {

// Global worker-count cap (CLI --threads). 0 restores the hardware default.
void set_max_threads(int n);
int max_threads();

// Runs body(begin, end) over [0, n) split into blocks of at most `grain`
// items. The block layout depends only on (n, grain), never on the thread
// count, so any computation whose blocks write disjoint outputs is
// bit-reproducible across machines with different core counts.
void parallel_for(std::int64_t n, std::int64_t grain,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace ccs
