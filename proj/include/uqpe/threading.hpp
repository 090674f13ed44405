#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace uqpe {

// Runs fn(i) for i in [0, n). Work is handed out in fixed-size blocks from a
// shared counter, so any i is computed exactly once and writes only to its own
// slot; with ordered reductions downstream, results are identical for every
// thread count (including 1).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads);

unsigned hardware_threads();

}  // namespace uqpe
