#pragma once

#include <cstddef>
#include <functional>

namespace colc {

/// Worker count: COLC_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_count();

/// Splits [0, n) into contiguous chunks and runs `body(begin, end)` on each,
/// one chunk per worker. Results must not depend on the chunking.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace colc
