#pragma once
#include <cstddef>
#include <functional>

namespace lanp {

// Worker count: LANP_THREADS when set (>=1), else hardware concurrency.
int thread_count();

// Runs fn(begin, end) over contiguous chunks of [0, n) on up to `threads`
// std::threads (fn runs inline when one chunk suffices). Chunk boundaries
// depend only on (n, threads), so results assembled per-index stay
// deterministic regardless of scheduling.
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace lanp
