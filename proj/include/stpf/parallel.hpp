#pragma once

#include <cstddef>
#include <functional>

namespace stpf {

/// Worker cap. Defaults to STPF_THREADS when set, else the hardware count.
int thread_count();
void set_thread_count(int n);

/// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
/// not depend on the worker count, so per-chunk results are reproducible.
void parallel_for(std::size_t n, std::size_t chunk, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace stpf
