#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fastgan {

// Intra-op thread count; FASTGAN_THREADS caps it (default: hardware).
int thread_count();
void set_thread_count(int n);

// Static partition of [0, n) over thread_count() threads. Each index runs on
// exactly one thread, so per-index work is deterministic.
template <typename F>
void parallel_for(std::int64_t n, F&& f) {
#ifdef _OPENMP
  const int threads = thread_count();
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
#endif
  for (std::int64_t i = 0; i < n; ++i) f(i);
}

}  // namespace fastgan
