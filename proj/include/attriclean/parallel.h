#ifndef ATTRICLEAN_PARALLEL_H
#define ATTRICLEAN_PARALLEL_H

#include <cstddef>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace attriclean::par {

// Global switch between the OpenMP kernels and the plain serial loop.
// Results are bit-identical either way: every parallel construct in this
// project writes disjoint outputs or reduces over a fixed block partition
// that does not depend on the thread count.
inline bool& enabled_ref() {
  static bool enabled = true;
  return enabled;
}

inline void set_enabled(bool e) { enabled_ref() = e; }
inline bool enabled() { return enabled_ref(); }

inline int max_threads() {
#ifdef _OPENMP
  return enabled() ? omp_get_max_threads() : 1;
#else
  return 1;
#endif
}

// fn(i) for i in [0, n). fn must only write state owned by index i.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
#ifdef _OPENMP
  if (enabled() && n > 1) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      fn(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

// Fixed partition of [0, n) into at most max_blocks contiguous ranges.
// The partition depends only on n, never on the thread count, so block-wise
// reductions combined in block order give the same bits at any thread count.
inline std::size_t block_count(std::size_t n, std::size_t max_blocks = 32) {
  if (n == 0) return 0;
  return n < max_blocks ? n : max_blocks;
}

inline std::pair<std::size_t, std::size_t> block_range(std::size_t n,
                                                       std::size_t blocks,
                                                       std::size_t b) {
  std::size_t lo = n * b / blocks;
  std::size_t hi = n * (b + 1) / blocks;
  return {lo, hi};
}

}  // namespace attriclean::par

#endif  // ATTRICLEAN_PARALLEL_H
