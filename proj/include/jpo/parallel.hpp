#pragma once

#include <cstdint>
#include <cstdlib>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace jpo {

// Every parallel driver in the library has a serial twin selected by this
// flag; both write results into per-iteration slots so outputs are
// bit-identical across modes and thread counts.
enum class ExecMode { serial, parallel };

// Worker count for ExecMode::parallel. JPO_THREADS overrides the OpenMP
// default when set to a positive integer.
inline int max_threads() {
#ifdef _OPENMP
  if (const char* env = std::getenv("JPO_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs body(i) for i in [0, n). Dynamic scheduling: intended for coarse,
// uneven iterations (bootstrap replicates, simulation replications).
template <class Body>
void parallel_for(std::int64_t n, ExecMode mode, Body&& body) {
#ifdef _OPENMP
  if (mode == ExecMode::parallel && max_threads() > 1 && n > 1) {
    const int threads = max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  (void)mode;
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

// Static variant for fine-grained row loops.
template <class Body>
void parallel_for_static(std::int64_t n, ExecMode mode, Body&& body) {
#ifdef _OPENMP
  if (mode == ExecMode::parallel && max_threads() > 1 && n > 1) {
    const int threads = max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  (void)mode;
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace jpo
