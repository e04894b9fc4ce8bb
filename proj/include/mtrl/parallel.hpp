#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mtrl::parallel {

inline void set_num_threads(int n_threads) {
#ifdef _OPENMP
  omp_set_num_threads(n_threads);
#else
  (void)n_threads;
#endif
}

inline int get_num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

}  // namespace mtrl::parallel
