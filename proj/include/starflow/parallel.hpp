#pragma once

#include <cstddef>
#include <exception>
#include <limits>

#ifdef STARFLOW_HAVE_OPENMP
#include <omp.h>
#endif

namespace starflow {

/// Sets the worker count used by node-parallel maps. Values < 1 select the
/// runtime maximum.
void set_num_threads(int threads);
int num_threads();
int max_threads();

/// Runs fn(i) for i in [0, n). Each index must write only its own outputs;
/// callers do any summation afterwards in index order. If several indices
/// throw, the exception from the smallest one is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
#ifdef STARFLOW_HAVE_OPENMP
  const auto count = static_cast<long long>(n);
  long long failed = std::numeric_limits<long long>::max();
  std::exception_ptr error;
#pragma omp parallel for schedule(static) num_threads(num_threads()) if (n >= 256)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(starflow_parallel_for)
      if (i < failed) {
        failed = i;
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
#else
  for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace starflow
