#pragma once

#include <cstddef>
#include <exception>

#include <omp.h>

namespace nppc {

/// Runs fn(i) for i in [0, count) on `workers` OpenMP threads. The first
/// exception thrown by any iteration is rethrown after the loop.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  std::exception_ptr error;
  const long long n = static_cast<long long>(count);
  const int threads = workers < 1 ? 1 : workers;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (threads > 1)
  for (long long i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(nppc_parallel_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace nppc
