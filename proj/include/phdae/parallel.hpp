#pragma once

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace phdae {

/// Sampling kernels run either serially (the reference used by tests and
/// the benchmark baseline) or OpenMP-parallel. Results are stored per
/// index, so both modes produce identical output.
enum class RunMode { serial, parallel };

/// Apply fn(i) for i in [0, count). Exceptions thrown by workers are
/// captured and rethrown after the loop (first one wins).
template <typename Fn>
void for_each_index(int count, RunMode mode, Fn&& fn) {
  if (mode == RunMode::serial) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace phdae
