#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace mmselab {

enum class Execution { Serial, Parallel };

/// Reference loop: f(0), f(1), ... in order.
template <class F>
auto serial_map(std::size_t count, F&& f) -> std::vector<decltype(f(std::size_t{0}))> {
  std::vector<decltype(f(std::size_t{0}))> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(f(i));
  return out;
}

/// OpenMP version of serial_map. Each result lands in its own slot, so the
/// output is identical to serial_map whatever the worker count, provided
/// f(i) depends only on i. The lowest-index exception, if any, is rethrown
/// after the loop.
template <class F>
auto parallel_map(std::size_t count, int workers, F&& f) -> std::vector<decltype(f(std::size_t{0}))> {
  using T = decltype(f(std::size_t{0}));
  if (workers <= 1 || count <= 1) return serial_map(count, f);
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  const long long n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace mmselab
