#pragma once

#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace tartan {

// Runs fn(i) for i in [0, n) over `threads` workers using static contiguous
// chunks. Callers write results into pre-sized slots, so output never depends
// on the thread count. The first exception thrown by any worker is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (threads > n) threads = n;
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      const std::size_t begin = t * chunk;
      const std::size_t end = begin + chunk < n ? begin + chunk : n;
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// --threads flag, else TARTAN_THREADS, else 1.
std::size_t resolve_threads(std::optional<std::size_t> flag);

}  // namespace tartan
