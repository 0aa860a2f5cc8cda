#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace hamflow {

/// Calls f(lo, hi) on contiguous chunks of [0, n). Chunks are fixed by n and
/// threads alone and results are expected to be written by index, so the
/// output never depends on scheduling. The first exception (by chunk order)
/// is rethrown after all workers finish.
template <class F>
void parallel_chunks(std::size_t n, unsigned threads, F&& f) {
  if (n == 0) return;
  std::size_t t = std::clamp<std::size_t>(threads, 1, n);
  if (t == 1) {
    f(std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (std::size_t k = 0; k < t; ++k)
    pool.emplace_back([&, k] {
      try {
        f(n * k / t, n * (k + 1) / t);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  parallel_chunks(n, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) f(i);
  });
}

}  // namespace hamflow
