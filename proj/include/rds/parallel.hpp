#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace rds {

/// Static-partition parallel loop. Work item i always runs inside the same
/// contiguous chunk regardless of worker count, and results are expected to
/// be written to preassigned slots, so output is identical for any `workers`.
inline void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int w = static_cast<int>(std::min<int64_t>(workers, n));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (int t = 0; t < w; ++t) {
    const int64_t lo = n * t / w;
    const int64_t hi = n * (t + 1) / w;
    pool.emplace_back([&, lo, hi, t] {
      try {
        for (int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace rds
