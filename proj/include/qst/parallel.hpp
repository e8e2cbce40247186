#pragma once

#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace qst {

// Static-partition parallel map over [0, n). Output written through f
// must go to per-index slots; the partition (and therefore the result)
// does not depend on the thread count. The first worker exception is
// rethrown on the calling thread.
template <typename F>
void parallel_for(int64_t n, int threads, F&& f) {
  if (threads < 1) threads = 1;
  if (threads == 1 || n < 2) {
    for (int64_t i = 0; i < n; ++i) f(i);
    return;
  }
  const int n_workers = static_cast<int>(std::min<int64_t>(threads, n));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    const int64_t begin = n * w / n_workers;
    const int64_t end = n * (w + 1) / n_workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        for (int64_t i = begin; i < end; ++i) f(i);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qst
