#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace svie {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work items are
/// handed out through a shared counter; callers must make fn(i) independent of
/// scheduling (disjoint output slots, per-index RNG streams). The first
/// exception thrown by any item is rethrown after all threads join.
template <typename F>
void parallel_for(int count, int workers, F&& fn) {
  if (count <= 0) return;
  if (workers > count) workers = count;
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

} // namespace svie
