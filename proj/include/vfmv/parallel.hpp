#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vfmv {

/// Process-wide worker count used by parallel_for (default 1).
inline std::atomic<int>& default_threads() {
  static std::atomic<int> n{1};
  return n;
}

/// Runs fn(i) for i in [0, n). Each index is executed exactly once; callers
/// write results into per-index slots so the outcome is independent of
/// scheduling. The first exception thrown by any task is rethrown.
template <typename Fn>
void parallel_for(int n, Fn&& fn, int threads = 0) {
  if (threads <= 0) threads = default_threads().load();
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace vfmv
