#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace popnet {

/// Worker count from `requested`, falling back to hardware concurrency.
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n). Tasks are pulled from a shared counter; each
/// task must write only to its own output slot. The first exception thrown
/// by any task is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace popnet
