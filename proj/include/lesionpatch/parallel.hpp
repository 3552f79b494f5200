#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lesionpatch {

/// Calls fn(index, worker) for every index in [0, count) on up to `threads`
/// workers, handing out indices dynamically. Results must be written to
/// index-addressed storage; the first exception thrown by any call is
/// rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(
      std::clamp<std::size_t>(count, 1, std::max(1u, threads)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < count; i = next++) fn(i, w);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Number of workers actually used by parallel_for for `count` items.
inline unsigned worker_count(std::size_t count, unsigned threads) {
  return static_cast<unsigned>(
      std::clamp<std::size_t>(count, 1, std::max(1u, threads)));
}

}  // namespace lesionpatch
