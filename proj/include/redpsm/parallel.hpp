#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace redpsm {

/// Worker cap: RPSM_THREADS if set and positive, otherwise hardware concurrency.
std::size_t max_threads();

/// Runs fn(i) for i in [0, count). Every index is handled by exactly one worker,
/// so results are independent of the thread count as long as fn(i) only writes
/// to slot i.
template <class Fn>
void parallel_for(std::ptrdiff_t count, Fn&& fn) {
  if (count <= 0) return;
  const auto workers = static_cast<std::ptrdiff_t>(
      std::min<std::size_t>(max_threads(), static_cast<std::size_t>(count)));
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (std::ptrdiff_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::ptrdiff_t i = w; i < count; i += workers) fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace redpsm
