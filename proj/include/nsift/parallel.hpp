#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nsift {

/// Worker-pool size handed down from the CLI. Results never depend on it:
/// tasks write into preallocated slots and are reduced in index order.
struct ExecutionContext {
  int threads = 1;

  static ExecutionContext hardware() {
    return {std::max(1, static_cast<int>(std::thread::hardware_concurrency()))};
  }
};

template <class Fn>
void parallel_for(const ExecutionContext& ctx, std::size_t count, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, ctx.threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace nsift
