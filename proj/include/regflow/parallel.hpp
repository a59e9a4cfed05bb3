#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace regflow {

/// Worker count from REGFLOW_JOBS, falling back to the hardware concurrency.
[[nodiscard]] inline int default_jobs() {
  if (const char* env = std::getenv("REGFLOW_JOBS"); env != nullptr && *env != '\0') {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each index is
/// processed exactly once; results must be written to per-index slots. The
/// first exception thrown by any task is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::int64_t count, int jobs, Fn&& fn) {
  if (count <= 0) return;
  const auto workers = static_cast<std::int64_t>(std::clamp<std::int64_t>(jobs, 1, count));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::int64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (std::int64_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace regflow
