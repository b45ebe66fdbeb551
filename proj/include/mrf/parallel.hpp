#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mrf {

namespace detail {
inline std::atomic<int> &thread_setting() {
  static std::atomic<int> n{0};
  return n;
}
} // namespace detail

/// Thread count used by parallel_for when none is given. Resolution order:
/// explicit set_default_threads, then MRF_THREADS, then 1.
inline int default_threads() {
  int n = detail::thread_setting().load();
  if (n > 0)
    return n;
  if (const char *env = std::getenv("MRF_THREADS")) {
    try {
      n = std::stoi(env);
    } catch (...) {
      n = 0;
    }
  }
  return n > 0 ? n : 1;
}

inline void set_default_threads(int n) { detail::thread_setting().store(std::max(n, 0)); }

/// Runs fn(i) for i in [0, n). Work items must write only to their own
/// output slots; the partition never affects results.
template <typename Fn>
void parallel_for(long n, Fn &&fn, int threads = 0) {
  if (threads <= 0)
    threads = default_threads();
  threads = static_cast<int>(std::min<long>(threads, n));
  if (threads <= 1) {
    for (long i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure)
            failure = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto &t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace mrf
