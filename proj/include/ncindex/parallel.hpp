#pragma once

// Index-parallel loops over independent scenarios. NCINDEX_THREADS caps the
// number of worker threads (default: hardware concurrency).

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ncindex {

inline int worker_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("NCINDEX_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0) n = n > 0 ? std::min(n, cap) : cap;
    } catch (const std::exception&) {
    }
  }
  return std::max(1, n);
}

/// Runs body(i) for i in [0, count); the first exception is rethrown.
inline void parallel_for(int count, const std::function<void(int)>& body) {
  const int threads = std::min(worker_threads(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ncindex
