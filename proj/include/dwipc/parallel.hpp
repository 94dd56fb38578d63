#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dwipc {

/// Worker cap shared by every data-parallel stage. 0 means hardware concurrency.
struct Exec {
  unsigned jobs = 1;

  unsigned workers(std::size_t items) const {
    unsigned n = jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : jobs;
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(items, 1)));
  }
};

/// Calls fn(i) for i in [0, count). Each index writes only its own output, so the
/// result does not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t count, const Exec& exec, Fn&& fn) {
  const unsigned workers = exec.workers(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dwipc
