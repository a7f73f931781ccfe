// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_CONCURRENCY_HPP
#define DPA_CONCURRENCY_HPP

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dpa {

/// Counting semaphore bounding in-flight remote calls.
class Semaphore {
 public:
  explicit Semaphore(std::size_t slots) : slots_(slots) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      ++slots_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t slots_;
};

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(Semaphore& s) : sem_(s) { sem_.acquire(); }
  ~SemaphoreGuard() { sem_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  Semaphore& sem_;
};

/// Applies `fn` to indices [0, n) on `workers` threads. Results land in a
/// pre-sized vector by index, so the output is identical regardless of
/// scheduling. The first exception is rethrown after all threads join.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<Result> results(n);
  if (n == 0) return results;
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  std::vector<std::thread> threads;
  const std::size_t spawn = workers < n ? workers : n;
  threads.reserve(spawn);
  for (std::size_t t = 0; t < spawn; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace dpa

#endif  // DPA_CONCURRENCY_HPP
