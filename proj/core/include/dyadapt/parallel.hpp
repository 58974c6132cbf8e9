#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dyadapt {

//! Worker cap for the engines. 0 means one worker per hardware thread.
struct Parallelism
{
  unsigned threads = 0;

  unsigned resolved() const noexcept
  {
    if (threads != 0)
      return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

//! Runs fn(i) for i in [0, count). Items are claimed dynamically, so fn
//! must write only to storage owned by item i. The first exception thrown by
//! any item is rethrown after all workers have joined.
template<class Fn>
void
parallel_for(std::size_t count, Parallelism par, Fn&& fn)
{
  const unsigned workers =
    static_cast<unsigned>(std::min<std::size_t>(par.resolved(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }

  std::atomic<std::size_t> next{ 0 };
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count)
        return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error)
          error = std::current_exception();
        next.store(count, std::memory_order_relaxed);
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w)
    pool.emplace_back(work);
  work();
  for (auto& t : pool)
    t.join();
  if (error)
    std::rethrow_exception(error);
}

} // namespace dyadapt
