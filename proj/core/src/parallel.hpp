#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pwrgram::detail {

// Runs body(begin, end) over [0, count) in fixed-size chunks pulled from a
// shared counter. The first exception thrown by any worker stops the others
// and is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body, std::size_t chunk = 256) {
  if (count == 0) return;
  threads = std::max(1u, threads);
  if (threads == 1 || count <= chunk) {
    body(std::size_t{0}, count);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  const auto worker = [&] {
    try {
      while (!failed.load(std::memory_order_relaxed)) {
        const std::size_t begin = next.fetch_add(chunk);
        if (begin >= count) break;
        body(begin, std::min(count, begin + chunk));
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      failed = true;
    }
  };

  std::vector<std::jthread> pool;
  const unsigned spawn = static_cast<unsigned>(
      std::min<std::size_t>(threads, (count + chunk - 1) / chunk));
  pool.reserve(spawn - 1);
  for (unsigned t = 1; t < spawn; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace pwrgram::detail
