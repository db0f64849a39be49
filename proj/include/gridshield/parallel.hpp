#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gridshield {

/// Requested count if nonzero, else $GRIDSHIELD_WORKERS, else the hardware
/// concurrency.
inline std::size_t worker_count(std::size_t requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GRIDSHIELD_WORKERS")) {
    try {
      long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Splits [0, total) into `workers` contiguous chunks and runs
/// body(chunk, begin, end) on each, one thread per chunk. The first exception
/// thrown by any chunk is rethrown on the caller.
template <class Body>
void parallel_chunks(std::size_t total, std::size_t workers, Body&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, total));
  if (workers == 1) {
    body(std::size_t{0}, std::size_t{0}, total);
    return;
  }
  std::exception_ptr failure;
  std::mutex guard;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = total * w / workers;
    const std::size_t end = total * (w + 1) / workers;
    threads.emplace_back([&, w, begin, end] {
      try {
        body(w, begin, end);
      } catch (...) {
        std::lock_guard lock(guard);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace gridshield
