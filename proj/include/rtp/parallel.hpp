#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rtp {

inline int resolveThreads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(begin, end, chunk) over contiguous chunks of [0, n).  Chunk
// boundaries depend only on n and the chunk count, never on scheduling.
template <class Fn>
void parallelChunks(std::size_t n, int threads, std::size_t chunks, Fn&& fn) {
  if (n == 0) return;
  chunks = std::max<std::size_t>(1, std::min(chunks, n));
  threads = std::max(1, std::min<int>(threads, static_cast<int>(chunks)));
  auto bounds = [&](std::size_t c) { return std::make_pair(n * c / chunks, n * (c + 1) / chunks); };
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      auto [b, e] = bounds(c);
      fn(b, e, c);
    }
    return;
  }
  std::exception_ptr error;
  std::mutex m;
  std::size_t next = 0;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t c;
        {
          std::lock_guard<std::mutex> lk(m);
          if (next >= chunks || error) return;
          c = next++;
        }
        try {
          auto [b, e] = bounds(c);
          fn(b, e, c);
        } catch (...) {
          std::lock_guard<std::mutex> lk(m);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace rtp
