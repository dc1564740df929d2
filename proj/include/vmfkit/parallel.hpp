// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace vmfkit {

// Batch work is split into fixed-size row chunks whose boundaries do not
// depend on the thread count. Partial results indexed by chunk can then be
// reduced in chunk order, making every reduction bit-stable for any number
// of threads.
inline constexpr std::ptrdiff_t kRowChunk = 256;

inline int num_chunks(std::ptrdiff_t n) {
  return static_cast<int>((n + kRowChunk - 1) / kRowChunk);
}

// fn(chunk_index, begin, end) must only write to chunk-owned storage.
inline void for_each_chunk(
    std::ptrdiff_t n, int threads,
    const std::function<void(int, std::ptrdiff_t, std::ptrdiff_t)>& fn) {
  const int chunks = num_chunks(n);
  if (chunks == 0) return;
  auto run = [&](int c) {
    const std::ptrdiff_t begin = static_cast<std::ptrdiff_t>(c) * kRowChunk;
    const std::ptrdiff_t end = std::min<std::ptrdiff_t>(begin + kRowChunk, n);
    fn(c, begin, end);
  };
  if (threads <= 1 || chunks == 1) {
    for (int c = 0; c < chunks; ++c) run(c);
    return;
  }
  std::atomic<int> next{0};
  const int workers = std::min(threads, chunks);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int c = next.fetch_add(1);
        if (c >= chunks) return;
        run(c);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace vmfkit
