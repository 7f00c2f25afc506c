#pragma once

#include <algorithm>
#include <cstddef>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace flatsplat {

// Pixel blocks have a fixed size so that any per-block partial result, and the
// in-order reduction over blocks, is identical for every thread count.
inline constexpr std::size_t kPixelBlock = 16;

inline std::size_t block_count(std::size_t n) { return (n + kPixelBlock - 1) / kPixelBlock; }

// Calls fn(block, begin, end) for every pixel block. Blocks may run concurrently.
template <typename Fn>
void for_each_block(std::size_t n, int threads, Fn&& fn) {
  const std::size_t blocks = block_count(n);
  auto body = [&](std::size_t b) { fn(b, b * kPixelBlock, std::min(n, (b + 1) * kPixelBlock)); };
  if (threads <= 1 || blocks <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) body(b);
    return;
  }
  tbb::task_arena arena(threads);
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, blocks, 1),
                      [&](const tbb::blocked_range<std::size_t>& r) {
                        for (std::size_t b = r.begin(); b != r.end(); ++b) body(b);
                      });
  });
}

}  // namespace flatsplat
