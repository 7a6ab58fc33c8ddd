// SPDX-License-Identifier: Apache-2.0
/**
 * @file   parallel.hpp
 * @brief  Static contiguous-chunk parallel loop. Each index is visited by
 *         exactly one thread; results must be written to per-index slots.
 */

#ifndef MVLSTM_PARALLEL_HPP
#define MVLSTM_PARALLEL_HPP

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mvlstm::detail {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn &&fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(count, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i)
          fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto &t : pool)
    t.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace mvlstm::detail

#endif // MVLSTM_PARALLEL_HPP
