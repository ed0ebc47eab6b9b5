#pragma once

#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace sparseoc {

/// Runs body(i) for i in [0, n) on a static block partition. Each index must
/// write only to its own output slots; under that contract the result is
/// bitwise independent of the thread count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& body, unsigned num_threads = 0) {
  if (num_threads == 0) num_threads = std::thread::hardware_concurrency();
  if (num_threads <= 1 || n < 2048) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto workers = static_cast<std::int64_t>(num_threads);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) {
    const std::int64_t begin = n * w / workers;
    const std::int64_t end = n * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        for (std::int64_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace sparseoc
