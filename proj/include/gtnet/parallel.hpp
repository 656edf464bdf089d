#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace gtnet {

// Calls fn(k) for k in [0, n), strided across `jobs` threads. Results must be
// written to per-index slots so the outcome does not depend on jobs.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&fn, w, workers, n] {
      for (std::size_t k = w; k < n; k += workers) fn(k);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gtnet
