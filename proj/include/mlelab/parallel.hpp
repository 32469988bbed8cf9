#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace mlelab {

/// Worker count from MLE_LAB_THREADS, else the hardware concurrency.
inline int worker_threads() {
  if (const char* s = std::getenv("MLE_LAB_THREADS")) {
    try {
      const int n = std::stoi(s);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

/// Runs f(i) for i in [0, n) on up to `threads` workers with a static
/// interleaved schedule. Results must be written by index; the first failure
/// (lowest index) is rethrown.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  if (n == 0) return;
  const std::size_t nth = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n));
  std::vector<std::exception_ptr> errs(n);
  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < n; i += nth) {
      try {
        f(i);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  if (nth == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < nth; ++k) pool.emplace_back(work, k);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

}  // namespace mlelab
