#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "common.hpp"

namespace mlelab::detail {

// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Forward real-to-complex transform of `x` (length n); returns n/2+1 bins.
inline std::vector<std::complex<double>> rfft(std::vector<double> x) {
  const int n = static_cast<int>(x.size());
  require(n >= 2, ErrorKind::argument, "rfft needs at least two samples");
  std::vector<std::complex<double>> out(static_cast<std::size_t>(n / 2 + 1));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, x.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  require(plan != nullptr, ErrorKind::resource, "fftw could not create an r2c plan");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

/// Inverse of rfft for a signal of length n, normalized so irfft(rfft(x)) == x.
inline std::vector<double> irfft(std::vector<std::complex<double>> spec, std::size_t n) {
  require(spec.size() == n / 2 + 1, ErrorKind::argument, "irfft size mismatch");
  std::vector<double> out(n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(spec.data()),
                                out.data(), FFTW_ESTIMATE);
  }
  require(plan != nullptr, ErrorKind::resource, "fftw could not create a c2r plan");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= inv;
  return out;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace mlelab::detail
