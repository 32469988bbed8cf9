#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

namespace mlelab {

enum class ErrorKind {
  argument,
  resource,
  numeric,
  model,
  domain,
  range,
  degenerate,
  io,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::resource: return "resource";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::model: return "model";
    case ErrorKind::domain: return "domain";
    case ErrorKind::range: return "range";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every library failure surfaces as this type; `kind()` is stable and
/// machine-readable, `what()` is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool ok, ErrorKind kind, const std::string& msg) {
  if (!ok) fail(kind, msg);
}

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

// Standard normal helpers.
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(two_pi); }

/// Upper-tail probability Q(x) = P{N(0,1) > x}.
inline double q_func(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_cdf(double x) { return q_func(-x); }

/// Inverse of normal_cdf, clamped so that 0 and 1 map to finite values.
inline double normal_quantile(double p) {
  constexpr double lo = 1e-300;
  if (p <= lo) p = lo;
  if (p >= 1.0) return 38.5;
  // erfc_inv keeps full relative accuracy in the lower tail.
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// A priori interval [theta1, theta2] together with the true value theta0.
struct DomainSpec {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta0 = 0.0;

  double width() const { return theta2 - theta1; }
  double uniform_mean() const { return 0.5 * (theta1 + theta2); }
  double uniform_var() const { return width() * width() / 12.0; }
  bool contains(double t) const { return t >= theta1 && t <= theta2; }

  void validate() const {
    require(std::isfinite(theta1) && std::isfinite(theta2) && std::isfinite(theta0),
            ErrorKind::argument, "domain bounds must be finite");
    require(theta1 < theta2, ErrorKind::argument, "domain requires theta1 < theta2");
    require(theta1 <= theta0 && theta0 <= theta2, ErrorKind::argument,
            "true value theta0 must lie inside [theta1, theta2]");
  }
};

/// Uniform grid with n points over [a, b], endpoints included.
inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  const double h = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + h * static_cast<double>(i);
  out.back() = b;
  return out;
}

/// Trapezoid rule on an arbitrary increasing grid.
inline double trapz(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return s;
}

// SplitMix64 step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

}  // namespace mlelab
