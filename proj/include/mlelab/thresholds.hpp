#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace mlelab {

struct BoundCurve {
  std::string label;
  std::vector<double> rho;  // linear, increasing
  std::vector<double> mse;  // s^2

  void validate() const {
    require(!rho.empty(), ErrorKind::argument, "empty SNR grid");
    require(rho.size() == mse.size(), ErrorKind::argument, "curve '" + label + "' has mismatched lengths");
    for (std::size_t i = 0; i < rho.size(); ++i) {
      require(rho[i] > 0.0 && mse[i] > 0.0 && std::isfinite(mse[i]), ErrorKind::argument,
              "curve '" + label + "' needs positive SNR and MSE values");
      if (i) require(rho[i] > rho[i - 1], ErrorKind::argument, "curve '" + label + "' SNR grid must increase");
    }
  }
};

struct ThresholdAlphas {
  double pr = 0.5;
  double as = 1.1;
  double am1 = 2.0;
  double am2 = 0.5;
};

struct Thresholds {
  double rho_pr_db = 0.0;
  double rho_as_db = 0.0;
  std::optional<double> rho_am1_db;
  std::optional<double> rho_am2_db;
  ThresholdAlphas alphas;
};

enum class Crossing { first, last };

/// SNR (dB) where log e(rho) crosses log(target(rho)) downwards, by
/// bracketing on the grid and linear interpolation in dB. A curve that
/// starts below its target (saturation near the maximum MSE keeps e under a
/// fast-growing target at low SNR) is not counted as crossed there; only a
/// curve with no downward crossing that sits at or below the target from
/// the first grid point gets that point as its threshold.
inline std::optional<double> find_crossing(const std::vector<double>& rho, const std::vector<double>& e,
                                           const std::vector<double>& target, Crossing which) {
  const std::size_t n = rho.size();
  std::vector<double> g(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = std::log(e[i]) - std::log(target[i]);
    x[i] = linear_to_db(rho[i]);
  }
  std::optional<double> found;
  for (std::size_t i = 1; i < n; ++i) {
    if (g[i - 1] > 0.0 && g[i] <= 0.0) {
      const double t = g[i - 1] / (g[i - 1] - g[i]);
      const double xc = x[i - 1] + t * (x[i] - x[i - 1]);
      if (which == Crossing::first) return xc;
      found = xc;
    }
  }
  if (!found && g[0] <= 0.0) found = x[0];
  return found;
}

inline std::vector<double> median3_log(const std::vector<double>& v) {
  std::vector<double> out(v);
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    double a = v[i - 1], b = v[i], c = v[i + 1];
    out[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
  }
  return out;
}

struct ThresholdOptions {
  ThresholdAlphas alphas;
  bool ambiguity = false;      // also extract the begin/end-ambiguity thresholds
  bool median_filter = false;  // 3-point median before crossing search
  bool check_span = true;      // require the curve to cover both regimes
};

/// A priori, asymptotic and (optionally) ambiguity thresholds of a curve.
/// `c` and `c_e` are the CRLB and envelope CRLB on the same grid.
inline Thresholds extract_thresholds(const BoundCurve& curve, const std::vector<double>& c,
                                     const std::vector<double>& c_e, double e_u, const ThresholdOptions& opt = {}) {
  curve.validate();
  const std::size_t n = curve.rho.size();
  require(c.size() == n, ErrorKind::argument, "CRLB grid does not match the curve");
  require(!opt.ambiguity || c_e.size() == n, ErrorKind::argument, "envelope CRLB grid does not match the curve");
  require(e_u > 0.0, ErrorKind::argument, "maximum MSE must be > 0");
  const auto& a = opt.alphas;
  const auto e = opt.median_filter ? median3_log(curve.mse) : curve.mse;
  if (opt.check_span) {
    require(e.front() > a.pr * e_u * 0.9, ErrorKind::argument,
            "curve '" + curve.label + "' does not start in the a priori region");
    require(e.back() < a.as * c.back() * 1.5, ErrorKind::argument,
            "curve '" + curve.label + "' does not reach the asymptotic region");
  }
  auto scaled = [&](const std::vector<double>& v, double k) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = k * v[i];
    return out;
  };
  auto need = [&](std::optional<double> v, const char* name) {
    if (!v) fail(ErrorKind::range, std::string("no crossing found for ") + name + " on curve '" + curve.label + "'");
    return *v;
  };

  Thresholds t;
  t.alphas = a;
  t.rho_pr_db = need(find_crossing(curve.rho, e, std::vector<double>(n, a.pr * e_u), Crossing::first), "rho_pr");
  t.rho_as_db = need(find_crossing(curve.rho, e, scaled(c, a.as), Crossing::last), "rho_as");
  if (opt.ambiguity) {
    t.rho_am1_db = need(find_crossing(curve.rho, e, scaled(c_e, a.am1), Crossing::first), "rho_am1");
    t.rho_am2_db = need(find_crossing(curve.rho, e, scaled(c_e, a.am2), Crossing::last), "rho_am2");
  }
  return t;
}

}  // namespace mlelab
