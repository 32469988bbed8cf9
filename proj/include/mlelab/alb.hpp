#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "aub.hpp"
#include "classic_bounds.hpp"
#include "common.hpp"
#include "signal_model.hpp"

namespace mlelab {

/// Density of the ratio variable chi with shape parameters a3, a4.
/// Since q^2 <= a3^2 + a4^2, the exponential factors are paired into one
/// exponent that never overflows.
inline double chi_pdf(double xi, double a3, double a4) {
  const double s = 1.0 + xi * xi;
  const double q = (a3 * xi + a4) / std::sqrt(s);
  const double e0 = 0.5 * (a3 * a3 + a4 * a4);
  const double base = std::exp(-e0);
  const double half_erf = 0.5 * std::erf(q / std::numbers::sqrt2);  // 1/2 - Q(q)
  const double tail = std::sqrt(two_pi) * q * half_erf * std::exp(0.5 * q * q - e0);
  return std::max(0.0, (base + tail) / (pi * s));
}

struct RatioBoundParams {
  double h = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  double a4 = 0.0;
  double sign = 1.0;
};

/// Parameters of the second-order Taylor approximation of the MLE, with
/// alpha = 1 and N0/2 = Es/rho. Correlations below 1e-12 count as zero.
inline RatioBoundParams ratio_params(const NoiseDerivStats& st, const AcrModel& model, double rho) {
  require(rho > 0.0, ErrorKind::argument, "rho must be > 0");
  const double n0h = st.e_s / rho;
  const double sd1 = std::sqrt(n0h * st.e_sdot);
  const double sd2 = std::sqrt(n0h * st.e_sddot);
  const double r2 = model.rs_ddot(0.0);
  const double nu = std::abs(st.nu0) < 1e-12 ? 0.0 : st.nu0;
  RatioBoundParams p;
  p.sign = nu < 0.0 ? -1.0 : 1.0;
  p.h = p.sign * sd1 * std::sqrt(1.0 - nu * nu);
  p.a1 = nu * sd1 / sd2;
  p.a2 = sd2 / p.h;
  p.a3 = r2 * p.a1 / p.h;
  p.a4 = -r2 / sd2;
  return p;
}

struct TaylorBound {
  double mean = 0.0;
  double var = 0.0;
  double mse = 0.0;
  RatioBoundParams params;
};

inline double taylor_pdf(const RatioBoundParams& p, double theta, double theta0) {
  return p.sign * p.a2 * chi_pdf(p.a2 * (theta - theta0 - p.a1), p.a3, p.a4);
}

/// Moments of the Taylor-approximated MLE truncated to the a priori domain
/// (the untruncated ones do not exist).
inline TaylorBound taylor_alb(const NoiseDerivStats& st, const AcrModel& model, const DomainSpec& domain, double rho) {
  domain.validate();
  TaylorBound out;
  out.params = ratio_params(st, model, rho);
  const auto& p = out.params;
  const double th = domain.theta0;
  const double width = 1.0 / std::abs(p.a2 * p.a4);

  // Breakpoints on a geometric ladder keep the adaptive rule on the peak.
  std::vector<double> br{domain.theta1, domain.theta2, th};
  for (double k = 1.0; k < 1e7; k *= 10.0) {
    br.push_back(th - k * width);
    br.push_back(th + k * width);
  }
  std::vector<double> cuts;
  for (double b : br)
    if (b >= domain.theta1 && b <= domain.theta2) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto integrate = [&](auto&& f) {
    double s = 0.0;
    for (std::size_t i = 1; i < cuts.size(); ++i)
      s += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[i - 1], cuts[i], 12, 1e-11);
    return s;
  };
  // Work in lags relative to theta0 to avoid cancellation.
  const double m1 = integrate([&](double t) { return (t - th) * taylor_pdf(p, t, th); });
  const double m2 = integrate([&](double t) { return (t - th) * (t - th) * taylor_pdf(p, t, th); });
  out.mean = th + m1;
  out.var = m2 - m1 * m1;
  out.mse = m1 * m1 + out.var;
  return out;
}

/// Minimum error probability of the binary test between theta and theta'.
inline double pmin(const AcrModel& model, double rho, double theta, double theta_p) {
  return q_func(std::sqrt(0.5 * rho * std::max(0.0, 1.0 - model.r(theta - theta_p))));
}

/// Reverse running maximum.
inline std::vector<double> valley_fill(const std::vector<double>& v) {
  std::vector<double> out(v);
  for (std::size_t i = out.size(); i-- > 1;) out[i - 1] = std::max(out[i - 1], out[i]);
  return out;
}

struct MinErrProbCurve {
  std::vector<double> xi;
  std::vector<double> p;
  std::vector<double> filled;
};

struct ZzBounds {
  double z1 = 0.0, z2 = 0.0, b1 = 0.0, b2 = 0.0;
  bool headline_first = true;  // z1/b1 is the tighter pair for this domain
  double z() const { return headline_first ? z1 : z2; }
  double b() const { return headline_first ? b1 : b2; }
};

inline MinErrProbCurve min_error_curve(const AcrModel& model, double rho, double eps, std::size_t n = 4096,
                                       const std::vector<double>& extra = {}) {
  MinErrProbCurve c;
  const double focus = std::min(eps, detail::lobe_halfwidth(model, rho));
  c.xi = composite_grid(0.0, eps, n, 0.0, focus, n / 2 + 1, extra);
  c.p.resize(c.xi.size());
  for (std::size_t i = 0; i < c.xi.size(); ++i) c.p[i] = pmin(model, rho, c.xi[i], 0.0);
  c.filled = valley_fill(c.p);
  return c;
}

/// Binary-detection lower bounds for a stationary ACR: z_i integrates
/// xi * Pmin(xi) up to eps_i, b_i uses the valley-filled curve instead.
inline ZzBounds zz_alb(const AcrModel& model, const DomainSpec& domain, double rho, std::size_t n = 4096) {
  domain.validate();
  require(rho > 0.0, ErrorKind::argument, "rho must be > 0");
  const double th = domain.theta0;
  const double eps1 = std::min(th - domain.theta1, 2.0 * (domain.theta2 - th));
  const double eps2 = std::min(domain.theta2 - th, 2.0 * (th - domain.theta1));
  if (!(eps1 > 0.0) || !(eps2 > 0.0)) fail(ErrorKind::domain, "degenerate domain: theta0 sits on a domain edge");

  ZzBounds out;
  const auto curve = min_error_curve(model, rho, std::max(eps1, eps2), n, {eps1, eps2});
  // eps1 and eps2 are grid nodes, so only whole cells are summed.
  auto integrate = [&](const std::vector<double>& v, double eps) {
    double s = 0.0;
    for (std::size_t i = 1; i < curve.xi.size() && curve.xi[i] <= eps; ++i) {
      const double a = curve.xi[i - 1], b = curve.xi[i];
      s += 0.5 * (b - a) * (a * v[i - 1] + b * v[i]);
    }
    return s;
  };
  out.z1 = integrate(curve.p, eps1);
  out.z2 = integrate(curve.p, eps2);
  // Valley filling must only look inside [0, eps_i].
  auto filled_upto = [&](double eps) {
    std::vector<double> v(curve.p);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (curve.xi[i] > eps) v[i] = 0.0;
    return valley_fill(v);
  };
  out.b1 = integrate(filled_upto(eps1), eps1);
  out.b2 = integrate(filled_upto(eps2), eps2);
  out.headline_first = (th - domain.theta1) > (domain.theta2 - th);
  return out;
}

}  // namespace mlelab
