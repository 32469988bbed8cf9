#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "signal_model.hpp"

namespace mlelab {

inline double crlb(double rho, double beta_s2) {
  require(rho > 0.0 && beta_s2 > 0.0, ErrorKind::argument, "crlb needs rho > 0 and beta_s2 > 0");
  return 1.0 / (rho * beta_s2);
}

inline double ecrlb(double rho, double beta_e2) {
  require(rho > 0.0 && beta_e2 > 0.0, ErrorKind::argument, "ecrlb needs rho > 0 and beta_e2 > 0");
  return 1.0 / (rho * beta_e2);
}

/// MSE of an estimate uniformly distributed over the a priori domain.
inline double max_mse(const DomainSpec& d) {
  d.validate();
  const double bias = d.theta0 - d.uniform_mean();
  return d.uniform_var() + bias * bias;
}

struct BlbResult {
  double value = 0.0;
  bool jitter_applied = false;
  double rcond = 0.0;                 // reciprocal condition estimate of the scaled matrix
  std::vector<double> weights;        // solution of D x = T, in the caller's testpoint order
};

namespace detail {

// log|e^x - 1| without overflow.
inline double log_abs_expm1(double x) {
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (x > 0.0) return x > 30.0 ? x + std::log1p(-std::exp(-x)) : std::log(std::expm1(x));
  return std::log(-std::expm1(x));
}

}  // namespace detail

/// Barankin bound with the exponential (likelihood-ratio) testpoint kernel and
/// a derivative constraint at theta0. Rows are rescaled by their own diagonal
/// so the matrix stays well conditioned when exp(rho*...) overflows.
inline BlbResult blb(const AcrModel& model, const DomainSpec& domain, const std::vector<double>& testpoints,
                     double rho) {
  domain.validate();
  require(rho > 0.0, ErrorKind::argument, "blb needs rho > 0");
  const double tol = 1e-15 * std::max(1.0, domain.width());
  std::size_t zero_idx = testpoints.size();
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < testpoints.size(); ++i) {
    const double t = testpoints[i];
    if (!domain.contains(t)) fail(ErrorKind::argument, "blb testpoint lies outside the a priori domain");
    if (std::abs(t - domain.theta0) <= std::max(tol, 1e-12 * domain.width())) {
      zero_idx = i;
    } else {
      others.push_back(i);
    }
  }
  require(zero_idx < testpoints.size(), ErrorKind::argument, "blb testpoints must include theta0");

  const double th = domain.theta0;
  const std::size_t n = others.size() + 1;
  std::vector<double> rt(others.size()), logd(others.size());
  for (std::size_t k = 0; k < others.size(); ++k) {
    rt[k] = model.r(testpoints[others[k]] - th);
    const double a = 2.0 * (1.0 - rt[k]);
    if (!(a > 0.0)) fail(ErrorKind::numeric, "blb testpoint indistinguishable from theta0");
    logd[k] = detail::log_abs_expm1(rho * a);
  }

  const double d00 = rho * model.beta_s2();
  Eigen::MatrixXd D(n, n);
  Eigen::VectorXd T(n);
  D(0, 0) = 1.0;
  T(0) = 1.0 / std::sqrt(d00);
  for (std::size_t k = 0; k < others.size(); ++k) {
    const double tk = testpoints[others[k]];
    T(k + 1) = (tk - th) * std::exp(-0.5 * logd[k]);
    D(0, k + 1) = D(k + 1, 0) = rho * model.rdot(th - tk) / std::sqrt(d00) * std::exp(-0.5 * logd[k]);
    for (std::size_t l = k; l < others.size(); ++l) {
      double v = 1.0;
      if (l != k) {
        const double tl = testpoints[others[l]];
        const double a = model.r(tk - tl) - rt[k] - rt[l] + 1.0;
        const double x = rho * a;
        const double lg = detail::log_abs_expm1(x) - 0.5 * (logd[k] + logd[l]);
        v = (x < 0.0 ? -1.0 : 1.0) * std::exp(lg);
      }
      D(k + 1, l + 1) = D(l + 1, k + 1) = v;
    }
  }

  BlbResult res;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(D);
  auto usable = [&](const Eigen::LDLT<Eigen::MatrixXd>& f) {
    return f.info() == Eigen::Success && f.isPositive() && f.vectorD().minCoeff() > 0.0 && f.rcond() > 1e-300;
  };
  if (!usable(ldlt)) {
    const double jitter = 1e-12 * D.trace() / static_cast<double>(n);
    D.diagonal().array() += jitter;
    ldlt.compute(D);
    res.jitter_applied = true;
    if (!usable(ldlt))
      fail(ErrorKind::numeric, "blb matrix is singular (rcond " + std::to_string(ldlt.rcond()) + ")");
  }
  res.rcond = ldlt.rcond();
  const Eigen::VectorXd x = ldlt.solve(T);
  res.value = T.dot(x);
  if (!std::isfinite(res.value)) fail(ErrorKind::numeric, "blb produced a non-finite value");

  // Undo the diagonal scaling so weights refer to the unscaled system.
  res.weights.assign(testpoints.size(), 0.0);
  res.weights[zero_idx] = x(0) / std::sqrt(d00);
  for (std::size_t k = 0; k < others.size(); ++k) res.weights[others[k]] = x(k + 1) * std::exp(-0.5 * logd[k]);
  return res;
}

}  // namespace mlelab
