#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace mlelab {

/// P{ lower <= B X <= upper } for X ~ N(mean, cov). The mean is folded into
/// the bounds by the caller (bounds refer to B(X - mean)).
struct MvnProblem {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  int n_points = 3000;
  std::uint64_t seed = 1;
  int n_shifts = 12;
};

struct MvnResult {
  double p = 0.0;
  double err = 0.0;
};

namespace detail {

inline const std::vector<int>& small_primes() {
  static const std::vector<int> primes = [] {
    std::vector<int> ps;
    for (int k = 2; ps.size() < 512; ++k) {
      bool prime = true;
      for (int d : ps) {
        if (d * d > k) break;
        if (k % d == 0) {
          prime = false;
          break;
        }
      }
      if (prime) ps.push_back(k);
    }
    return ps;
  }();
  return primes;
}

inline double phi_diff(double a, double b) {
  // Evaluate in the tail that keeps precision.
  if (a > 0.0) return q_func(a) - q_func(b);
  return normal_cdf(b) - normal_cdf(a);
}

}  // namespace detail

/// Randomized lattice (Richtmyer sqrt-prime generators, baker transform) over
/// the separation-of-variables form with Genz-Bretz variable reordering.
inline MvnResult mvn_prob(const MvnProblem& prob) {
  const Eigen::Index n = prob.cov.rows();
  require(n >= 1 && prob.cov.cols() == n, ErrorKind::argument, "mvn covariance must be square");
  require(prob.b.cols() == n, ErrorKind::argument, "mvn constraint matrix has wrong column count");
  const Eigen::Index m = prob.b.rows();
  require(m >= 1 && prob.lower.size() == m && prob.upper.size() == m, ErrorKind::argument,
          "mvn bound vectors must match constraint rows");
  require(prob.n_points >= 1 && prob.n_shifts >= 2, ErrorKind::argument, "mvn needs n_points >= 1 and >= 2 shifts");
  const double cmax = prob.cov.cwiseAbs().maxCoeff();
  require(std::isfinite(cmax), ErrorKind::numeric, "mvn covariance has non-finite entries");
  require((prob.cov - prob.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(cmax, 1e-300),
          ErrorKind::argument, "mvn covariance is not symmetric");
  for (Eigen::Index i = 0; i < m; ++i)
    require(!(prob.lower(i) > prob.upper(i)), ErrorKind::argument, "mvn lower bound exceeds upper bound");

  Eigen::MatrixXd sy = prob.b * prob.cov * prob.b.transpose();
  sy = 0.5 * (sy + sy.transpose());
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sy);
    require(es.info() == Eigen::Success, ErrorKind::numeric, "mvn eigen-decomposition failed");
    const Eigen::VectorXd ev = es.eigenvalues();
    const double emax = ev.maxCoeff();
    require(emax > 0.0 && std::isfinite(emax), ErrorKind::numeric, "mvn constraint covariance is zero or non-finite");
    if (ev.minCoeff() < 1e-12 * emax) {
      const Eigen::VectorXd clipped = ev.cwiseMax(1e-12 * emax);
      sy = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
      sy = 0.5 * (sy + sy.transpose());
    }
  }

  // Pivoted Cholesky; each step picks the variable with the smallest
  // expected interval probability given the previous ones.
  std::vector<double> a(static_cast<std::size_t>(m)), bb(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    a[static_cast<std::size_t>(i)] = prob.lower(i);
    bb[static_cast<std::size_t>(i)] = prob.upper(i);
  }
  Eigen::MatrixXd c = sy;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
  std::vector<double> y(static_cast<std::size_t>(m), 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index best = i;
    double best_p = inf;
    for (Eigen::Index j = i; j < m; ++j) {
      double s2 = c(j, j);
      double mu = 0.0;
      for (Eigen::Index k = 0; k < i; ++k) {
        s2 -= l(j, k) * l(j, k);
        mu += l(j, k) * y[static_cast<std::size_t>(k)];
      }
      const double s = std::sqrt(std::max(s2, 1e-300));
      const double pr = detail::phi_diff((a[static_cast<std::size_t>(j)] - mu) / s, (bb[static_cast<std::size_t>(j)] - mu) / s);
      if (pr < best_p) {
        best_p = pr;
        best = j;
      }
    }
    if (best != i) {
      c.row(i).swap(c.row(best));
      c.col(i).swap(c.col(best));
      l.row(i).swap(l.row(best));
      std::swap(a[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(best)]);
      std::swap(bb[static_cast<std::size_t>(i)], bb[static_cast<std::size_t>(best)]);
    }
    double s2 = c(i, i);
    for (Eigen::Index k = 0; k < i; ++k) s2 -= l(i, k) * l(i, k);
    const double floor = 1e-12 * std::max(c(i, i), 1e-300);
    const double lii = std::sqrt(std::max(s2, floor));
    l(i, i) = lii;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double v = c(j, i);
      for (Eigen::Index k = 0; k < i; ++k) v -= l(j, k) * l(i, k);
      l(j, i) = v / lii;
    }
    double mu = 0.0;
    for (Eigen::Index k = 0; k < i; ++k) mu += l(i, k) * y[static_cast<std::size_t>(k)];
    const double lo = (a[static_cast<std::size_t>(i)] - mu) / lii;
    const double hi = (bb[static_cast<std::size_t>(i)] - mu) / lii;
    const double den = detail::phi_diff(lo, hi);
    if (den > 1e-300) {
      const double plo = std::isfinite(lo) ? normal_pdf(lo) : 0.0;
      const double phi = std::isfinite(hi) ? normal_pdf(hi) : 0.0;
      y[static_cast<std::size_t>(i)] = (plo - phi) / den;
    } else {
      y[static_cast<std::size_t>(i)] = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
    }
  }

  if (m == 1) {
    const double s = l(0, 0);
    return {std::clamp(detail::phi_diff(a[0] / s, bb[0] / s), 0.0, 1.0), 0.0};
  }

  const auto dims = static_cast<std::size_t>(m - 1);
  const auto& primes = detail::small_primes();
  require(dims <= primes.size(), ErrorKind::argument, "mvn dimension too large for the lattice generator table");
  std::vector<double> gen(dims);
  for (std::size_t k = 0; k < dims; ++k) {
    const double r = std::sqrt(static_cast<double>(primes[k]));
    gen[k] = r - std::floor(r);
  }

  std::mt19937_64 rng(prob.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int ns = prob.n_shifts;
  const int per = std::max(1, prob.n_points / ns);
  std::vector<double> shift(dims), w(dims), yy(static_cast<std::size_t>(m));
  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < ns; ++s) {
    for (auto& v : shift) v = unif(rng);
    double acc = 0.0;
    for (int k = 1; k <= per; ++k) {
      for (std::size_t d = 0; d < dims; ++d) {
        double x = static_cast<double>(k) * gen[d] + shift[d];
        x -= std::floor(x);
        w[d] = std::abs(2.0 * x - 1.0);
      }
      double f = 1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        double mu = 0.0;
        for (Eigen::Index k2 = 0; k2 < i; ++k2) mu += l(i, k2) * yy[static_cast<std::size_t>(k2)];
        const double lii = l(i, i);
        const double lo = (a[static_cast<std::size_t>(i)] - mu) / lii;
        const double hi = (bb[static_cast<std::size_t>(i)] - mu) / lii;
        const double e = std::max(detail::phi_diff(lo, hi), 0.0);
        f *= e;
        if (f <= 0.0) break;
        if (static_cast<std::size_t>(i) < dims) {
          const double wi = w[static_cast<std::size_t>(i)];
          double yi;
          if (lo > 0.0) {
            // Upper tail: interpolate survival probabilities instead.
            const double qlo = q_func(lo);
            yi = -normal_quantile(qlo - wi * (qlo - q_func(hi)));
          } else {
            const double clo = normal_cdf(lo);
            yi = normal_quantile(clo + wi * (normal_cdf(hi) - clo));
          }
          yy[static_cast<std::size_t>(i)] = yi;
        }
      }
      acc += f;
    }
    const double est = acc / per;
    const double delta = est - mean;
    mean += delta / (s + 1);
    m2 += delta * (est - mean);
  }
  const double var = m2 / (ns - 1);
  MvnResult r;
  r.p = std::clamp(mean, 0.0, 1.0);
  r.err = 3.0 * std::sqrt(var / ns);
  return r;
}

}  // namespace mlelab
