#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "classic_bounds.hpp"
#include "common.hpp"
#include "mie.hpp"
#include "signal_model.hpp"

namespace mlelab {

struct MlDensityApprox {
  std::vector<double> grid;
  std::vector<double> pdf;
  double mean = 0.0;
  double mse = 0.0;
};

/// Uniform grid over [a, b] merged with a denser grid of half-width `focus`
/// around `center` and any extra nodes. Sorted, duplicates removed.
inline std::vector<double> composite_grid(double a, double b, std::size_t n, double center, double focus,
                                          std::size_t n_focus, const std::vector<double>& extra = {}) {
  auto g = linspace(a, b, n);
  const double lo = std::max(a, center - focus), hi = std::min(b, center + focus);
  if (hi > lo && n_focus >= 2) {
    const auto f = linspace(lo, hi, n_focus);
    g.insert(g.end(), f.begin(), f.end());
  }
  for (double e : extra)
    if (e >= a && e <= b) g.push_back(e);
  g.push_back(center >= a && center <= b ? center : a);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

namespace detail {

// Scale of the main lobe of P(theta, theta0) at high SNR.
inline double lobe_halfwidth(const AcrModel& model, double rho) { return 60.0 * std::sqrt(crlb(rho, model.beta_s2())); }

inline double p_exceed_truth(const AcrModel& model, double rho, double lag) {
  return q_func(std::sqrt(0.5 * rho * std::max(0.0, 1.0 - model.r(lag))));
}

}  // namespace detail

inline constexpr std::size_t default_density_grid = 4096;

/// Continuous limit of the normalized pairwise probabilities: p_M is
/// proportional to P(theta, theta0), which equals 1/2 at theta0 itself.
inline MlDensityApprox aub_density(const AcrModel& model, const DomainSpec& domain, double rho,
                                   std::size_t grid_size = default_density_grid) {
  domain.validate();
  require(rho > 0.0, ErrorKind::argument, "rho must be > 0");
  require(grid_size >= 2048, ErrorKind::argument, "density grid needs >= 2048 points");
  MlDensityApprox out;
  out.grid = composite_grid(domain.theta1, domain.theta2, grid_size, domain.theta0,
                            detail::lobe_halfwidth(model, rho), grid_size / 2 + 1);
  const auto& g = out.grid;
  out.pdf.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out.pdf[i] = detail::p_exceed_truth(model, rho, g[i] - domain.theta0);
  const double z = trapz(g, out.pdf);
  for (auto& v : out.pdf) v /= z;
  std::vector<double> t1(g.size()), t2(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    t1[i] = g[i] * out.pdf[i];
    const double d = g[i] - domain.theta0;
    t2[i] = d * d * out.pdf[i];
  }
  out.mean = trapz(g, t1);
  out.mse = trapz(g, t2);
  return out;
}

/// First neighbouring testpoint to the right of theta0.
inline double first_neighbour(const AcrModel& model, const DomainSpec& domain, PartitionMode mode) {
  domain.validate();
  const double th = domain.theta0;
  double t1;
  if (mode == PartitionMode::oscillating) {
    const double span = domain.theta2 - th;
    if (!(span > 0.0)) fail(ErrorKind::domain, "domain too small: no room for a neighbouring peak");
    const double step = detail::extrema_step(model, domain.width());
    const auto ex = acr_extrema(model, 0.0, span, step);
    auto it = std::find_if(ex.maxima.begin(), ex.maxima.end(), [&](double x) { return x > step; });
    if (it == ex.maxima.end()) fail(ErrorKind::domain, "domain too small: first neighbouring peak lies outside it");
    t1 = th + *it;
  } else {
    t1 = th + pi / (4.0 * std::sqrt(model.beta_s2()));
  }
  if (t1 > domain.theta2) fail(ErrorKind::domain, "domain too small: first neighbouring testpoint lies outside it");
  return t1;
}

struct MnApprox {
  MlDensityApprox density;  // p_MN on a grid, its mean and MSE
  double p_ambiguity = 0.0;
  double theta1 = 0.0;
  double outer_mean = 0.0;  // mean and MSE of p_M restricted outside the central cell
  double outer_mse = 0.0;
};

/// Two-term approximation: a Gaussian of variance c around theta0 plus the
/// AUB density restricted to the outside of the central cell.
inline MnApprox msea_mn(const AcrModel& model, const DomainSpec& domain, double rho, PartitionMode mode,
                        std::size_t grid_size = default_density_grid) {
  domain.validate();
  require(rho > 0.0, ErrorKind::argument, "rho must be > 0");
  require(grid_size >= 2048, ErrorKind::argument, "density grid needs >= 2048 points");
  MnApprox out;
  const double th = domain.theta0;
  out.theta1 = first_neighbour(model, domain, mode);
  const double half = 0.5 * (out.theta1 - th);
  const double d0a = std::max(domain.theta1, th - half);
  const double d0b = std::min(domain.theta2, th + half);
  const double c = crlb(rho, model.beta_s2());
  out.p_ambiguity = std::min(1.0, 2.0 * detail::p_exceed_truth(model, rho, out.theta1 - th));

  const auto g = composite_grid(domain.theta1, domain.theta2, grid_size, th, detail::lobe_halfwidth(model, rho),
                                grid_size / 2 + 1, {d0a, d0b});
  std::vector<double> p(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) p[i] = detail::p_exceed_truth(model, rho, g[i] - th);

  // Integrate only over cells outside [d0a, d0b).
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double a = g[i - 1], b = g[i];
    if (a >= d0a && b <= d0b) continue;
    const double h = 0.5 * (b - a);
    const double da = a - th, db = b - th;
    z += h * (p[i - 1] + p[i]);
    m1 += h * (a * p[i - 1] + b * p[i]);
    m2 += h * (da * da * p[i - 1] + db * db * p[i]);
  }
  if (z > 0.0) {
    out.outer_mean = m1 / z;
    out.outer_mse = m2 / z;
  }

  const double pa = out.p_ambiguity;
  auto& dens = out.density;
  dens.mse = (1.0 - pa) * c + pa * out.outer_mse;
  dens.mean = (1.0 - pa) * th + pa * out.outer_mean;
  const double s = std::sqrt(c);
  const double zg = normal_cdf((domain.theta2 - th) / s) - normal_cdf((domain.theta1 - th) / s);
  auto gauss = [&](double t) { return (1.0 - pa) * normal_pdf((t - th) / s) / (s * zg); };
  // The density jumps at the cell edges, so those nodes appear twice.
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = g[i];
    const double outer = z > 0.0 ? pa * p[i] / z : 0.0;
    const bool inside = t > d0a && t < d0b;
    if (t == d0a && t > domain.theta1) {
      dens.grid.push_back(t);
      dens.pdf.push_back(gauss(t) + outer);
      dens.grid.push_back(t);
      dens.pdf.push_back(gauss(t));
    } else if (t == d0b && t < domain.theta2) {
      dens.grid.push_back(t);
      dens.pdf.push_back(gauss(t));
      dens.grid.push_back(t);
      dens.pdf.push_back(gauss(t) + outer);
    } else {
      dens.grid.push_back(t);
      dens.pdf.push_back(gauss(t) + (inside ? 0.0 : outer));
    }
  }
  return out;
}

}  // namespace mlelab
