#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "classic_bounds.hpp"
#include "common.hpp"
#include "mvn.hpp"
#include "signal_model.hpp"

namespace mlelab {

enum class PartitionMode { oscillating, non_oscillating };

inline std::string_view to_string(PartitionMode m) {
  return m == PartitionMode::oscillating ? "oscillating" : "non_oscillating";
}

/// Split of the a priori domain into intervals D_n with testpoints theta_n.
/// Vectors are stored left to right; the interval index n is position - center.
struct Partition {
  PartitionMode mode = PartitionMode::non_oscillating;
  DomainSpec domain;
  std::vector<double> boundaries;  // size() + 1 entries
  std::vector<double> testpoints;
  std::vector<bool> edge;
  std::size_t center = 0;
  bool count_adjusted = false;  // an even interval count was bumped to odd

  std::size_t size() const { return testpoints.size(); }
  int index_of(std::size_t pos) const { return static_cast<int>(pos) - static_cast<int>(center); }
  std::optional<std::size_t> position_of(int n) const {
    const long p = static_cast<long>(center) + n;
    if (p < 0 || p >= static_cast<long>(size())) return std::nullopt;
    return static_cast<std::size_t>(p);
  }
  double width(std::size_t pos) const { return boundaries[pos + 1] - boundaries[pos]; }

  /// Interval holding theta; intervals are half-open except the last.
  std::optional<std::size_t> locate(double theta) const {
    if (theta < boundaries.front() || theta > boundaries.back()) return std::nullopt;
    const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), theta);
    const auto pos = static_cast<std::size_t>(std::distance(boundaries.begin(), it));
    return std::min(pos == 0 ? std::size_t{0} : pos - 1, size() - 1);
  }
};

struct AcrExtrema {
  std::vector<double> maxima;  // lag positions
  std::vector<double> minima;
};

namespace detail {

inline double bisect_root(const AcrModel& m, double lo, double hi) {
  double flo = m.rdot(lo);
  for (int it = 0; it < 80 && hi - lo > 1e-18; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = m.rdot(mid);
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double extrema_step(const AcrModel& m, double width) {
  double fref = m.fc_mean();
  if (!(fref > 0.0)) fref = std::sqrt(m.beta_s2()) / two_pi;
  return std::min(1.0 / (50.0 * fref), width / 4000.0);
}

}  // namespace detail

/// Local extrema of R on [x_lo, x_hi] from sign changes of the spectral
/// derivative, each refined by bisection.
inline AcrExtrema acr_extrema(const AcrModel& m, double x_lo, double x_hi, double step) {
  require(x_hi > x_lo && step > 0.0, ErrorKind::argument, "extrema search needs a non-empty range");
  const auto n = static_cast<std::size_t>(std::ceil((x_hi - x_lo) / step)) + 1;
  const auto x = linspace(x_lo, x_hi, std::max<std::size_t>(n, 3));
  AcrExtrema out;
  double dprev = m.rdot(x[0]);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double d = m.rdot(x[i]);
    if (dprev > 0.0 && d <= 0.0) out.maxima.push_back(detail::bisect_root(m, x[i - 1], x[i]));
    if (dprev < 0.0 && d >= 0.0) out.minima.push_back(detail::bisect_root(m, x[i - 1], x[i]));
    dprev = d;
  }
  return out;
}

inline constexpr int default_non_oscillating_intervals = 9;

inline Partition make_partition(const AcrModel& model, const DomainSpec& domain, PartitionMode mode,
                                std::optional<int> n_intervals = std::nullopt) {
  domain.validate();
  Partition p;
  p.mode = mode;
  p.domain = domain;
  const double th = domain.theta0;

  if (mode == PartitionMode::non_oscillating) {
    int n = n_intervals.value_or(default_non_oscillating_intervals);
    require(n >= 1, ErrorKind::argument, "interval count must be >= 1");
    if (n % 2 == 0) {
      ++n;
      p.count_adjusted = true;
    }
    p.boundaries = linspace(domain.theta1, domain.theta2, static_cast<std::size_t>(n) + 1);
    p.testpoints.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
      p.testpoints[static_cast<std::size_t>(k)] = 0.5 * (p.boundaries[static_cast<std::size_t>(k)] + p.boundaries[static_cast<std::size_t>(k) + 1]);
    p.center = *p.locate(th);
    p.testpoints[p.center] = th;
    p.edge.assign(static_cast<std::size_t>(n), false);
    p.edge.front() = p.edge.back() = true;
    return p;
  }

  const double step = detail::extrema_step(model, domain.width());
  const auto ex = acr_extrema(model, domain.theta1 - th, domain.theta2 - th, step);
  std::vector<double> maxima;
  for (double x : ex.maxima)
    if (std::abs(x) > step) maxima.push_back(th + x);
  if (maxima.empty())
    fail(ErrorKind::model, "oscillating partition: no local maxima of the ACR besides the global one");
  maxima.push_back(th);
  std::sort(maxima.begin(), maxima.end());

  std::vector<double> bounds{domain.theta1};
  for (double x : ex.minima) {
    const double t = th + x;
    if (t > domain.theta1 && t < domain.theta2) bounds.push_back(t);
  }
  bounds.push_back(domain.theta2);

  // Assign maxima to intervals; pieces without a maximum merge inward.
  std::vector<std::vector<double>> members(bounds.size() - 1);
  for (double t : maxima) {
    auto it = std::upper_bound(bounds.begin(), bounds.end(), t);
    auto pos = static_cast<std::size_t>(std::distance(bounds.begin(), it));
    pos = std::min(pos == 0 ? std::size_t{0} : pos - 1, members.size() - 1);
    members[pos].push_back(t);
  }
  std::vector<double> nb{bounds.front()};
  std::vector<double> tps;
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (members[k].empty()) continue;  // boundary to the right gets dropped below
    if (members[k].size() != 1)
      fail(ErrorKind::model, "oscillating partition: interval holds more than one local maximum");
    if (!tps.empty()) nb.push_back(bounds[k]);
    tps.push_back(members[k].front());
  }
  nb.push_back(bounds.back());
  p.boundaries = std::move(nb);
  p.testpoints = std::move(tps);
  p.center = static_cast<std::size_t>(std::find(p.testpoints.begin(), p.testpoints.end(), th) - p.testpoints.begin());
  p.edge.assign(p.testpoints.size(), false);
  p.edge.front() = p.edge.back() = true;
  return p;
}

/// Probability that the CCR at theta exceeds the CCR at theta_p.
inline double pairwise_exceed_prob(const AcrModel& model, double rho, double theta, double theta_p, double theta0) {
  const double den2 = 1.0 - model.r(theta - theta_p);
  if (!(std::abs(den2) >= 1e-12)) fail(ErrorKind::degenerate, "pairwise probability: hypotheses are indistinguishable");
  const double num = model.r(theta_p - theta0) - model.r(theta - theta0);
  return q_func(std::sqrt(0.5 * rho) * num / std::sqrt(den2));
}

struct MvnConfig {
  int n_points = 3000;
  std::uint64_t seed = 5;
};

struct IntervalProbs {
  std::vector<double> p;
  std::vector<double> err;  // zero for the closed-form schemes
};

/// Exact-region probabilities from the joint law of the CCR at the testpoints.
/// `positions` limits the work to a subset of intervals (others are left at 0).
inline IntervalProbs interval_probs_p1(const Partition& part, const AcrModel& model, double rho, const MvnConfig& cfg,
                                       std::optional<std::vector<std::size_t>> positions = std::nullopt) {
  const std::size_t n = part.size();
  require(n >= 2, ErrorKind::argument, "interval probabilities need at least two intervals");
  require(rho > 0.0, ErrorKind::argument, "rho must be > 0");
  Eigen::MatrixXd cov(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> mu(n);
  const double sr = std::sqrt(rho);
  for (std::size_t k = 0; k < n; ++k) {
    mu[k] = sr * model.r(part.testpoints[k] - part.domain.theta0);
    for (std::size_t l = k; l < n; ++l) {
      const double v = model.r(part.testpoints[k] - part.testpoints[l]);
      cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = v;
      cov(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = v;
    }
  }
  std::vector<std::size_t> todo;
  if (positions) {
    todo = *positions;
  } else {
    for (std::size_t k = 0; k < n; ++k) todo.push_back(k);
  }
  IntervalProbs out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t pos : todo) {
    require(pos < n, ErrorKind::argument, "interval position out of range");
    MvnProblem prob;
    prob.cov = cov;
    prob.b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n));
    prob.lower = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n - 1), -std::numeric_limits<double>::infinity());
    prob.upper.resize(static_cast<Eigen::Index>(n - 1));
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == pos) continue;
      prob.b(row, static_cast<Eigen::Index>(k)) = 1.0;
      prob.b(row, static_cast<Eigen::Index>(pos)) = -1.0;
      prob.upper(row) = mu[pos] - mu[k];
      ++row;
    }
    prob.n_points = cfg.n_points;
    prob.seed = derive_seed(cfg.seed, pos);
    const auto r = mvn_prob(prob);
    out.p[pos] = r.p;
    out.err[pos] = r.err;
  }
  return out;
}

/// Pairwise upper bounds: the central interval is compared with its right
/// neighbour (left one if the domain ends at theta0), the others with theta0.
inline IntervalProbs interval_probs_p2(const Partition& part, const AcrModel& model, double rho) {
  const std::size_t n = part.size();
  require(n >= 2, ErrorKind::argument, "interval probabilities need at least two intervals");
  const double th = part.domain.theta0;
  IntervalProbs out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  const std::size_t nb = part.center + 1 < n ? part.center + 1 : part.center - 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == part.center)
      out.p[k] = pairwise_exceed_prob(model, rho, th, part.testpoints[nb], th);
    else
      out.p[k] = pairwise_exceed_prob(model, rho, part.testpoints[k], th, th);
  }
  return out;
}

inline IntervalProbs interval_probs_p3(const Partition& part, const AcrModel& model, double rho) {
  auto out = interval_probs_p2(part, model, rho);
  double s = 0.0;
  for (double v : out.p) s += v;
  for (auto& v : out.p) v /= s;
  return out;
}

enum class MomentScheme { uniform, monotone_bernoulli, monotone_noiseless, peak_gaussian, peak_noiseless };

inline std::string_view to_string(MomentScheme s) {
  switch (s) {
    case MomentScheme::uniform: return "U";
    case MomentScheme::monotone_bernoulli: return "1_c";
    case MomentScheme::monotone_noiseless: return "2_c";
    case MomentScheme::peak_gaussian: return "1_o";
    case MomentScheme::peak_noiseless: return "2_o";
  }
  return "?";
}

enum class IntervalShape { uniform, two_atoms, gaussian, point };

struct IntervalMoments {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<IntervalShape> shape;
  std::vector<double> p_left;  // weight of the left atom for two_atoms intervals
};

inline bool scheme_fits(MomentScheme s, PartitionMode m) {
  if (s == MomentScheme::monotone_bernoulli || s == MomentScheme::monotone_noiseless)
    return m == PartitionMode::non_oscillating;
  if (s == MomentScheme::peak_gaussian || s == MomentScheme::peak_noiseless) return m == PartitionMode::oscillating;
  return true;
}

inline IntervalMoments interval_moments(const Partition& part, const AcrModel& model, double rho, MomentScheme scheme) {
  require(rho > 0.0, ErrorKind::argument, "rho must be > 0");
  if (!scheme_fits(scheme, part.mode))
    fail(ErrorKind::argument, std::string("moment scheme ") + std::string(to_string(scheme)) +
                                  " does not apply to a " + std::string(to_string(part.mode)) + " partition");
  const std::size_t n = part.size();
  const double th = part.domain.theta0;
  const double c = crlb(rho, model.beta_s2());
  const double beta = std::sqrt(model.beta_s2());
  const double r2_0 = model.rddot(0.0);
  IntervalMoments out;
  out.mean.resize(n);
  out.var.resize(n);
  out.shape.resize(n);
  out.p_left.assign(n, 0.0);

  for (std::size_t k = 0; k < n; ++k) {
    const double lo = part.boundaries[k];
    const double hi = part.boundaries[k + 1];
    const double w = hi - lo;
    const double var_u = w * w / 12.0;
    if (k == part.center) {
      out.mean[k] = th;
      out.var[k] = std::min(c, var_u);
      out.shape[k] = IntervalShape::gaussian;
      continue;
    }
    const double tk = part.testpoints[k];
    switch (scheme) {
      case MomentScheme::uniform:
        out.mean[k] = 0.5 * (lo + hi);
        out.var[k] = var_u;
        out.shape[k] = IntervalShape::uniform;
        break;
      case MomentScheme::monotone_bernoulli: {
        const double pl = q_func(std::sqrt(rho) * model.rdot(tk - th) / beta);
        out.mean[k] = lo * pl + hi * (1.0 - pl);
        const double var_b = pl * (1.0 - pl) * w * w;
        out.var[k] = std::min(var_u, var_b);
        out.shape[k] = var_b <= var_u ? IntervalShape::two_atoms : IntervalShape::uniform;
        out.p_left[k] = pl;
        break;
      }
      case MomentScheme::monotone_noiseless: {
        const double d = model.rdot(tk - th);
        const double tiny = 1e-12 * beta;
        out.mean[k] = d > tiny ? hi : (d < -tiny ? lo : 0.5 * (lo + hi));
        out.var[k] = 0.0;
        out.shape[k] = IntervalShape::point;
        break;
      }
      case MomentScheme::peak_gaussian: {
        const double r2 = model.rddot(tk - th);
        if (!(r2 < 0.0)) fail(ErrorKind::model, "partition inconsistency: testpoint is not a local maximum");
        out.mean[k] = tk;
        out.var[k] = std::min(c * r2_0 * r2_0 / (r2 * r2), var_u);
        out.shape[k] = IntervalShape::gaussian;
        break;
      }
      case MomentScheme::peak_noiseless:
        out.mean[k] = tk;
        out.var[k] = 0.0;
        out.shape[k] = IntervalShape::point;
        break;
    }
  }
  return out;
}

struct MseaResult {
  double mse = 0.0;
  double mean = 0.0;
};

/// Total MSE assembled from per-interval probabilities and moments.
inline MseaResult msea(const Partition& part, const std::vector<double>& probs, const IntervalMoments& mom) {
  require(probs.size() == part.size() && mom.mean.size() == part.size(), ErrorKind::argument,
          "msea inputs must match the partition size");
  const double th = part.domain.theta0;
  MseaResult r;
  for (std::size_t k = 0; k < part.size(); ++k) {
    const double bias = th - mom.mean[k];
    r.mse += probs[k] * (bias * bias + mom.var[k]);
    r.mean += probs[k] * mom.mean[k];
  }
  return r;
}

/// Piecewise density implied by interval probabilities and moments. Point
/// masses are returned separately from the continuous part.
struct PiecewiseDensity {
  std::vector<double> atom_at;
  std::vector<double> atom_mass;
  const Partition* part = nullptr;
  std::vector<double> weight;
  IntervalMoments mom;

  double density(double theta) const {
    const auto pos = part->locate(theta);
    if (!pos) return 0.0;
    const std::size_t k = *pos;
    const double lo = part->boundaries[k], hi = part->boundaries[k + 1];
    switch (mom.shape[k]) {
      case IntervalShape::uniform: return weight[k] / (hi - lo);
      case IntervalShape::gaussian: {
        const double s = std::sqrt(mom.var[k]);
        if (!(s > 0.0)) return 0.0;
        const double z = normal_cdf((hi - mom.mean[k]) / s) - normal_cdf((lo - mom.mean[k]) / s);
        return z > 0.0 ? weight[k] * normal_pdf((theta - mom.mean[k]) / s) / (s * z) : 0.0;
      }
      default: return 0.0;
    }
  }
};

inline PiecewiseDensity interval_density(const Partition& part, const std::vector<double>& probs, const IntervalMoments& mom) {
  PiecewiseDensity d;
  d.part = &part;
  d.weight = probs;
  d.mom = mom;
  for (std::size_t k = 0; k < part.size(); ++k) {
    if (mom.shape[k] == IntervalShape::point) {
      d.atom_at.push_back(mom.mean[k]);
      d.atom_mass.push_back(probs[k]);
    } else if (mom.shape[k] == IntervalShape::two_atoms) {
      d.atom_at.push_back(part.boundaries[k]);
      d.atom_mass.push_back(probs[k] * mom.p_left[k]);
      d.atom_at.push_back(part.boundaries[k + 1]);
      d.atom_mass.push_back(probs[k] * (1.0 - mom.p_left[k]));
    }
  }
  return d;
}

}  // namespace mlelab
