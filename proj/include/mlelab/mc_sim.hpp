#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "mie.hpp"
#include "signal_model.hpp"

namespace mlelab {

inline constexpr std::size_t max_sim_grid_points = std::size_t{1} << 15;

/// Default grid: 100 points per carrier period or 400 per pulse width,
/// whichever is finer, capped.
inline std::size_t default_sim_grid_points(const AcrModel& model, const DomainSpec& domain) {
  double step;
  if (model.spec()) {
    step = model.spec()->tw / 400.0;
    if (model.spec()->fc > 0.0) step = std::min(step, 1.0 / (100.0 * model.spec()->fc));
  } else {
    step = 1.0 / (100.0 * model.max_frequency());
  }
  const auto n = static_cast<std::size_t>(std::ceil(domain.width() / step)) + 1;
  return std::min(n, max_sim_grid_points);
}

/// Coarsest step that still resolves the ACR for peak picking.
inline double max_sim_grid_step(const AcrModel& model) {
  if (model.spec()) {
    double step = model.spec()->tw / 200.0;
    if (model.spec()->fc > 0.0) step = std::min(step, 1.0 / (20.0 * model.spec()->fc));
    return step;
  }
  return 1.0 / (20.0 * model.max_frequency());
}

/// Zero-mean Gaussian process on a grid with covariance R(theta_i - theta_j),
/// synthesized from the line spectrum: sum_m sqrt(w_m) (a_m cos + b_m sin).
/// Exact for the model covariance, no factorization of the grid matrix.
class CcrNoise {
 public:
  explicit CcrNoise(const AcrModel& model, std::vector<double> grid) : grid_(std::move(grid)) {
    const auto& f = model.freqs();
    const auto& w = model.weights();
    const auto g = static_cast<Eigen::Index>(grid_.size());
    const auto m = static_cast<Eigen::Index>(f.size());
    basis_.resize(g, 2 * m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double a = std::sqrt(w[static_cast<std::size_t>(k)]);
      const double om = two_pi * f[static_cast<std::size_t>(k)];
      for (Eigen::Index i = 0; i < g; ++i) {
        const double ph = om * grid_[static_cast<std::size_t>(i)];
        basis_(i, 2 * k) = a * std::cos(ph);
        basis_(i, 2 * k + 1) = a * std::sin(ph);
      }
    }
  }

  std::size_t dim() const { return static_cast<std::size_t>(basis_.cols()); }
  const std::vector<double>& grid() const { return grid_; }

  /// Standard normal coefficients for one trial; the stream depends only on the seed.
  static void coefficients(std::uint64_t seed, Eigen::Ref<Eigen::VectorXd> out) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = nd(rng);
  }

  Eigen::MatrixXd realize(const Eigen::MatrixXd& coeffs) const { return basis_ * coeffs; }

  std::vector<double> draw(std::uint64_t seed) const {
    Eigen::VectorXd z(basis_.cols());
    coefficients(seed, z);
    const Eigen::VectorXd n = basis_ * z;
    return {n.data(), n.data() + n.size()};
  }

 private:
  std::vector<double> grid_;
  Eigen::MatrixXd basis_;
};

struct SimConfig {
  AcrModel model;
  DomainSpec domain;
  std::vector<double> rho;  // linear SNRs
  int trials = 10000;
  std::size_t grid_points = 0;  // 0 selects the default
  std::uint64_t seed = 1;
  bool refine = true;
  int threads = 1;
  bool keep_samples = false;
  std::optional<Partition> partition;  // enables interval hit counts
};

struct SimPoint {
  double rho = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mean = 0.0;
  std::vector<long> hits;              // per partition interval
  std::vector<double> interval_mean;
  std::vector<double> interval_std;
  std::vector<double> samples;         // estimates, when requested
};

struct SimResult {
  std::size_t grid_points = 0;
  int trials = 0;
  std::vector<SimPoint> points;
};

inline std::vector<double> empirical_interval_probs(const SimPoint& pt, int trials) {
  std::vector<double> out(pt.hits.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>(pt.hits[k]) / trials;
  return out;
}

namespace detail {

// Grid argmax with optional 3-point parabolic refinement (interior peaks only).
inline double peak_location(const double* x, std::size_t n, const std::vector<double>& grid, double h, bool refine) {
  std::size_t best = 0;
  double bv = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > bv) {
      bv = x[i];
      best = i;
    }
  if (!refine || best == 0 || best + 1 == n) return grid[best];
  const double ym = x[best - 1], y0 = x[best], yp = x[best + 1];
  const double den = ym - 2.0 * y0 + yp;
  if (!(den < 0.0)) return grid[best];
  const double d = std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5);
  return grid[best] + d * h;
}

}  // namespace detail

/// Monte Carlo of the grid MLE. Each trial draws one noise shape which is
/// reused across the SNR list after scaling by 1/sqrt(rho).
inline SimResult simulate(const SimConfig& cfg) {
  cfg.domain.validate();
  require(cfg.trials >= 100, ErrorKind::argument, "simulation needs at least 100 trials");
  require(!cfg.rho.empty(), ErrorKind::argument, "simulation needs a non-empty SNR list");
  for (double r : cfg.rho) require(r > 0.0 && std::isfinite(r), ErrorKind::argument, "SNR values must be > 0");
  const std::size_t g = cfg.grid_points ? cfg.grid_points : default_sim_grid_points(cfg.model, cfg.domain);
  require(g >= 3 && g <= max_sim_grid_points, ErrorKind::resource, "simulation grid size out of range");
  const auto grid = linspace(cfg.domain.theta1, cfg.domain.theta2, g);
  const double h = grid[1] - grid[0];
  require(h <= max_sim_grid_step(cfg.model) * (1.0 + 1e-9), ErrorKind::argument,
          "simulation grid too coarse to resolve the ACR");

  const CcrNoise noise(cfg.model, grid);
  std::vector<double> sig(g);
  for (std::size_t i = 0; i < g; ++i) sig[i] = cfg.model.r(grid[i] - cfg.domain.theta0);

  const std::size_t nr = cfg.rho.size();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<double> est(trials * nr);
  std::vector<double> scale(nr);
  for (std::size_t j = 0; j < nr; ++j) scale[j] = 1.0 / std::sqrt(cfg.rho[j]);

  constexpr std::size_t batch = 128;
  const std::size_t nbatches = (trials + batch - 1) / batch;
  auto run_batches = [&](std::size_t first, std::size_t stride) {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(noise.dim()), static_cast<Eigen::Index>(batch));
    std::vector<double> x(g);
    for (std::size_t b = first; b < nbatches; b += stride) {
      const std::size_t t0 = b * batch;
      const std::size_t nt = std::min(batch, trials - t0);
      for (std::size_t t = 0; t < nt; ++t)
        CcrNoise::coefficients(derive_seed(cfg.seed, t0 + t), z.col(static_cast<Eigen::Index>(t)));
      const Eigen::MatrixXd n = noise.realize(z.leftCols(static_cast<Eigen::Index>(nt)));
      for (std::size_t t = 0; t < nt; ++t) {
        const double* col = n.col(static_cast<Eigen::Index>(t)).data();
        for (std::size_t j = 0; j < nr; ++j) {
          const double s = scale[j];
          for (std::size_t i = 0; i < g; ++i) x[i] = sig[i] + s * col[i];
          est[(t0 + t) * nr + j] = detail::peak_location(x.data(), g, grid, h, cfg.refine);
        }
      }
    }
  };
  const int nth = std::max(1, std::min<int>(cfg.threads, static_cast<int>(nbatches)));
  if (nth == 1) {
    run_batches(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < nth; ++k) pool.emplace_back(run_batches, static_cast<std::size_t>(k), static_cast<std::size_t>(nth));
    for (auto& th : pool) th.join();
  }

  SimResult res;
  res.grid_points = g;
  res.trials = cfg.trials;
  const double th = cfg.domain.theta0;
  for (std::size_t j = 0; j < nr; ++j) {
    SimPoint pt;
    pt.rho = cfg.rho[j];
    const std::size_t ni = cfg.partition ? cfg.partition->size() : 0;
    pt.hits.assign(ni, 0);
    std::vector<double> s1(ni, 0.0), s2(ni, 0.0);
    double se = 0.0, sm = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const double e = est[t * nr + j];
      se += (e - th) * (e - th);
      sm += e;
      if (cfg.keep_samples) pt.samples.push_back(e);
      if (ni) {
        const std::size_t k = *cfg.partition->locate(e);
        ++pt.hits[k];
        s1[k] += e;
        s2[k] += e * e;
      }
    }
    pt.mse = se / static_cast<double>(trials);
    pt.rmse = std::sqrt(pt.mse);
    pt.mean = sm / static_cast<double>(trials);
    pt.interval_mean.assign(ni, 0.0);
    pt.interval_std.assign(ni, 0.0);
    for (std::size_t k = 0; k < ni; ++k) {
      if (pt.hits[k] == 0) continue;
      const double nk = static_cast<double>(pt.hits[k]);
      const double m = s1[k] / nk;
      pt.interval_mean[k] = m;
      pt.interval_std[k] = std::sqrt(std::max(0.0, s2[k] / nk - m * m));
    }
    res.points.push_back(std::move(pt));
  }
  return res;
}

}  // namespace mlelab
