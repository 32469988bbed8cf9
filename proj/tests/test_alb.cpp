#include <gtest/gtest.h>

#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <mlelab/alb.hpp>
#include <mlelab/classic_bounds.hpp>

#include "test_support.hpp"

using namespace mlelab;
using namespace mlelab::test;

namespace {

double integrate_chi(double a3, double a4) {
  using gk = boost::math::quadrature::gauss_kronrod<double, 61>;
  // xi = tan(u) maps the real line onto (-pi/2, pi/2).
  auto f = [&](double u) {
    const double c = std::cos(u);
    return chi_pdf(std::tan(u), a3, a4) / (c * c);
  };
  return gk::integrate(f, -pi / 2.0, pi / 2.0, 15, 1e-12);
}

}  // namespace

TEST(Alb, ChiDensityReducesToCauchy) {
  for (double xi : {-10.0, -1.0, 0.0, 0.5, 3.0}) EXPECT_NEAR(chi_pdf(xi, 0.0, 0.0), 1.0 / (pi * (1.0 + xi * xi)), 1e-15);
}

TEST(Alb, ChiDensityIsNormalized) {
  for (auto [a3, a4] : std::vector<std::pair<double, double>>{{0.0, 1.0}, {0.7, 2.0}, {-1.5, 5.0}, {0.0, 30.0}})
    EXPECT_NEAR(integrate_chi(a3, a4), 1.0, 1e-6) << a3 << " " << a4;
}

TEST(Alb, ChiDensityIsEvenWithoutSkew) {
  for (double xi : {0.1, 1.0, 7.0}) EXPECT_NEAR(chi_pdf(xi, 0.0, 3.0), chi_pdf(-xi, 0.0, 3.0), 1e-15);
}

TEST(Alb, ChiDensityMatchesRatioSamples) {
  // chi = (a1 + Z1) / (a4 + Z2) with unit normals, a3 = 0, checked by a histogram.
  const double a4 = 2.0;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  const int n = 400000;
  const std::vector<double> edges{-3.0, -1.0, -0.3, 0.0, 0.3, 1.0, 3.0};
  std::vector<long> counts(edges.size() - 1, 0);
  for (int k = 0; k < n; ++k) {
    const double x = nd(rng) / (a4 + nd(rng));
    for (std::size_t b = 0; b + 1 < edges.size(); ++b)
      if (x >= edges[b] && x < edges[b + 1]) ++counts[b];
  }
  using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    const double p = gk::integrate([&](double x) { return chi_pdf(x, 0.0, a4); }, edges[b], edges[b + 1], 10, 1e-12);
    const double mc = static_cast<double>(counts[b]) / n;
    EXPECT_NEAR(p, mc, 4.0 * std::sqrt(p * (1.0 - p) / n)) << b;
  }
}

TEST(Alb, TimeOfArrivalRatioParameters) {
  const auto& s = baseband();
  const double rho = db_to_linear(10.0);
  const auto p = ratio_params(s.stats, s.model, rho);
  EXPECT_EQ(p.a1, 0.0);
  EXPECT_EQ(p.a3, 0.0);
  EXPECT_NEAR(p.a4 / (std::sqrt(rho) * s.model.beta_s2() / std::sqrt(s.stats.delta4)), 1.0, 1e-4);
  EXPECT_THROW(ratio_params(s.stats, s.model, 0.0), Error);
}

TEST(Alb, TaylorBoundDominatesCrlb) {
  // Below 0 dB the CRLB itself approaches the domain size while the Taylor
  // density keeps an SNR-independent Cauchy scale, so only the upper range is checked.
  for (const auto* s : {&baseband(), &passband()}) {
    for (double db : linspace(0.0, 45.0, 10)) {
      const double rho = db_to_linear(db);
      const auto t = taylor_alb(s->stats, s->model, baseband_domain(), rho);
      EXPECT_GE(t.mse, crlb(rho, s->model.beta_s2()) * (1.0 - 1e-6)) << db;
      EXPECT_LE(t.mse, max_mse(baseband_domain()) * 1.5) << db;
    }
  }
}

TEST(Alb, TaylorBoundTighterThanBlbInTheThresholdRegion) {
  const auto& s = baseband();
  const std::vector<double> tps{-4.0 * ns, -2.0 * ns, -1.0 * ns, 0.0, 1.0 * ns, 2.0 * ns, 3.0 * ns};
  for (double db : {6.0, 8.0, 10.0, 12.0}) {
    const double rho = db_to_linear(db);
    EXPECT_GE(taylor_alb(s.stats, s.model, baseband_domain(), rho).mse, blb(s.model, baseband_domain(), tps, rho).value)
        << db;
  }
}

TEST(Alb, MinimumErrorProbabilityLimits) {
  const auto& m = baseband().model;
  EXPECT_NEAR(pmin(m, 10.0, 1.0 * ns, 1.0 * ns), 0.5, 1e-15);
  EXPECT_NEAR(pmin(m, 1e-14, 1.0 * ns, 0.0), 0.5, 1e-6);
  EXPECT_LT(pmin(m, 100.0, 1.0 * ns, 0.0), 1e-6);
}

TEST(Alb, MinimumErrorProbabilityAgainstBinaryDetection) {
  // Decide between theta0 and theta0 + xi by comparing the two CCR samples.
  const auto& m = baseband().model;
  const double xi = 1.0 * ns, rho = db_to_linear(10.0);
  const double r = m.r(xi);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  const int n = 400000;
  long errors = 0;
  for (int k = 0; k < n; ++k) {
    const double w0 = nd(rng);
    const double w1 = r * w0 + std::sqrt(1.0 - r * r) * nd(rng);
    errors += (std::sqrt(rho) * r + w1 > std::sqrt(rho) + w0);
  }
  const double mc = static_cast<double>(errors) / n;
  EXPECT_NEAR(pmin(m, rho, xi, 0.0), mc, 4.0 * std::sqrt(mc * (1.0 - mc) / n));
}

TEST(Alb, ValleyFillExamples) {
  EXPECT_EQ(valley_fill({0.5, 0.3, 0.4, 0.1}), (std::vector<double>{0.5, 0.4, 0.4, 0.1}));
  EXPECT_EQ(valley_fill({0.1, 0.2, 0.3}), (std::vector<double>{0.3, 0.3, 0.3}));
  const std::vector<double> v{0.9, 0.2, 0.7, 0.05, 0.3, 0.0};
  const auto f = valley_fill(v);
  EXPECT_EQ(valley_fill(f), f);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_GE(f[i], v[i]);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_LE(f[i], f[i - 1]);
}

TEST(Alb, BinaryDetectionBoundsOrdering) {
  for (const auto* s : {&baseband(), &passband()}) {
    double prev_z = std::numeric_limits<double>::infinity(), prev_b = prev_z;
    for (double db : linspace(-10.0, 45.0, 12)) {
      const auto zz = zz_alb(s->model, baseband_domain(), db_to_linear(db));
      EXPECT_GE(zz.b1, zz.z1 * (1.0 - 1e-12));
      EXPECT_GE(zz.b2, zz.z2 * (1.0 - 1e-12));
      EXPECT_LE(zz.z1, prev_z * (1.0 + 1e-9));
      EXPECT_LE(zz.b1, prev_b * (1.0 + 1e-9));
      prev_z = zz.z1;
      prev_b = zz.b1;
    }
  }
}

TEST(Alb, BasebandBoundsCoincide) {
  // Pmin is already monotone without sidelobes, so valley filling changes nothing.
  for (double db : {-5.0, 10.0, 25.0}) {
    const auto zz = zz_alb(baseband().model, baseband_domain(), db_to_linear(db));
    EXPECT_NEAR(zz.b1 / zz.z1, 1.0, 1e-9);
  }
  const auto pz = zz_alb(passband().model, baseband_domain(), db_to_linear(14.0));
  EXPECT_GT(pz.b1, pz.z1 * 1.01);
}

TEST(Alb, BinaryDetectionBoundLimits) {
  const auto& m = baseband().model;
  const auto d = baseband_domain();
  // Pmin = 1/2 everywhere gives eps^2 / 4.
  const auto lo = zz_alb(m, d, 1e-14);
  const double eps1 = std::min(d.theta0 - d.theta1, 2.0 * (d.theta2 - d.theta0));
  EXPECT_NEAR(lo.z1 / (eps1 * eps1 / 4.0), 1.0, 1e-5);
  const double rho = db_to_linear(30.0);
  EXPECT_NEAR(zz_alb(m, d, rho).z1 / crlb(rho, m.beta_s2()), 1.0, 0.15);
}

TEST(Alb, ThetaZeroOnTheEdgeIsADomainError) {
  try {
    zz_alb(baseband().model, {0.0, 3.0 * ns, 0.0}, 10.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}
