#include <gtest/gtest.h>

#include <mlelab/classic_bounds.hpp>
#include <mlelab/mie.hpp>

#include "test_support.hpp"

using namespace mlelab;
using namespace mlelab::test;

namespace {

// Direct, unscaled Barankin matrix. Partial pivoting, since a rank-revealing
// LU would drop the O(1) rows next to the huge Fisher entry.
double blb_direct(const AcrModel& m, double th, const std::vector<double>& others, double rho) {
  const auto n = static_cast<Eigen::Index>(others.size() + 1);
  Eigen::MatrixXd D(n, n);
  Eigen::VectorXd T(n);
  D(0, 0) = rho * m.beta_s2();
  T(0) = 1.0;
  for (Eigen::Index k = 1; k < n; ++k) {
    const double tk = others[static_cast<std::size_t>(k - 1)];
    T(k) = tk - th;
    D(0, k) = D(k, 0) = rho * m.rdot(th - tk);
    for (Eigen::Index l = 1; l < n; ++l) {
      const double tl = others[static_cast<std::size_t>(l - 1)];
      D(k, l) = std::expm1(rho * (m.r(tk - tl) - m.r(tk - th) - m.r(tl - th) + 1.0));
    }
  }
  return T.dot(D.partialPivLu().solve(T));
}

}  // namespace

TEST(ClassicBounds, CrlbArithmetic) {
  EXPECT_DOUBLE_EQ(crlb(10.0, 2.0), 0.05);
  EXPECT_DOUBLE_EQ(ecrlb(4.0, 0.5), 0.5);
  EXPECT_THROW(crlb(0.0, 1.0), Error);
  EXPECT_THROW(ecrlb(1.0, -1.0), Error);
  const auto& s = passband();
  EXPECT_LT(crlb(10.0, s.model.beta_s2()), ecrlb(10.0, s.model.beta_e2()));
}

TEST(ClassicBounds, MaxMseExamples) {
  EXPECT_DOUBLE_EQ(max_mse({-1.0, 1.0, 0.0}), 4.0 / 12.0);
  EXPECT_DOUBLE_EQ(max_mse({0.0, 1.0, 0.0}), 1.0 / 3.0);
  EXPECT_NEAR(max_mse({-4.0, 3.0, 0.0}), 49.0 / 12.0 + 0.25, 1e-12);
}

TEST(ClassicBounds, BlbWithOnlyTrueValueIsCrlb) {
  const auto& s = baseband();
  for (double db : {-10.0, 0.0, 20.0, 45.0}) {
    const double rho = db_to_linear(db);
    EXPECT_NEAR(blb(s.model, baseband_domain(), {0.0}, rho).value / crlb(rho, s.model.beta_s2()), 1.0, 1e-10);
  }
}

TEST(ClassicBounds, BlbMatchesDirectSolve) {
  const auto& s = passband();
  const auto part = make_partition(s.model, baseband_domain(), PartitionMode::oscillating);
  std::vector<double> others;
  for (std::size_t k = 0; k < part.size(); k += 6)
    if (k != part.center) others.push_back(part.testpoints[k]);
  others.push_back(part.testpoints[part.center + 1]);
  std::vector<double> tps{0.0};
  tps.insert(tps.end(), others.begin(), others.end());
  for (double db : {0.0, 5.0, 10.0}) {
    const double rho = db_to_linear(db);
    const auto r = blb(s.model, baseband_domain(), tps, rho);
    EXPECT_NEAR(r.value / blb_direct(s.model, 0.0, others, rho), 1.0, 1e-8) << db;
  }
}

TEST(ClassicBounds, BlbDominatesCrlbAndGrowsWithTestpoints) {
  const auto& s = baseband();
  const auto part = make_partition(s.model, baseband_domain(), PartitionMode::non_oscillating);
  for (double db : linspace(-10.0, 45.0, 12)) {
    const double rho = db_to_linear(db);
    const double c = crlb(rho, s.model.beta_s2());
    std::vector<double> tps{0.0};
    double prev = blb(s.model, baseband_domain(), tps, rho).value;
    for (std::size_t k = 0; k < part.size(); ++k) {
      if (k == part.center) continue;
      tps.push_back(part.testpoints[k]);
      const double v = blb(s.model, baseband_domain(), tps, rho).value;
      EXPECT_GE(v, prev * (1.0 - 1e-9)) << db;
      prev = v;
    }
    EXPECT_GE(prev, c * (1.0 - 1e-9));
  }
}

TEST(ClassicBounds, SymmetricTestpointsGiveAntisymmetricWeights) {
  const auto& s = baseband();
  const DomainSpec d{-3.0 * ns, 3.0 * ns, 0.0};
  const std::vector<double> tps{-2.0 * ns, -1.0 * ns, 0.0, 1.0 * ns, 2.0 * ns};
  const auto r = blb(s.model, d, tps, db_to_linear(5.0));
  const double scale = std::abs(r.weights[0]) + std::abs(r.weights[1]);
  EXPECT_NEAR(r.weights[0] + r.weights[4], 0.0, 1e-8 * scale);
  EXPECT_NEAR(r.weights[1] + r.weights[3], 0.0, 1e-8 * scale);
}

TEST(ClassicBounds, HighSnrBlbApproachesCrlb) {
  const auto& s = passband();
  const auto part = make_partition(s.model, baseband_domain(), PartitionMode::oscillating);
  const double rho = db_to_linear(45.0);
  EXPECT_NEAR(blb(s.model, baseband_domain(), part.testpoints, rho).value / crlb(rho, s.model.beta_s2()), 1.0, 0.01);
}

TEST(ClassicBounds, TestpointOutsideDomainIsRejected) {
  const auto& s = baseband();
  try {
    blb(s.model, baseband_domain(), {0.0, 3.5 * ns}, 10.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::argument);
  }
  EXPECT_THROW(blb(s.model, baseband_domain(), {1.0 * ns}, 10.0), Error);
}
