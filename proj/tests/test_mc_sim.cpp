#include <gtest/gtest.h>

#include <mlelab/classic_bounds.hpp>
#include <mlelab/mc_sim.hpp>

#include "test_support.hpp"

using namespace mlelab;
using namespace mlelab::test;

namespace {

SimConfig base_config(const SignalSetup& s, const DomainSpec& d) {
  SimConfig c;
  c.model = s.model;
  c.domain = d;
  c.rho = {db_to_linear(0.0), db_to_linear(10.0), db_to_linear(20.0)};
  c.trials = 400;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(McSim, DeterministicAcrossRunsAndThreads) {
  auto c = base_config(setup(0.6, 8.0, narrow_domain()), narrow_domain());
  c.keep_samples = true;
  const auto a = simulate(c);
  const auto b = simulate(c);
  c.threads = 3;
  const auto t = simulate(c);
  for (std::size_t j = 0; j < c.rho.size(); ++j) {
    EXPECT_EQ(a.points[j].samples, b.points[j].samples);
    EXPECT_EQ(a.points[j].samples, t.points[j].samples);
    EXPECT_EQ(a.points[j].mse, t.points[j].mse);
  }
  c.seed = 4;
  EXPECT_NE(simulate(c).points[0].samples, a.points[0].samples);
}

TEST(McSim, HitsCoverAllTrials) {
  const auto& s = setup(0.6, 8.0, narrow_domain());
  auto c = base_config(s, narrow_domain());
  c.partition = make_partition(s.model, narrow_domain(), PartitionMode::oscillating);
  const auto r = simulate(c);
  for (const auto& pt : r.points) {
    long total = 0;
    for (long h : pt.hits) total += h;
    EXPECT_EQ(total, c.trials);
    EXPECT_LE(pt.mse, narrow_domain().width() * narrow_domain().width());
    double p = 0.0;
    for (double v : empirical_interval_probs(pt, c.trials)) p += v;
    EXPECT_NEAR(p, 1.0, 1e-12);
  }
}

TEST(McSim, NoiseHasModelCovariance) {
  const auto& s = passband();
  const auto grid = linspace(-1.0 * ns, 1.0 * ns, 9);
  const CcrNoise noise(s.model, grid);
  const int n = 4000;
  std::vector<double> s0(grid.size(), 0.0), s01(grid.size(), 0.0);
  for (int k = 0; k < n; ++k) {
    const auto x = noise.draw(derive_seed(11, static_cast<std::uint64_t>(k)));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      s0[i] += x[i] * x[i];
      s01[i] += x[i] * x[4];
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(s0[i] / n, 1.0, 0.05) << i;
    EXPECT_NEAR(s01[i] / n, s.model.r(grid[i] - grid[4]), 0.06) << i;
  }
}

TEST(McSim, RejectsBadInputs) {
  auto c = base_config(baseband(), baseband_domain());
  c.trials = 50;
  EXPECT_THROW(simulate(c), Error);
  c.trials = 200;
  c.grid_points = 20;
  try {
    simulate(c);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::argument);
  }
  c.grid_points = 0;
  c.rho = {};
  EXPECT_THROW(simulate(c), Error);
}

TEST(McSim, LowSnrSpreadsEstimatesByIntervalWidth) {
  const auto& s = setup(0.6, 8.0, narrow_domain());
  auto c = base_config(s, narrow_domain());
  c.rho = {db_to_linear(-40.0)};
  c.trials = 4000;
  c.partition = make_partition(s.model, narrow_domain(), PartitionMode::oscillating);
  const auto pt = simulate(c).points[0];
  const auto& part = *c.partition;
  for (std::size_t k = 0; k < part.size(); ++k) {
    // The domain ends pull extra mass, so only interior intervals are compared.
    if (part.edge[k]) continue;
    const double p = part.width(k) / narrow_domain().width();
    const double sd = std::sqrt(p * (1.0 - p) / c.trials);
    EXPECT_NEAR(static_cast<double>(pt.hits[k]) / c.trials, p, 3.5 * sd) << k;
  }
}

TEST(McSim, HighSnrMatchesCrlb) {
  const auto& s = baseband();
  auto c = base_config(s, baseband_domain());
  c.rho = {db_to_linear(26.0), db_to_linear(35.0)};
  c.trials = 2000;
  const auto r = simulate(c);
  for (const auto& pt : r.points) {
    const double ratio = pt.mse / crlb(pt.rho, s.model.beta_s2());
    EXPECT_GT(ratio, 0.85);
    EXPECT_LT(ratio, 1.2);
  }
}

TEST(McSim, MseDecreasesWithSnr) {
  const auto& s = baseband();
  auto c = base_config(s, baseband_domain());
  c.rho.clear();
  for (double db : linspace(-10.0, 30.0, 9)) c.rho.push_back(db_to_linear(db));
  c.trials = 1000;
  const auto r = simulate(c);
  for (std::size_t j = 1; j < r.points.size(); ++j) {
    // Common noise across SNRs keeps the comparison tight; allow 3 sigma of slack.
    const double prev = r.points[j - 1].mse;
    EXPECT_LE(r.points[j].mse, prev * (1.0 + 3.0 * std::sqrt(2.0 / c.trials))) << j;
  }
}
