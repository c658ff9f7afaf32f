#include <gtest/gtest.h>

#include "calibloss/baselines.hpp"
#include "calibloss/random_laws.hpp"
#include "calibloss/scdl.hpp"
#include "oracles.hpp"

using namespace calibloss;

namespace {

BinSummary quarter_summary() {
  BinSummary s;
  s.m = 2;
  s.pi = {0.5, 0.5, 0.0};
  s.q = {1.0, 1.0, std::nullopt};
  return s;
}

}  // namespace

TEST(Scfdl, Examples) {
  EXPECT_DOUBLE_EQ(scfdl(quarter_summary(), 0), 0.25);
  EXPECT_DOUBLE_EQ(scfdl(quarter_summary(), 1), 0.0);
  EXPECT_THROW(scfdl(quarter_summary(), 3), Error);

  BinSummary calibrated;
  calibrated.m = 4;
  calibrated.pi = {0.2, 0.2, 0.2, 0.2, 0.2};
  for (int i = 0; i <= 4; ++i) calibrated.q.push_back(i / 4.0);
  for (GridSize i = 0; i <= 4; ++i) EXPECT_EQ(scfdl(calibrated, i), 0.0);
}

TEST(ScdlM, Examples) {
  const DiscreteDistribution d({{0.25, 1.0, 1.0}});
  EXPECT_DOUBLE_EQ(scdl_m(d, 2), 0.25);
  EXPECT_DOUBLE_EQ(scdl_m(d, 4), 0.5);
  EXPECT_DOUBLE_EQ(scdl_m(d, 8), 0.625);
  for (GridSize m = 1; m <= 1024; m *= 2) {
    EXPECT_EQ(scdl_m(DiscreteDistribution({{0.5, 0.5, 1.0}}), m), 0.0);
  }
}

TEST(ScdlM, FastPathMatchesDenseOracle) {
  CounterRng rng(10, 0);
  for (int trial = 0; trial < 1500; ++trial) {
    const auto d = random_distribution(rng, 10);
    const GridSize m = 1 + rng.below(70);
    ASSERT_NEAR(scdl_m(d, m), oracle::scdl_m(d, m), 1e-12) << to_json(d).dump() << " m=" << m;
  }
}

TEST(ScdlM, FastPathMatchesLibraryDenseRoute) {
  CounterRng rng(11, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = random_distribution(rng, 6);
    const GridSize m = 1 + rng.below(40);
    const auto dense = bin_summary(d, m);
    double best = 0.0;
    for (GridSize i = 0; i <= m; ++i) best = std::max(best, scfdl(dense, i));
    ASSERT_NEAR(scdl_m(d, m), best, 1e-12);
  }
}

TEST(ScdlM, MonotoneUnderDoubling) {
  CounterRng rng(12, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_distribution(rng, 8);
    for (unsigned k = 1; k <= 8; ++k) {
      ASSERT_GE(scdl_m(d, GridSize{2} << k), scdl_m(d, GridSize{1} << k) - 1e-12);
    }
  }
}

TEST(ScdlM, BoundedByTwiceVShapeSupremum) {
  CounterRng rng(13, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_distribution(rng, 8);
    const double bound = 2.0 * vmax(d).value;
    for (GridSize m = 2; m <= 4096; m *= 2) ASSERT_LE(scdl_m(d, m), bound + 1e-12);
  }
}

TEST(Scdl, Examples) {
  const auto r = scdl(DiscreteDistribution({{0.25, 1.0, 1.0}}));
  EXPECT_DOUBLE_EQ(r.value, 0.5);
  ASSERT_TRUE(r.m_star.has_value());
  EXPECT_EQ(*r.m_star, 2u);
  EXPECT_TRUE(r.converged);

  const auto c = scdl(DiscreteDistribution({{0.5, 0.5, 1.0}}));
  EXPECT_EQ(c.value, 0.0);
  EXPECT_FALSE(c.m_star.has_value());
  EXPECT_TRUE(c.converged);
  EXPECT_THROW(scdl(DiscreteDistribution({{0.5, 0.5, 1.0}}), ScdlOptions{0}), Error);
}

TEST(Scdl, OptimalBinsSandwich) {
  CounterRng rng(14, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_distribution(rng, 8);
    const auto r = scdl(d);
    ASSERT_TRUE(r.m_star.has_value()) << to_json(d).dump();
    const double ms = static_cast<double>(*r.m_star);
    EXPECT_TRUE(is_power_of_two(*r.m_star));
    EXPECT_GE(r.value, 1.0 / ms - 1e-12);
    EXPECT_LT(r.value, 2.0 / ms);
    EXPECT_GE(scdl_m(d, 2 * *r.m_star), r.value - 1e-12);
    for (std::size_t k = 1; k < r.per_m.size(); ++k) {
      EXPECT_GE(r.per_m[k].second, r.per_m[k - 1].second - 1e-12);
    }
  }
}

TEST(Scdl, ValueIsTheInfimumOverEvaluatedResolutions) {
  // Brute force over m = 2..64 with the dense oracle; covers 2 m* when m* <= 32.
  CounterRng rng(15, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto d = random_distribution(rng, 6);
    double best = 1e300;
    for (GridSize m = 2; m <= 64; m *= 2) {
      best = std::min(best, std::max(oracle::scdl_m(d, m), 1.0 / static_cast<double>(m)));
    }
    const auto r = scdl(d);
    if (*r.m_star <= 32) EXPECT_NEAR(r.value, best, 1e-12) << to_json(d).dump();
  }
}

TEST(Scdl, ZeroExactlyWhenCalibrated) {
  CounterRng rng(16, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto cal = random_calibrated_distribution(rng, 8);
    const auto r = scdl(cal);
    EXPECT_EQ(r.value, 0.0) << to_json(cal).dump();
    EXPECT_TRUE(r.converged);
    EXPECT_FALSE(r.m_star.has_value());

    const auto mis = random_distribution(rng, 8);
    if (!mis.is_calibrated()) EXPECT_GT(scdl(mis).value, 0.0);
  }
}

TEST(Scdl, ZeroIffSmoothCalibrationErrorZero) {
  CounterRng rng(17, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = trial % 2 ? random_calibrated_distribution(rng, 6) : random_distribution(rng, 6);
    EXPECT_EQ(scdl(d).value == 0.0, smce(d).value == 0.0);
  }
}

TEST(Scdl, MonitoredConsistencyBound) {
  CounterRng rng(18, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = random_distribution(rng, 8);
    EXPECT_LE(scdl(d).value, 8.0 * std::sqrt(smce(d).value) + 1e-12);
  }
}

TEST(Scdl, MonitoredContinuity) {
  CounterRng rng(19, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = random_distribution(rng, 8);
    const double base = scdl(d).value;
    for (const double delta : {1e-4, 1e-3, 1e-2}) {
      std::vector<SupportPoint> shifted;
      for (const auto& pt : d.support()) {
        shifted.push_back({std::clamp(pt.p + delta, 0.0, 1.0), pt.q, pt.w});
      }
      const double moved = scdl(DiscreteDistribution(shifted)).value;
      EXPECT_LE(std::abs(base * base - moved * moved), 64.0 * delta);
    }
  }
}

TEST(Scdl, UnconvergedAtCapReportsCapFloor) {
  // With the cap at m = 2 no doubled resolution can be inspected.
  ScdlOptions opt;
  opt.cap_exponent = 1;
  const auto r = scdl(DiscreteDistribution({{0.25, 1.0, 1.0}}), opt);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.m_star.has_value());
  EXPECT_DOUBLE_EQ(r.value, 0.5);
}

TEST(ScdlOfSample, Examples) {
  std::vector<Observation> half;
  for (int k = 0; k < 10; ++k) half.push_back({0.5, k % 2});
  EXPECT_EQ(scdl_of_sample(EmpiricalSample(half)).value, 0.0);

  CounterRng rng(20, 0);
  std::vector<Observation> pts;
  for (int k = 0; k < 300; ++k) pts.push_back({rng.uniform(), rng.bernoulli(0.5) ? 1 : 0});
  auto doubled = pts;
  doubled.insert(doubled.end(), pts.begin(), pts.end());
  EXPECT_EQ(scdl_of_sample(EmpiricalSample(pts), 15).value,
            scdl_of_sample(EmpiricalSample(doubled), 15).value);
  EXPECT_EQ(default_cap_exponent(1000), 16u);
  EXPECT_EQ(default_cap_exponent(1024), 16u);
}

TEST(ScdlOfSample, SmallOnMiddleThirdSamplesWithHighProbability) {
  int small = 0;
  const int seeds = 100;
  for (int seed = 0; seed < seeds; ++seed) {
    CounterRng rng(static_cast<std::uint64_t>(seed), streams::kSampling);
    std::vector<Observation> pts;
    for (int t = 0; t < 1000; ++t) {
      const double p = (1.0 + rng.uniform()) / 3.0;
      pts.push_back({p, rng.bernoulli(p) ? 1 : 0});
    }
    small += scdl_of_sample(EmpiricalSample(pts)).value <= 0.15;
  }
  EXPECT_GE(small, 95);
}
