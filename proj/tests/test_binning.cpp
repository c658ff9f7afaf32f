#include <gtest/gtest.h>

#include "calibloss/binning.hpp"
#include "calibloss/random_laws.hpp"
#include "oracles.hpp"

using namespace calibloss;

TEST(TentWeight, Examples) {
  EXPECT_DOUBLE_EQ(tent_weight(2, 0, 0.25), 0.5);
  EXPECT_DOUBLE_EQ(tent_weight(2, 1, 0.25), 0.5);
  EXPECT_DOUBLE_EQ(tent_weight(2, 2, 0.25), 0.0);
  EXPECT_DOUBLE_EQ(tent_weight(4, 4, 1.0), 1.0);
  for (GridSize i = 0; i < 4; ++i) EXPECT_EQ(tent_weight(4, i, 1.0), 0.0);
  EXPECT_NEAR(tent_weight(8, 3, 0.4), 0.8, 1e-15);
  EXPECT_THROW(tent_weight(4, 5, 0.5), Error);
}

TEST(TentWeight, PartitionOfUnityIsExact) {
  CounterRng rng(1, 0);
  for (int trial = 0; trial < 20000; ++trial) {
    const double p = trial < 10 ? trial / 9.0 : rng.uniform();
    const GridSize m = 1 + rng.below(1000);
    const auto loc = locate(p, m);
    double sum = 0.0;
    for (GridSize i = loc.lower; i <= std::min(m, loc.lower + 1); ++i) sum += tent_weight(m, i, p);
    ASSERT_EQ(sum, 1.0) << "p=" << p << " m=" << m;
  }
}

TEST(TentWeight, MatchesFormulaOracle) {
  CounterRng rng(2, 0);
  for (int trial = 0; trial < 5000; ++trial) {
    const double p = rng.uniform();
    const GridSize m = 1 + rng.below(64);
    for (GridSize i = 0; i <= m; ++i) {
      ASSERT_NEAR(tent_weight(m, i, p), oracle::tent(m, i, p), 1e-12);
    }
  }
}

TEST(BinSummary, Examples) {
  const auto a = bin_summary(DiscreteDistribution({{0.25, 1.0, 1.0}}), 2);
  EXPECT_EQ(a.pi, (std::vector<double>{0.5, 0.5, 0.0}));
  EXPECT_EQ(a.q[0], 1.0);
  EXPECT_EQ(a.q[1], 1.0);
  EXPECT_FALSE(a.q[2].has_value());

  const auto b = bin_summary(DiscreteDistribution({{0.5, 0.5, 1.0}}), 2);
  EXPECT_EQ(b.pi, (std::vector<double>{0.0, 1.0, 0.0}));
  EXPECT_EQ(b.q[1], 0.5);
}

TEST(BinSummary, MassSumsToOneAndMeansInRange) {
  CounterRng rng(3, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = random_distribution(rng, 8);
    const GridSize m = 1 + rng.below(50);
    const auto s = bin_summary(d, m);
    double total = 0.0;
    for (GridSize i = 0; i <= m; ++i) {
      EXPECT_GE(s.pi[i], 0.0);
      total += s.pi[i];
      if (s.pi[i] > 0.0) {
        ASSERT_TRUE(s.q[i].has_value());
        EXPECT_GE(*s.q[i], 0.0);
        EXPECT_LE(*s.q[i], 1.0);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(BinSummary, MatchesDenseOracle) {
  CounterRng rng(4, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = random_distribution(rng, 8);
    const GridSize m = 1 + rng.below(40);
    const auto s = bin_summary(d, m);
    const auto o = oracle::dense_bins(d, m);
    for (GridSize i = 0; i <= m; ++i) {
      ASSERT_NEAR(s.pi[i], o.pi[i], 1e-12);
      if (o.pi[i] > 1e-9) ASSERT_NEAR(*s.q[i], o.q[i], 1e-9);
    }
  }
}

TEST(BinSummary, RefinementIdentity) {
  // pi_m[i] = pi_2m[2i] + (pi_2m[2i-1] + pi_2m[2i+1]) / 2. Dyadic inputs
  // keep every product exact.
  CounterRng rng(5, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = random_dyadic_distribution(rng, 8);
    for (GridSize m = 1; m <= 64; m *= 2) {
      const auto coarse = bin_summary(d, m);
      const auto fine = bin_summary(d, 2 * m);
      for (GridSize i = 0; i <= m; ++i) {
        double expect = fine.pi[2 * i];
        if (i > 0) expect += 0.5 * fine.pi[2 * i - 1];
        if (i < m) expect += 0.5 * fine.pi[2 * i + 1];
        ASSERT_EQ(coarse.pi[i], expect) << "m=" << m << " i=" << i;
      }
    }
  }
}

TEST(RoundPrediction, OnGridAndBoundary) {
  CounterRng rng(6, 0);
  for (int k = 0; k < 1000; ++k) {
    ASSERT_EQ(round_prediction(3.0 / 8.0, 8, rng), 3.0 / 8.0);
    ASSERT_EQ(round_prediction(1.0, 7, rng), 1.0);
    ASSERT_EQ(round_prediction(0.0, 7, rng), 0.0);
  }
  EXPECT_THROW(round_prediction(1.5, 4, rng), Error);
}

TEST(RoundPrediction, UnbiasedQuarter) {
  CounterRng rng(7, streams::kRounding);
  double sum = 0.0;
  int ups = 0;
  for (int k = 0; k < 100000; ++k) {
    const double r = round_prediction(0.25, 2, rng);
    ASSERT_TRUE(r == 0.0 || r == 0.5);
    sum += r;
    ups += r == 0.5;
  }
  EXPECT_NEAR(sum / 100000.0, 0.25, 0.005);
  EXPECT_NEAR(ups / 100000.0, 0.5, 0.01);
}

TEST(RoundPrediction, MonteCarloMatchesSoftBins) {
  // Empirical (pi_i, q_i) from repeated rounding agree with bin_summary
  // within 4 standard errors at 10^5 draws.
  CounterRng rng(8, 0);
  CounterRng draw(8, streams::kRounding);
  for (int trial = 0; trial < 6; ++trial) {
    const auto d = random_distribution(rng, 5);
    const GridSize m = GridSize{2} << rng.below(3);
    const auto s = bin_summary(d, m);
    std::vector<double> mass(m + 1, 0.0), ones(m + 1, 0.0);
    const int draws = 100000;
    const auto sup = d.support();
    for (int t = 0; t < draws; ++t) {
      double u = draw.uniform();
      std::size_t k = 0;
      while (k + 1 < sup.size() && u >= sup[k].w) u -= sup[k++].w;
      const double r = round_prediction(sup[k].p, m, draw);
      const auto i = static_cast<std::size_t>(std::llround(r * static_cast<double>(m)));
      mass[i] += 1.0;
      ones[i] += draw.bernoulli(sup[k].q) ? 1.0 : 0.0;
    }
    for (GridSize i = 0; i <= m; ++i) {
      const double pi = s.pi[i];
      const double se = std::sqrt(std::max(pi * (1 - pi), 1e-12) / draws);
      ASSERT_NEAR(mass[i] / draws, pi, 4 * se + 1e-12);
      if (mass[i] > 1000) {
        const double q = *s.q[i];
        const double se_q = std::sqrt(std::max(q * (1 - q), 1e-12) / mass[i]);
        ASSERT_NEAR(ones[i] / mass[i], q, 4 * se_q + 1e-9);
      }
    }
  }
}

TEST(RoundDistribution, Examples) {
  const auto r = round_distribution(DiscreteDistribution({{0.25, 1.0, 1.0}}), 2);
  EXPECT_EQ(r, DiscreteDistribution({{0.0, 1.0, 0.5}, {0.5, 1.0, 0.5}}));

  const DiscreteDistribution on_grid({{0.0, 0.0, 0.25}, {0.5, 0.5, 0.25}, {1.0, 1.0, 0.5}});
  EXPECT_EQ(round_distribution(on_grid, 4), on_grid);
}

TEST(RoundDistribution, PreservesBinSummary) {
  CounterRng rng(9, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = random_distribution(rng, 8);
    const GridSize m = 1 + rng.below(32);
    const auto a = bin_summary(d, m);
    const auto b = bin_summary(round_distribution(d, m), m);
    for (GridSize i = 0; i <= m; ++i) {
      ASSERT_NEAR(a.pi[i], b.pi[i], 1e-12);
      if (a.pi[i] > 1e-9) ASSERT_NEAR(*a.q[i], *b.q[i], 1e-9);
    }
  }
}
