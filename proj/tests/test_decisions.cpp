#include <gtest/gtest.h>

#include <sstream>

#include "calibloss/decisions.hpp"
#include "calibloss/random_laws.hpp"
#include "oracles.hpp"

using namespace calibloss;

namespace {

DecisionTask random_task(CounterRng& rng, std::size_t actions) {
  std::vector<DecisionTask::Action> list;
  for (std::size_t a = 0; a < actions; ++a) {
    list.push_back({std::to_string(a), rng.uniform(), rng.uniform()});
  }
  return DecisionTask(std::move(list));
}

/// Deterministic but arbitrary assignment of predictions to actions.
Response scrambled(std::size_t actions, std::uint64_t salt) {
  return Response::table(
      "scrambled",
      [actions, salt](double p) {
        const auto cell = static_cast<std::uint64_t>(std::floor(p * 37.0)) * 2654435761u + salt;
        return static_cast<double>((cell >> 7) % actions);
      },
      true);
}

std::vector<Observation> middle_third_sample(std::uint64_t seed, std::size_t count) {
  CounterRng rng(seed, streams::kSampling);
  std::vector<Observation> pts;
  for (std::size_t t = 0; t < count; ++t) {
    const double p = (1.0 + rng.uniform()) / 3.0;
    pts.push_back({p, rng.bernoulli(p) ? 1 : 0});
  }
  return pts;
}

}  // namespace

TEST(Task, ParsesFileAndRejectsBadRows) {
  std::istringstream good("action,u0,u1\nstay,1,0.35\n\ngo,0.65,1\n");
  const auto t = parse_task(good);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1].name, "go");
  EXPECT_DOUBLE_EQ(t.utility(1, 0), 0.65);

  std::istringstream no_header("stay,1,0\n");
  EXPECT_THROW(parse_task(no_header), Error);
  std::istringstream range("action,u0,u1\nx,1.5,0\n");
  try {
    parse_task(range);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "utility out of range, line 2");
  }
  std::istringstream empty("action,u0,u1\n");
  EXPECT_THROW(parse_task(empty), Error);
}

TEST(BestResponse, Examples) {
  const auto task = cost_sensitive_task(0.35);
  EXPECT_EQ(best_response(task, 0.5), 1u);
  EXPECT_EQ(best_response(task, 0.2), 0u);
  EXPECT_EQ(best_response(matching_task(), 0.5), 0u);
  for (int k = 0; k <= 100; ++k) {
    const double p = k / 100.0;
    if (std::abs(p - 0.35) > 1e-9) EXPECT_EQ(best_response(task, p), p > 0.35 ? 1u : 0u);
  }
}

TEST(SwapRegret, Examples) {
  const DiscreteDistribution umbrella({{0.2, 0.2, 0.5}, {0.8, 0.8, 0.5}});
  EXPECT_NEAR(swap_regret(matching_task(), Response::threshold(0.5), umbrella), 0.0, 1e-15);

  const auto task = cost_sensitive_task(0.35);
  const auto br = Response::best_response(task);
  EXPECT_NEAR(swap_regret(task, br, DiscreteDistribution({{0.2, 0.9, 1.0}})), 0.55, 1e-12);

  CounterRng rng(50, 0);
  for (int k = 0; k < 200; ++k) {
    EXPECT_NEAR(swap_regret(task, br, random_calibrated_distribution(rng, 8)), 0.0, 1e-12);
  }
  EXPECT_THROW(swap_regret(task, Response::identity(), umbrella), Error);
}

TEST(SwapRegret, MatchesEnumerationOfAllSwapMaps) {
  CounterRng rng(51, 0);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.below(4);
    const auto task = random_task(rng, n);
    const auto d = random_distribution(rng, 8);
    const GridSize m = GridSize{2} << rng.below(4);
    const std::vector<Response> responses{
        Response::best_response(task), scrambled(n, trial),
        Response::rounded(Response::best_response(task), m), Response::rounded(scrambled(n, trial), m)};
    for (const auto& r : responses) {
      ASSERT_NEAR(swap_regret(task, r, d), oracle::swap_regret(task, r, d), 1e-12) << r.name();
    }
  }
}

TEST(SwapRegretQuadratic, ConstantResponseExample) {
  const DiscreteDistribution d({{0.3, 0.6, 0.5}, {0.6, 0.8, 0.5}});
  const auto constant = Response::table("half", [](double) { return 0.5; }, false);
  EXPECT_NEAR(swap_regret_quadratic(d, constant), 0.04, 1e-15);
  CounterRng rng(52, 0);
  for (int k = 0; k < 100; ++k) {
    EXPECT_NEAR(swap_regret_quadratic(random_calibrated_distribution(rng, 8), Response::identity()),
                0.0, 1e-15);
  }
}

TEST(SwapRegretQuadratic, AgreesWithFiniteTaskContainingTheBestSwaps) {
  // Actions: realized values plus their conditional means, U(a, y) = 1 - (a - y)^2.
  CounterRng rng(53, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = random_distribution(rng, 8);
    const GridSize m = 1 + rng.below(12);
    const auto quad = Response::nearest_grid(m);
    const auto law = action_outcome_law(quad, d);
    std::vector<double> values;
    for (const auto& [a, cell] : law.by_action) {
      values.push_back(a);
      values.push_back(cell.second / cell.first);
    }
    std::vector<DecisionTask::Action> actions;
    for (const double v : values) actions.push_back({"", 1.0 - v * v, 1.0 - (1.0 - v) * (1.0 - v)});
    const DecisionTask task(actions);
    std::map<double, double> index;
    for (std::size_t k = 0; k < values.size(); k += 2) index[values[k]] = static_cast<double>(k);
    const auto finite = Response::table(
        "indexed", [&quad, index](double p) { return index.at(quad(p).front().action); }, true);
    ASSERT_NEAR(swap_regret(task, finite, d), swap_regret_quadratic(d, quad), 1e-10);
  }
}

TEST(SwapRegretQuadratic, MiddleThirdIdentityRegretStaysLargeWhileScdlIsSmall) {
  const double target = 13.0 / 54.0;
  double regret_sum = 0.0, scdl_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const EmpiricalSample sample(middle_third_sample(seed, 1000));
    const double regret = swap_regret_quadratic(from_sample(sample), Response::identity());
    EXPECT_GE(regret, 1.0 / 9.0);
    regret_sum += regret;
    scdl_sum += scdl_of_sample(sample).value;
  }
  EXPECT_NEAR(regret_sum / 50.0, target, 0.02);
  EXPECT_LE(scdl_sum / 50.0, 0.1);
}

TEST(Actionability, Examples) {
  const DiscreteDistribution grid({{0.0, 0.0, 0.25}, {0.5, 0.5, 0.5}, {1.0, 1.0, 0.25}});
  for (GridSize m = 2; m <= 64; m *= 2) {
    const auto r = check_actionability(grid, m);
    EXPECT_EQ(r.lower, 0.0);
    EXPECT_TRUE(r.pass);
  }
  const auto r = check_actionability(DiscreteDistribution({{0.25, 1.0, 1.0}}), 2);
  EXPECT_DOUBLE_EQ(r.upper, 1.5);
  EXPECT_DOUBLE_EQ(r.lower, vmax(DiscreteDistribution({{0.0, 1.0, 0.5}, {0.5, 1.0, 0.5}})).value);
  EXPECT_TRUE(r.pass);
  EXPECT_THROW(check_actionability(grid, 3), Error);
}

TEST(Actionability, HoldsOnRandomLawsAndResolutions) {
  CounterRng rng(54, 0);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_distribution(rng, 8);
    for (GridSize m = 2; m <= 64; m *= 2) violations += !check_actionability(d, m).pass;
  }
  EXPECT_EQ(violations, 0);
}

TEST(Actionability, RoundedBestResponseRegretIsBoundedByCdlOfRoundedLaw) {
  // Best-response swap regret of any task on the rounded law is at most
  // 2 vmax of that law, which the actionability bound in turn controls.
  CounterRng rng(55, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const auto d = random_distribution(rng, 8);
    const auto task = random_task(rng, 1 + rng.below(4));
    const GridSize m = GridSize{2} << rng.below(5);
    const double regret = swap_regret(task, Response::rounded(Response::best_response(task), m), d);
    const auto a = check_actionability(d, m);
    EXPECT_LE(regret, 2.0 * a.lower + 1e-10);
    EXPECT_LE(regret, 2.0 * a.upper + 1e-10);
  }
}

TEST(GapSmce, EqualSmoothErrorsAndUnavoidableRegret) {
  const auto gap = gap_smce(0.01);
  EXPECT_NEAR(smce(gap.first).value, 0.01, 1e-9);
  EXPECT_NEAR(smce(gap.second).value, 0.01, 1e-9);
  for (int k = 0; k <= 200; ++k) {
    const auto r = Response::threshold(k / 200.0);
    const double worst =
        std::max(swap_regret(gap.task, r, gap.first), swap_regret(gap.task, r, gap.second));
    EXPECT_GE(worst, 0.25 * std::sqrt(0.01) - 1e-12) << r.name();
  }
  const auto tiny = gap_smce(1e-8);
  for (const auto& pt : tiny.first.support()) EXPECT_NEAR(pt.p, 0.5, 1e-3);
  EXPECT_THROW(gap_smce(0.5), Error);
}

TEST(GapCutoff, ConstructionValues) {
  const double eps = 0.001;
  const auto g = gap_cutoff(eps, Response::identity());
  EXPECT_EQ(g.points, 10u);
  EXPECT_NEAR(g.oscillating.cutoff, eps, 1e-12);
  EXPECT_NEAR(g.oscillating.regret, 10.0 * eps / 3.0, 1e-12);
  EXPECT_GE(g.regret, std::pow(eps, 2.0 / 3.0) / 4.0);
  EXPECT_EQ(cube_root_floor_inverse(1e-3), 10u);
  EXPECT_EQ(cube_root_floor_inverse(0.008), 5u);
  EXPECT_THROW(gap_cutoff(0.5, Response::identity()), Error);
}
