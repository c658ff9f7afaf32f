#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "calibloss/baselines.hpp"
#include "calibloss/binning.hpp"
#include "calibloss/decisions.hpp"
#include "calibloss/random_laws.hpp"
#include "calibloss/scdl.hpp"

namespace calibloss {

/// Replaceable pieces of the library, so a planted bug can be shown to trip
/// the suite. Empty members use the library implementation.
struct SelftestHooks {
  std::function<double(const DiscreteDistribution&, GridSize)> scdl_m;
};

struct SelftestOptions {
  std::uint64_t seed = 1;
  std::size_t distributions = 1000;
  /// Laws and draws per law for the tent-weight Monte Carlo check.
  std::size_t rounding_laws = 40;
  std::size_t rounding_draws = 20000;
  double tolerance = 1e-10;
  SelftestHooks hooks;
};

struct InvariantResult {
  std::string lemma;
  std::size_t cases = 0;
  bool passed = true;
  std::string detail;
  /// First violating distribution, serialized.
  std::optional<Json> counterexample;
};

struct SelftestResult {
  std::vector<InvariantResult> invariants;
  bool passed() const {
    for (const auto& r : invariants) {
      if (!r.passed) return false;
    }
    return true;
  }
};

namespace detail {

inline void record(InvariantResult& r, bool ok, const DiscreteDistribution& dist,
                   const std::string& detail) {
  ++r.cases;
  if (ok || !r.passed) return;
  r.passed = false;
  r.detail = detail;
  r.counterexample = to_json(dist);
}

inline std::string describe(std::initializer_list<std::pair<const char*, double>> values) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [name, v] : values) {
    os << (first ? "" : ", ") << name << "=" << v;
    first = false;
  }
  return os.str();
}

}  // namespace detail

inline SelftestResult run_selftest(const SelftestOptions& opt) {
  const auto eval_scdl_m = [&](const DiscreteDistribution& d, GridSize m) {
    return opt.hooks.scdl_m ? opt.hooks.scdl_m(d, m) : scdl_m(d, m);
  };
  const double tol = opt.tolerance;

  InvariantResult mono{"Lemma SCDL_2m >= SCDL_m"};
  InvariantResult bins{"Lemma optimal number of bins: SCDL in [1/m*, 2/m*)"};
  InvariantResult below_cdl{"Lemma SCDL_m <= CDL"};
  InvariantResult sandwich{"Lemma ECE^2 <= CDL <= 2 ECE"};
  InvariantResult action{"Theorem SCDL is actionable"};
  InvariantResult tent{"Lemma tent weights equal rounding probabilities"};

  CounterRng rng(opt.seed, streams::kSelftest);
  for (std::size_t n = 0; n < opt.distributions; ++n) {
    const auto dist = random_distribution(rng, 8);
    const double v = vmax(dist).value;
    const double e = ece(dist);

    double prev = eval_scdl_m(dist, 2);
    detail::record(below_cdl, prev <= 2.0 * v + tol, dist,
                   detail::describe({{"m", 2}, {"scdl_m", prev}, {"2*vmax", 2.0 * v}}));
    for (GridSize m = 4; m <= 1024; m *= 2) {
      const double here = eval_scdl_m(dist, m);
      detail::record(mono, here >= prev - tol, dist,
                     detail::describe({{"m", static_cast<double>(m)},
                                       {"scdl_m/2", prev},
                                       {"scdl_m", here}}));
      detail::record(below_cdl, here <= 2.0 * v + tol, dist,
                     detail::describe({{"m", static_cast<double>(m)},
                                       {"scdl_m", here},
                                       {"2*vmax", 2.0 * v}}));
      prev = here;
    }

    const auto s = scdl_with(dist, ScdlOptions{}, eval_scdl_m);
    if (s.m_star) {
      const double ms = static_cast<double>(*s.m_star);
      detail::record(bins,
                     is_power_of_two(*s.m_star) && s.value >= 1.0 / ms - tol &&
                         s.value < 2.0 / ms + tol,
                     dist, detail::describe({{"m*", ms}, {"scdl", s.value}}));
    }

    detail::record(sandwich, e * e <= 2.0 * v + tol && v <= 2.0 * e + tol, dist,
                   detail::describe({{"ece", e}, {"vmax", v}}));

    for (GridSize m = 2; m <= 64; m *= 2) {
      const double lower = vmax(round_distribution(dist, m)).value;
      const double upper = 2.0 * eval_scdl_m(dist, m) + 2.0 / static_cast<double>(m);
      detail::record(action, lower <= upper + tol, dist,
                     detail::describe({{"m", static_cast<double>(m)},
                                       {"vmax_rounded", lower},
                                       {"bound", upper}}));
    }
  }

  // Empirical rounding frequencies against pi_i, 5 sigma per bin.
  CounterRng draw_rng(opt.seed, streams::kRounding);
  for (std::size_t n = 0; n < opt.rounding_laws; ++n) {
    const auto dist = random_distribution(rng, 6);
    const GridSize m = GridSize{2} << rng.below(5);
    const auto summary = bin_summary(dist, m);
    std::vector<double> counts(m + 1, 0.0);
    const auto support = dist.support();
    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& pt : support) cumulative.push_back(acc += pt.w);
    for (std::size_t t = 0; t < opt.rounding_draws; ++t) {
      const double u = draw_rng.uniform() * acc;
      auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                        cumulative.begin());
      k = std::min(k, support.size() - 1);
      const double r = round_prediction(support[k].p, m, draw_rng);
      counts[static_cast<std::size_t>(std::llround(r * static_cast<double>(m)))] += 1.0;
    }
    const double draws = static_cast<double>(opt.rounding_draws);
    bool ok = true;
    std::string worst;
    for (GridSize i = 0; i <= m; ++i) {
      const double pi = summary.pi[i];
      const double freq = counts[i] / draws;
      const double sigma = std::sqrt(std::max(pi * (1.0 - pi), 1e-12) / draws);
      if (std::abs(freq - pi) > 5.0 * sigma + 1e-12) {
        ok = false;
        worst = detail::describe({{"m", static_cast<double>(m)},
                                  {"bin", static_cast<double>(i)},
                                  {"pi", pi},
                                  {"frequency", freq}});
        break;
      }
    }
    detail::record(tent, ok, dist, worst);
  }

  return {{mono, bins, below_cdl, sandwich, action, tent}};
}

inline std::string format_selftest(const SelftestResult& result) {
  std::ostringstream out;
  for (const auto& r : result.invariants) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.lemma << "  (" << r.cases << " cases)\n";
    if (!r.passed) {
      out << "  violation: " << r.detail << "\n";
      out << "  counterexample: " << r.counterexample->dump() << "\n";
    }
  }
  out << (result.passed() ? "selftest passed\n" : "selftest FAILED\n");
  return out.str();
}

}  // namespace calibloss
