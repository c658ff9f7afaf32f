#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "calibloss/distributions.hpp"
#include "calibloss/rng.hpp"

namespace calibloss {

/// Random finite-support law for property sweeps: 1..max_support atoms with
/// uniform p and q and exponential(1) masses normalized to 1.
inline DiscreteDistribution random_distribution(CounterRng& rng, std::size_t max_support = 8) {
  const std::size_t n = 1 + static_cast<std::size_t>(rng.below(max_support));
  std::vector<SupportPoint> pts(n);
  double total = 0.0;
  for (auto& pt : pts) {
    pt.p = rng.uniform();
    pt.q = rng.uniform();
    pt.w = -std::log1p(-rng.uniform());
    total += pt.w;
  }
  if (total <= 0.0) {
    for (auto& pt : pts) pt.w = 1.0;
    total = static_cast<double>(n);
  }
  for (auto& pt : pts) pt.w /= total;
  return DiscreteDistribution(std::move(pts));
}

/// Random calibrated law (q = p on every atom).
inline DiscreteDistribution random_calibrated_distribution(CounterRng& rng,
                                                           std::size_t max_support = 8) {
  auto base = random_distribution(rng, max_support);
  std::vector<SupportPoint> pts(base.support().begin(), base.support().end());
  for (auto& pt : pts) pt.q = pt.p;
  return DiscreteDistribution(std::move(pts));
}

/// Random law on a dyadic lattice: p, q multiples of 1/64 and masses
/// multiples of 1/1024, so sums of residuals w (q - p) are exact in double.
inline DiscreteDistribution random_dyadic_distribution(CounterRng& rng,
                                                       std::size_t max_support = 8) {
  const std::size_t n = 1 + static_cast<std::size_t>(rng.below(max_support));
  std::vector<std::uint64_t> units(n, 1);
  for (std::size_t extra = 1024 - n; extra > 0; --extra) ++units[rng.below(n)];
  std::vector<SupportPoint> pts(n);
  for (std::size_t k = 0; k < n; ++k) {
    pts[k].p = static_cast<double>(rng.below(65)) / 64.0;
    pts[k].q = static_cast<double>(rng.below(65)) / 64.0;
    pts[k].w = static_cast<double>(units[k]) / 1024.0;
  }
  return DiscreteDistribution(std::move(pts));
}

}  // namespace calibloss
