#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "calibloss/distributions.hpp"
#include "calibloss/error.hpp"
#include "calibloss/rng.hpp"

namespace calibloss {

using GridSize = std::uint64_t;

/// Position of p on the grid {0, 1/m, ..., 1}: p = (lower + upper_share) / m
/// with upper_share in [0, 1). The tent weights of p are 1 - upper_share on
/// bin `lower` and upper_share on bin `lower + 1`; computing one and taking
/// the complement for the other makes them sum to exactly 1.
struct GridLocation {
  GridSize lower = 0;
  double upper_share = 0.0;
};

inline GridLocation locate(double p, GridSize m) {
  const double scaled = static_cast<double>(m) * p;
  double whole = std::floor(scaled);
  if (whole >= static_cast<double>(m)) return {m, 0.0};
  if (whole < 0.0) whole = 0.0;
  return {static_cast<GridSize>(whole), scaled - whole};
}

/// (1 - |m p - i|)_+ evaluated through locate().
inline double tent_weight(GridSize m, GridSize i, double p) {
  if (m == 0) throw Error("grid size must be positive");
  if (i > m) throw Error("bin index out of range");
  const auto loc = locate(p, m);
  if (i == loc.lower) return 1.0 - loc.upper_share;
  if (i == loc.lower + 1) return loc.upper_share;
  return 0.0;
}

/// Soft-bin weights pi_i = E[w_i(p)] and means q_i = E[w_i(p) y] / pi_i for
/// i = 0..m. Bins with pi_i = 0 have no mean.
struct BinSummary {
  GridSize m = 0;
  std::vector<double> pi;
  std::vector<std::optional<double>> q;
};

/// The nonempty bins of a BinSummary in increasing bin order, without
/// materializing the m + 1 dense entries. Large grids stay cheap: at most two
/// bins per support point.
struct SparseBins {
  GridSize m = 0;
  std::vector<GridSize> index;
  std::vector<double> pi;
  std::vector<double> q;

  std::size_t size() const { return index.size(); }
};

inline SparseBins sparse_bin_summary(const DiscreteDistribution& dist, GridSize m) {
  if (m == 0) throw Error("grid size must be positive");
  // Support is sorted by p, so bin indices arrive non-decreasing except for
  // the interleaving of each point's two bins; a map keeps it simple.
  std::map<GridSize, std::pair<double, double>> acc;  // bin -> (mass, mass*q)
  for (const auto& pt : dist.support()) {
    const auto loc = locate(pt.p, m);
    const double upper = loc.upper_share;
    const double lower = 1.0 - upper;
    if (lower > 0.0) {
      auto& a = acc[loc.lower];
      a.first += pt.w * lower;
      a.second += pt.w * lower * pt.q;
    }
    if (upper > 0.0) {
      auto& a = acc[loc.lower + 1];
      a.first += pt.w * upper;
      a.second += pt.w * upper * pt.q;
    }
  }
  SparseBins out;
  out.m = m;
  out.index.reserve(acc.size());
  out.pi.reserve(acc.size());
  out.q.reserve(acc.size());
  for (const auto& [bin, a] : acc) {
    if (a.first <= 0.0) continue;
    out.index.push_back(bin);
    out.pi.push_back(a.first);
    out.q.push_back(std::clamp(a.second / a.first, 0.0, 1.0));
  }
  return out;
}

inline BinSummary bin_summary(const DiscreteDistribution& dist, GridSize m) {
  const auto sparse = sparse_bin_summary(dist, m);
  BinSummary out;
  out.m = m;
  out.pi.assign(m + 1, 0.0);
  out.q.assign(m + 1, std::nullopt);
  for (std::size_t k = 0; k < sparse.size(); ++k) {
    out.pi[sparse.index[k]] = sparse.pi[k];
    out.q[sparse.index[k]] = sparse.q[k];
  }
  return out;
}

/// One draw of the unbiased randomized rounding of p onto the 1/m grid.
inline double round_prediction(double p, GridSize m, CounterRng& rng) {
  if (m == 0) throw Error("grid size must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("prediction out of range");
  const auto loc = locate(p, m);
  const GridSize bin = (loc.upper_share > 0.0 && rng.uniform() < loc.upper_share)
                           ? loc.lower + 1
                           : loc.lower;
  return static_cast<double>(bin) / static_cast<double>(m);
}

inline double round_prediction(double p, GridSize m, std::uint64_t seed) {
  CounterRng rng(seed, streams::kRounding);
  return round_prediction(p, m, rng);
}

/// Exact law of (rounded prediction, outcome): atoms (i/m, q_i, pi_i) for the
/// nonempty bins.
inline DiscreteDistribution round_distribution(const DiscreteDistribution& dist, GridSize m) {
  const auto bins = sparse_bin_summary(dist, m);
  std::vector<SupportPoint> pts;
  pts.reserve(bins.size());
  double total = 0.0;
  for (std::size_t k = 0; k < bins.size(); ++k) total += bins.pi[k];
  for (std::size_t k = 0; k < bins.size(); ++k) {
    pts.push_back({static_cast<double>(bins.index[k]) / static_cast<double>(m), bins.q[k],
                   bins.pi[k] / total});
  }
  return DiscreteDistribution(std::move(pts));
}

}  // namespace calibloss
