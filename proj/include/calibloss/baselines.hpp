#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "calibloss/detail/threshold_sums.hpp"
#include "calibloss/distributions.hpp"
#include "calibloss/error.hpp"

namespace calibloss {

/// E|q - p|.
inline double ece(const DiscreteDistribution& dist) {
  double total = 0.0;
  for (const auto& pt : dist.support()) total += pt.w * std::abs(pt.q - pt.p);
  return total;
}

// ---------------------------------------------------------------------------
// Binned ECE

/// How "k bins" partitions [0, 1] for hard binning.
enum class BinConvention {
  /// k half-open intervals [j/k, (j+1)/k), the last one closed.
  equal_intervals,
  /// k grid points {0, 1/(k-1), ..., 1}; p rounds down to the grid and
  /// p = 1 keeps its own bin.
  grid_points,
};

struct BinnedEce {
  /// Reported value, clipped to [0, 1].
  double value = 0.0;
  double unclipped = 0.0;
};

/// Largest j with j/step <= p, using the same double division that produces
/// the bin's representative prediction.
inline std::uint64_t round_down_index(double p, std::uint64_t step) {
  const double sd = static_cast<double>(step);
  auto j = static_cast<std::uint64_t>(std::max(0.0, std::floor(p * sd)));
  j = std::min(j, step);
  while (j > 0 && static_cast<double>(j) / sd > p) --j;
  while (j < step && static_cast<double>(j + 1) / sd <= p) ++j;
  return j;
}

/// 2 * ECE of the hard round-down pushforward.
inline BinnedEce binned_ece(const DiscreteDistribution& dist, std::uint64_t bins,
                            BinConvention convention = BinConvention::equal_intervals) {
  if (bins == 0) throw Error("bins must be positive");
  std::uint64_t step = bins;
  std::uint64_t top = bins - 1;
  if (convention == BinConvention::grid_points) {
    if (bins < 2) throw Error("grid-point binning needs at least 2 bins");
    step = bins - 1;
    top = step;
  }
  std::map<std::uint64_t, std::pair<double, double>> acc;  // bin -> (mass, mass*q)
  for (const auto& pt : dist.support()) {
    const auto j = std::min(round_down_index(pt.p, step), top);
    auto& a = acc[j];
    a.first += pt.w;
    a.second += pt.w * pt.q;
  }
  double total = 0.0;
  for (const auto& [j, a] : acc) {
    const double q = a.second / a.first;
    total += a.first * std::abs(q - static_cast<double>(j) / static_cast<double>(step));
  }
  const double raw = 2.0 * total;
  return {std::min(raw, 1.0), raw};
}

/// Reliability-diagram estimate sum_b Pr[b] |E[y | b] - E[p | b]| over k
/// equal intervals, with no round-down and no factor 2. Diagnostic only.
inline double bin_average_ece(const DiscreteDistribution& dist, std::uint64_t bins) {
  if (bins == 0) throw Error("bins must be positive");
  std::map<std::uint64_t, std::array<double, 3>> acc;  // bin -> (mass, mass*q, mass*p)
  for (const auto& pt : dist.support()) {
    const auto j = std::min(round_down_index(pt.p, bins), bins - 1);
    auto& a = acc[j];
    a[0] += pt.w;
    a[1] += pt.w * pt.q;
    a[2] += pt.w * pt.p;
  }
  double total = 0.0;
  for (const auto& [j, a] : acc) total += std::abs(a[1] - a[2]);
  return total;
}

// ---------------------------------------------------------------------------
// Smooth calibration error

/// Values of a bounded 1-Lipschitz function at the support knots.
struct LipschitzWitness {
  std::vector<double> knots;
  std::vector<double> values;
};

struct SmceResult {
  double value = 0.0;
  LipschitzWitness witness;
};

/// Exact optimum of
///   maximize  sum_j rho_j v_j,  rho_j = w_j (q_j - p_j)
///   subject to |v_j| <= 1,  |v_{j+1} - v_j| <= p_{j+1} - p_j
/// over the sorted support. Any 1-Lipschitz w : [0,1] -> [-1,1] restricts to
/// a feasible v and every feasible v extends piecewise-linearly, so this is
/// the smooth calibration error.
///
/// Solved by dynamic programming along the chain. f_j(v) = best partial
/// objective with v_j = v is concave piecewise linear on [-1, 1]; it is
/// stored as segments (length, slope) split at its peak into an ascending
/// and a descending deque with a lazy slope offset. Adding rho v shifts all
/// slopes; the window max over |u - v| <= gap inserts a flat run of width
/// 2 gap at the peak and trims gap from each end.
inline SmceResult smce(const DiscreteDistribution& dist) {
  struct Segment {
    double length;
    double slope;  // stored without the lazy offset
  };
  const auto support = dist.support();
  const std::size_t n = support.size();

  std::deque<Segment> rising;   // from -1 up to the peak
  std::deque<Segment> falling;  // from the peak to +1
  double offset = 0.0;
  double value_at_left = 0.0;  // f(-1)
  double rising_length = 0.0;
  falling.push_back({2.0, 0.0});

  auto rebalance = [&] {
    while (!rising.empty() && rising.back().slope + offset <= 0.0) {
      rising_length -= rising.back().length;
      falling.push_front(rising.back());
      rising.pop_back();
    }
    while (!falling.empty() && falling.front().slope + offset > 0.0) {
      rising_length += falling.front().length;
      rising.push_back(falling.front());
      falling.pop_front();
    }
    if (rising.empty()) rising_length = 0.0;
  };

  auto trim_front = [&](double amount) {
    while (amount > 0.0) {
      const bool from_rising = !rising.empty();
      auto& dq = from_rising ? rising : falling;
      if (dq.empty()) break;
      Segment& seg = dq.front();
      const double used = std::min(seg.length, amount);
      value_at_left += used * (seg.slope + offset);
      seg.length -= used;
      amount -= used;
      if (from_rising) rising_length -= used;
      if (seg.length <= 0.0) dq.pop_front();
    }
  };

  auto trim_back = [&](double amount) {
    while (amount > 0.0) {
      const bool from_falling = !falling.empty();
      auto& dq = from_falling ? falling : rising;
      if (dq.empty()) break;
      Segment& seg = dq.back();
      const double used = std::min(seg.length, amount);
      seg.length -= used;
      amount -= used;
      if (!from_falling) rising_length -= used;
      if (seg.length <= 0.0) dq.pop_back();
    }
  };

  std::vector<double> peak(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double rho = support[j].w * (support[j].q - support[j].p);
    offset += rho;
    value_at_left -= rho;
    rebalance();
    peak[j] = std::clamp(-1.0 + rising_length, -1.0, 1.0);
    if (j + 1 < n) {
      const double gap = support[j + 1].p - support[j].p;
      falling.push_front({2.0 * gap, -offset});
      trim_front(gap);
      trim_back(gap);
      rebalance();
    }
  }

  double best = value_at_left;
  for (const auto& seg : rising) best += seg.length * (seg.slope + offset);

  SmceResult out;
  out.value = std::max(best, 0.0);
  out.witness.knots.resize(n);
  out.witness.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.witness.knots[j] = support[j].p;
  out.witness.values[n - 1] = peak[n - 1];
  for (std::size_t j = n - 1; j-- > 0;) {
    const double gap = support[j + 1].p - support[j].p;
    const double next = out.witness.values[j + 1];
    out.witness.values[j] =
        std::clamp(std::clamp(peak[j], next - gap, next + gap), -1.0, 1.0);
  }
  return out;
}

/// sum_j w_j (q_j - p_j) v_j for a witness over the support knots.
inline double smce_objective(const DiscreteDistribution& dist, const LipschitzWitness& witness) {
  const auto support = dist.support();
  if (witness.values.size() != support.size()) throw Error("witness size mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < support.size(); ++j) {
    total += support[j].w * (support[j].q - support[j].p) * witness.values[j];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Cutoff calibration error

struct CutoffResult {
  double value = 0.0;
  /// Maximizing interval [a, b] of predictions.
  double a = 0.0;
  double b = 0.0;
};

/// sup over intervals [a, b] of |E[(y - p) 1{a <= p <= b}]|: the
/// maximum-magnitude contiguous sum of residuals w (q - p) along the sorted
/// support, by Kadane's scan in both signs.
inline CutoffResult cutoff_detailed(const DiscreteDistribution& dist) {
  const auto support = dist.support();
  CutoffResult best;
  double run_max = 0.0, run_min = 0.0;
  std::size_t start_max = 0, start_min = 0;
  for (std::size_t j = 0; j < support.size(); ++j) {
    const double r = support[j].w * (support[j].q - support[j].p);
    if (j == 0 || run_max <= 0.0) {
      run_max = r;
      start_max = j;
    } else {
      run_max += r;
    }
    if (j == 0 || run_min >= 0.0) {
      run_min = r;
      start_min = j;
    } else {
      run_min += r;
    }
    if (run_max > best.value) best = {run_max, support[start_max].p, support[j].p};
    if (-run_min > best.value) best = {-run_min, support[start_min].p, support[j].p};
  }
  return best;
}

inline double cutoff(const DiscreteDistribution& dist) { return cutoff_detailed(dist).value; }

// ---------------------------------------------------------------------------
// V-shape objective

/// Which indicator convention a breakpoint evaluation uses.
enum class VSide {
  /// 1{p <= mu} and 1{p > mu}.
  at_point,
  /// The limit from below: 1{p < mu} and 1{p >= mu}.
  left_limit,
};

struct VShapeCertificate {
  double mu_star = 0.0;
  VSide side = VSide::at_point;
  double value = 0.0;
};

/// V(mu) = E[(q - mu)_+ 1{p <= mu} + (mu - q)_+ 1{p > mu}] under the given
/// indicator convention.
inline double v_shape_objective(const DiscreteDistribution& dist, double mu, VSide side) {
  double total = 0.0;
  for (const auto& pt : dist.support()) {
    const bool left = side == VSide::at_point ? pt.p <= mu : pt.p < mu;
    total += left ? pt.w * detail::positive_part(pt.q - mu)
                  : pt.w * detail::positive_part(mu - pt.q);
  }
  return total;
}

/// Exact sup over mu in [0, 1] of V. V is linear between consecutive points
/// of {p} u {q} u {0, 1} and jumps only where mu crosses a prediction, so
/// the sup is attained at a breakpoint under one of the two conventions.
/// Each evaluation uses Fenwick sums keyed by q: an upward sweep for the
/// p-left part and a downward sweep for the p-right part.
inline VShapeCertificate vmax(const DiscreteDistribution& dist) {
  const auto support = dist.support();
  const std::size_t n = support.size();

  std::vector<double> mus;
  mus.reserve(2 * n + 2);
  mus.push_back(0.0);
  mus.push_back(1.0);
  for (const auto& pt : support) {
    mus.push_back(pt.p);
    mus.push_back(pt.q);
  }
  std::sort(mus.begin(), mus.end());
  mus.erase(std::unique(mus.begin(), mus.end()), mus.end());

  std::vector<double> keys;
  keys.reserve(n);
  for (const auto& pt : support) keys.push_back(pt.q);
  std::sort(keys.begin(), keys.end());

  // Index c = 2 * k + side for breakpoint k.
  const std::size_t evals = 2 * mus.size();
  std::vector<double> left_part(evals, 0.0);
  {
    detail::ThresholdSums sums(keys);
    std::size_t next = 0;  // support sorted by p
    for (std::size_t k = 0; k < mus.size(); ++k) {
      const double mu = mus[k];
      while (next < n && support[next].p < mu) {
        sums.insert(sums.rank_of(support[next].q), support[next].w);
        ++next;
      }
      left_part[2 * k + 1] = detail::excess_above(sums.above(mu), mu);
      while (next < n && support[next].p <= mu) {
        sums.insert(sums.rank_of(support[next].q), support[next].w);
        ++next;
      }
      left_part[2 * k] = detail::excess_above(sums.above(mu), mu);
    }
  }

  VShapeCertificate best;
  {
    detail::ThresholdSums sums(keys);
    std::size_t next = n;
    for (std::size_t k = mus.size(); k-- > 0;) {
      const double mu = mus[k];
      while (next > 0 && support[next - 1].p > mu) {
        --next;
        sums.insert(sums.rank_of(support[next].q), support[next].w);
      }
      const double at_point = left_part[2 * k] + detail::shortfall_below(sums.below(mu), mu);
      while (next > 0 && support[next - 1].p >= mu) {
        --next;
        sums.insert(sums.rank_of(support[next].q), support[next].w);
      }
      if (at_point >= best.value) best = {mu, VSide::at_point, at_point};
      if (mu > 0.0) {
        const double limit =
            left_part[2 * k + 1] + detail::shortfall_below(sums.below(mu), mu);
        if (limit > best.value) best = {mu, VSide::left_limit, limit};
      }
    }
  }
  return best;
}

struct CdlBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// CDL is bracketed by sup V and 2 sup V, and by 1 for [0, 1] utilities.
inline CdlBounds cdl_bounds(const DiscreteDistribution& dist) {
  const double v = vmax(dist).value;
  return {v, std::min(1.0, 2.0 * v)};
}

}  // namespace calibloss
