#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "calibloss/binning.hpp"
#include "calibloss/detail/threshold_sums.hpp"
#include "calibloss/distributions.hpp"
#include "calibloss/error.hpp"

namespace calibloss {

/// Soft-binned fixed-decision loss of threshold bin i:
///   sum_{j<=i} pi_j (q_j - (i+1)/m)_+  +  sum_{j>i} pi_j (i/m - q_j)_+
/// Direct O(m) evaluation over a dense summary; empty bins add nothing.
inline double scfdl(const BinSummary& summary, GridSize i) {
  const GridSize m = summary.m;
  if (i > m) throw Error("bin index out of range");
  const double md = static_cast<double>(m);
  const double upper = static_cast<double>(i + 1) / md;
  const double lower = static_cast<double>(i) / md;
  double total = 0.0;
  for (GridSize j = 0; j <= m; ++j) {
    if (!summary.q[j] || summary.pi[j] <= 0.0) continue;
    const double qj = *summary.q[j];
    total += j <= i ? summary.pi[j] * detail::positive_part(qj - upper)
                    : summary.pi[j] * detail::positive_part(lower - qj);
  }
  return total;
}

struct ScdlAtResolution {
  double value = 0.0;
  GridSize argmax_bin = 0;
};

/// max over i = 0..m of scfdl, evaluated on the nonempty bins only.
///
/// For i ranging between two consecutive nonempty bins the split of bins
/// into {j <= i} and {j > i} is fixed, and each positive-part term is convex
/// in i, so the maximum over that range sits at one of its ends. The
/// candidates are therefore 0, m and every nonempty bin index and its
/// predecessor. Sums over bins whose q clears the threshold come from
/// Fenwick trees keyed by q: one sweep upward for the left part, one
/// downward for the right part.
inline ScdlAtResolution scdl_m_detailed(const SparseBins& bins) {
  const GridSize m = bins.m;
  const double md = static_cast<double>(m);
  const std::size_t count = bins.size();

  std::vector<GridSize> candidates;
  candidates.reserve(2 * count + 2);
  candidates.push_back(0);
  candidates.push_back(m);
  for (const GridSize idx : bins.index) {
    candidates.push_back(idx);
    if (idx > 0) candidates.push_back(idx - 1);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<double> keys(bins.q);
  std::sort(keys.begin(), keys.end());

  std::vector<double> left(candidates.size(), 0.0);
  {
    detail::ThresholdSums sums(keys);
    std::size_t next = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const GridSize i = candidates[c];
      while (next < count && bins.index[next] <= i) {
        sums.insert(sums.rank_of(bins.q[next]), bins.pi[next]);
        ++next;
      }
      const double threshold = static_cast<double>(i + 1) / md;
      left[c] = detail::excess_above(sums.above(threshold), threshold);
    }
  }

  ScdlAtResolution best;
  {
    detail::ThresholdSums sums(keys);
    std::size_t next = count;
    for (std::size_t c = candidates.size(); c-- > 0;) {
      const GridSize i = candidates[c];
      while (next > 0 && bins.index[next - 1] > i) {
        --next;
        sums.insert(sums.rank_of(bins.q[next]), bins.pi[next]);
      }
      const double threshold = static_cast<double>(i) / md;
      const double value = left[c] + detail::shortfall_below(sums.below(threshold), threshold);
      if (value >= best.value) {
        best.value = value;
        best.argmax_bin = i;
      }
    }
  }
  return best;
}

inline double scdl_m(const DiscreteDistribution& dist, GridSize m) {
  return scdl_m_detailed(sparse_bin_summary(dist, m)).value;
}

struct ScdlResult {
  double value = 0.0;
  /// Empty means m* = +infinity (no certificate up to the cap).
  std::optional<GridSize> m_star;
  std::vector<std::pair<GridSize, double>> per_m;
  bool converged = false;
};

struct ScdlOptions {
  /// Resolutions up to 2^cap_exponent are evaluated.
  unsigned cap_exponent = 24;
  /// Absolute slack on the knife-edge comparison scdl_{2m} >= 1/m.
  double certificate_tolerance = 1e-12;
  /// scdl_m at the cap at or below this counts as zero.
  double zero_tolerance = 1e-14;
};

/// inf over m = 2, 4, ... of max{scdl_m, 1/m}, located through the smallest
/// m with scdl_{2m} >= 1/m.
///
/// Without a certificate below the cap, the value is max{scdl_cap, 1/cap},
/// except that a vanishing scdl_cap reports 0 with m* = infinity and
/// converged = true.
///
/// `evaluate(dist, m)` supplies scdl_m; the default is scdl_m itself.
template <class Evaluator>
ScdlResult scdl_with(const DiscreteDistribution& dist, const ScdlOptions& options,
                     Evaluator&& evaluate) {
  if (options.cap_exponent < 1 || options.cap_exponent > 48) {
    throw Error("cap exponent must lie in [1, 48]");
  }
  ScdlResult result;
  auto at = [&](unsigned k) -> double {
    const GridSize m = GridSize{1} << k;
    for (const auto& [mm, v] : result.per_m) {
      if (mm == m) return v;
    }
    const double v = evaluate(dist, m);
    result.per_m.emplace_back(m, v);
    return v;
  };

  for (unsigned k = 1; k < options.cap_exponent; ++k) {
    const double inv_m = 1.0 / static_cast<double>(GridSize{1} << k);
    const double here = at(k);
    const double doubled = at(k + 1);
    if (doubled >= inv_m - options.certificate_tolerance) {
      result.m_star = GridSize{1} << k;
      result.value = std::max(here, inv_m);
      result.converged = true;
      return result;
    }
  }
  const double at_cap = at(options.cap_exponent);
  if (at_cap <= options.zero_tolerance) {
    result.value = 0.0;
    result.converged = true;
  } else {
    result.value = std::max(at_cap, 1.0 / static_cast<double>(GridSize{1} << options.cap_exponent));
    result.converged = false;
  }
  return result;
}

inline ScdlResult scdl(const DiscreteDistribution& dist, const ScdlOptions& options = {}) {
  return scdl_with(dist, options,
                   [](const DiscreteDistribution& d, GridSize m) { return scdl_m(d, m); });
}

/// Default cap for a sample of size T: ceil(log2 T) + 6.
inline unsigned default_cap_exponent(std::size_t sample_size) {
  unsigned bits = 0;
  while ((std::size_t{1} << bits) < sample_size) ++bits;
  return bits + 6;
}

inline ScdlResult scdl_of_sample(const EmpiricalSample& sample,
                                 std::optional<unsigned> cap_exponent = std::nullopt) {
  ScdlOptions options;
  options.cap_exponent = cap_exponent.value_or(default_cap_exponent(sample.size()));
  return scdl(from_sample(sample), options);
}

}  // namespace calibloss
