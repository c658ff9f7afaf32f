#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace calibloss::detail {

// Fenwick trees over a fixed sorted set of keys, accumulating (mass,
// mass*key) for the keys inserted so far. Answers
//   sum over inserted k with key > x  and  sum over inserted k with key < x
// in O(log n). Used to evaluate positive-part sums like
//   sum_j w_j (key_j - x)_+ = above(x).moment - x * above(x).mass.
// Both directions are kept as prefix trees so that an empty selection sums
// to exactly zero instead of a difference of two rounded totals.
class ThresholdSums {
 public:
  struct Sums {
    double mass = 0.0;
    double moment = 0.0;
  };

  explicit ThresholdSums(std::vector<double> sorted_keys)
      : keys_(std::move(sorted_keys)), low_(keys_.size() + 1), high_(keys_.size() + 1) {}

  std::size_t rank_of(double key) const {
    return static_cast<std::size_t>(std::lower_bound(keys_.begin(), keys_.end(), key) -
                                    keys_.begin());
  }

  void insert(std::size_t rank, double mass) {
    const Sums add{mass, mass * keys_[rank]};
    update(low_, rank + 1, add);
    update(high_, keys_.size() - rank, add);
  }

  // Inserted keys strictly below x.
  Sums below(double x) const {
    const auto count = static_cast<std::size_t>(
        std::lower_bound(keys_.begin(), keys_.end(), x) - keys_.begin());
    return prefix(low_, count);
  }

  // Inserted keys strictly above x.
  Sums above(double x) const {
    const auto first = static_cast<std::size_t>(
        std::upper_bound(keys_.begin(), keys_.end(), x) - keys_.begin());
    return prefix(high_, keys_.size() - first);
  }

 private:
  static void update(std::vector<Sums>& tree, std::size_t i, const Sums& add) {
    for (; i < tree.size(); i += i & (~i + 1)) {
      tree[i].mass += add.mass;
      tree[i].moment += add.moment;
    }
  }

  static Sums prefix(const std::vector<Sums>& tree, std::size_t count) {
    Sums s;
    for (std::size_t i = count; i > 0; i -= i & (~i + 1)) {
      s.mass += tree[i].mass;
      s.moment += tree[i].moment;
    }
    return s;
  }

  std::vector<double> keys_;
  std::vector<Sums> low_;
  std::vector<Sums> high_;
};

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// sum over selected entries of mass * (key - x), for a selection with every
// key > x; clipped at zero against cancellation.
inline double excess_above(const ThresholdSums::Sums& s, double x) {
  return positive_part(s.moment - x * s.mass);
}

// sum over selected entries of mass * (x - key), for a selection with every
// key < x.
inline double shortfall_below(const ThresholdSums::Sums& s, double x) {
  return positive_part(x * s.mass - s.moment);
}

}  // namespace calibloss::detail
