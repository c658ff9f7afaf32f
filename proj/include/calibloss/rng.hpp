#pragma once

#include <cstdint>
#include <limits>

namespace calibloss {

// Counter-based generator: draw n of stream s under seed k is
// splitmix64(key(k, s) + n * golden). Two generators built from the same
// (seed, stream) pair produce identical sequences on every platform, which
// std:: distributions do not guarantee, so sampling helpers live here too.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + kGolden))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return mix(key_ + kGolden * ++counter_); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(operator()() >> 11) * 0x1.0p-53; }

  bool bernoulli(double prob) { return uniform() < prob; }

  // Uniform integer in [0, n), Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) {
    unsigned __int128 product =
        static_cast<unsigned __int128>(operator()()) * n;
    auto low = static_cast<std::uint64_t>(product);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        product = static_cast<unsigned __int128>(operator()()) * n;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

  std::uint64_t draws() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Named streams keep independent consumers of one seed from overlapping.
namespace streams {
inline constexpr std::uint64_t kSampling = 1;
inline constexpr std::uint64_t kRounding = 2;
inline constexpr std::uint64_t kLogisticFit = 3;
inline constexpr std::uint64_t kEvaluation = 4;
inline constexpr std::uint64_t kAlphas = 5;
inline constexpr std::uint64_t kSelftest = 6;
}  // namespace streams

}  // namespace calibloss
