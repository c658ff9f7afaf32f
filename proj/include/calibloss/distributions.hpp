#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "calibloss/error.hpp"
#include "calibloss/rng.hpp"
#include "json.hpp"

namespace calibloss {

using Json = nlohmann::ordered_json;

/// One atom of a prediction-outcome law: prediction p, conditional outcome
/// mean q = E[y | p], and probability mass w.
struct SupportPoint {
  double p = 0.0;
  double q = 0.0;
  double w = 0.0;

  friend bool operator==(const SupportPoint&, const SupportPoint&) = default;
};

/// Finite-support joint law of (prediction, outcome).
///
/// Construction validates ranges, drops zero-mass atoms, sorts by p and
/// merges atoms sharing a prediction (weights add, q is weight-averaged), so
/// q is a function of p on the stored support. Weights must sum to 1 within
/// 1e-9 on input and are renormalized so that the stored sum is 1 to
/// rounding.
class DiscreteDistribution {
 public:
  static constexpr double kWeightSumTolerance = 1e-9;

  explicit DiscreteDistribution(std::vector<SupportPoint> points) {
    if (points.empty()) throw Error("empty input");
    double total = 0.0;
    for (const auto& pt : points) {
      if (!(pt.p >= 0.0 && pt.p <= 1.0)) throw Error("prediction out of range");
      if (!(pt.q >= 0.0 && pt.q <= 1.0)) throw Error("conditional mean out of range");
      if (!(pt.w >= 0.0 && pt.w <= 1.0)) throw Error("weight out of range");
      total += pt.w;
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance) {
      throw Error("weights must sum to 1");
    }
    std::erase_if(points, [](const SupportPoint& pt) { return pt.w == 0.0; });
    if (points.empty()) throw Error("empty input");
    std::sort(points.begin(), points.end(),
              [](const SupportPoint& a, const SupportPoint& b) { return a.p < b.p; });

    support_.reserve(points.size());
    for (const auto& pt : points) {
      if (!support_.empty() && support_.back().p == pt.p) {
        auto& last = support_.back();
        const double mass = last.w + pt.w;
        last.q = std::clamp((last.w * last.q + pt.w * pt.q) / mass, 0.0, 1.0);
        last.w = mass;
      } else {
        support_.push_back(pt);
      }
    }
    if (total != 1.0) {
      for (auto& pt : support_) pt.w /= total;
    }
  }

  std::span<const SupportPoint> support() const { return support_; }
  std::size_t size() const { return support_.size(); }
  const SupportPoint& operator[](std::size_t k) const { return support_[k]; }

  double total_weight() const {
    double s = 0.0;
    for (const auto& pt : support_) s += pt.w;
    return s;
  }

  bool is_calibrated() const {
    return std::all_of(support_.begin(), support_.end(),
                       [](const SupportPoint& pt) { return pt.q == pt.p; });
  }

  friend bool operator==(const DiscreteDistribution&,
                         const DiscreteDistribution&) = default;

 private:
  std::vector<SupportPoint> support_;
};

struct Observation {
  double p = 0.0;
  int y = 0;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// A finite multiset of (prediction, binary outcome) pairs, read as the
/// uniform distribution over its points.
class EmpiricalSample {
 public:
  explicit EmpiricalSample(std::vector<Observation> points)
      : points_(std::move(points)) {
    if (points_.empty()) throw Error("empty input");
    for (const auto& o : points_) {
      if (!(o.p >= 0.0 && o.p <= 1.0)) throw Error("prediction out of range");
      if (o.y != 0 && o.y != 1) throw Error("outcome not binary");
    }
  }

  std::span<const Observation> points() const { return points_; }
  std::size_t size() const { return points_.size(); }

  friend bool operator==(const EmpiricalSample&, const EmpiricalSample&) = default;

 private:
  std::vector<Observation> points_;
};

/// Named measure value plus free-form diagnostics.
struct MeasureReport {
  std::string name;
  double value = 0.0;
  Json details = Json::object();
};

inline DiscreteDistribution from_sample(const EmpiricalSample& sample) {
  std::map<double, std::pair<std::size_t, std::size_t>> groups;  // p -> (count, ones)
  for (const auto& o : sample.points()) {
    auto& g = groups[o.p];
    ++g.first;
    g.second += static_cast<std::size_t>(o.y);
  }
  const double total = static_cast<double>(sample.size());
  std::vector<SupportPoint> pts;
  pts.reserve(groups.size());
  for (const auto& [p, g] : groups) {
    pts.push_back({p, static_cast<double>(g.second) / static_cast<double>(g.first),
                   static_cast<double>(g.first) / total});
  }
  return DiscreteDistribution(std::move(pts));
}

/// T i.i.d. draws from dist under the given RNG.
inline EmpiricalSample sample_from(const DiscreteDistribution& dist, std::size_t count,
                                   CounterRng& rng) {
  if (count == 0) throw Error("sample size must be at least 1");
  const auto support = dist.support();
  std::vector<double> cumulative(support.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    acc += support[k].w;
    cumulative[k] = acc;
  }
  std::vector<Observation> out;
  out.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto k = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()), support.size() - 1);
    const double q = support[k].q;
    out.push_back({support[k].p, rng.bernoulli(q) ? 1 : 0});
  }
  return EmpiricalSample(std::move(out));
}

inline EmpiricalSample sample_from(const DiscreteDistribution& dist, std::size_t count,
                                   std::uint64_t seed) {
  CounterRng rng(seed, streams::kSampling);
  return sample_from(dist, count, rng);
}

/// Equal-weight midpoint discretization of a continuous prediction law:
/// x_k = (k + 1/2) / n on [0, 1], mapped through prediction(x) and
/// conditional(x). Atoms with equal predictions merge.
inline DiscreteDistribution midpoint_quadrature(
    std::size_t n, const std::function<double(double)>& prediction,
    const std::function<double(double)>& conditional) {
  if (n == 0) throw Error("grid size must be positive");
  std::vector<SupportPoint> pts;
  pts.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = (static_cast<double>(k) + 0.5) * w;
    pts.push_back({prediction(x), conditional(x), w});
  }
  return DiscreteDistribution(std::move(pts));
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_int(std::string_view s, long& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses `prediction,outcome` CSV text. Line numbers in errors count the
/// header as line 1.
inline EmpiricalSample parse_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<Observation> points;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    view = detail::trim(view);
    if (!have_header) {
      if (view != "prediction,outcome") {
        throw Error("missing header `prediction,outcome`, line " + std::to_string(line_no));
      }
      have_header = true;
      continue;
    }
    if (view.empty()) continue;
    const auto comma = view.find(',');
    if (comma == std::string_view::npos || view.find(',', comma + 1) != std::string_view::npos) {
      throw Error("malformed row, line " + std::to_string(line_no));
    }
    double p = 0.0;
    long y = 0;
    if (!detail::parse_double(view.substr(0, comma), p)) {
      throw Error("malformed row, line " + std::to_string(line_no));
    }
    if (p < 0.0 || p > 1.0) {
      throw Error("prediction out of range, line " + std::to_string(line_no));
    }
    const auto outcome = view.substr(comma + 1);
    if (!detail::parse_int(outcome, y)) {
      double as_real = 0.0;
      if (detail::parse_double(outcome, as_real)) {
        throw Error("outcome not binary, line " + std::to_string(line_no));
      }
      throw Error("malformed row, line " + std::to_string(line_no));
    }
    if (y != 0 && y != 1) {
      throw Error("outcome not binary, line " + std::to_string(line_no));
    }
    points.push_back({p, static_cast<int>(y)});
  }
  if (!have_header) throw Error("empty input");
  if (points.empty()) throw Error("empty input");
  return EmpiricalSample(std::move(points));
}

inline EmpiricalSample load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return parse_csv(in);
}

inline void write_csv(std::ostream& out, const EmpiricalSample& sample) {
  out << "prediction,outcome\n";
  char buf[64];
  for (const auto& o : sample.points()) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), o.p);
    out << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << ',' << o.y << '\n';
  }
}

// ---------------------------------------------------------------------------
// Distribution files: a JSON array of {"p", "q", "w"} objects.

inline Json to_json(const DiscreteDistribution& dist) {
  Json arr = Json::array();
  for (const auto& pt : dist.support()) arr.push_back({{"p", pt.p}, {"q", pt.q}, {"w", pt.w}});
  return arr;
}

inline DiscreteDistribution distribution_from_json(const Json& arr) {
  if (!arr.is_array()) throw Error("distribution must be a JSON array of {p, q, w}");
  std::vector<SupportPoint> pts;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const auto& e = arr[k];
    if (!e.is_object() || !e.contains("p") || !e.contains("q") || !e.contains("w") ||
        !e["p"].is_number() || !e["q"].is_number() || !e["w"].is_number()) {
      throw Error("malformed distribution entry " + std::to_string(k));
    }
    pts.push_back({e["p"].get<double>(), e["q"].get<double>(), e["w"].get<double>()});
  }
  return DiscreteDistribution(std::move(pts));
}

inline DiscreteDistribution load_distribution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Json parsed;
  try {
    parsed = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
  return distribution_from_json(parsed);
}

}  // namespace calibloss
