#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "calibloss/baselines.hpp"
#include "calibloss/binning.hpp"
#include "calibloss/decisions.hpp"
#include "calibloss/distributions.hpp"
#include "calibloss/error.hpp"
#include "calibloss/rng.hpp"
#include "calibloss/scdl.hpp"

namespace calibloss {

inline constexpr const char* kSpecVersion = "1.0";

// ---------------------------------------------------------------------------
// Data model

/// E[Y | X = x] = alpha (1 - 2x)^2 + (1 - alpha) x.
inline double true_conditional(double alpha, double x) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("alpha must lie in [0, 1]");
  if (!(x >= 0.0 && x <= 1.0)) throw Error("x must lie in [0, 1]");
  const double bend = 1.0 - 2.0 * x;
  return std::clamp(alpha * bend * bend + (1.0 - alpha) * x, 0.0, 1.0);
}

struct GeneratorConfig {
  double alpha = 0.0;
  std::size_t n_fit = 500;
  std::uint64_t seed = 0;
  /// Extra stream selector so several fits can share one seed.
  std::uint64_t stream = 0;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Single-feature logistic model sigmoid(w0 + w1 x), optionally flipped to
/// 1 - sigmoid(w0 + w1 x).
class Predictor {
 public:
  Predictor() = default;
  Predictor(double w0, double w1) : w0_(w0), w1_(w1) {}

  double operator()(double x) const {
    const double p = sigmoid(w0_ + w1_ * x);
    return flipped_ ? 1.0 - p : p;
  }

  Predictor flipped() const {
    Predictor out = *this;
    out.flipped_ = !flipped_;
    return out;
  }

  double intercept() const { return w0_; }
  double slope() const { return w1_; }
  bool is_flipped() const { return flipped_; }

  // Fit diagnostics.
  int iterations = 0;
  bool converged = false;
  bool intercept_only = false;

 private:
  double w0_ = 0.0;
  double w1_ = 0.0;
  bool flipped_ = false;
};

struct LabeledPoint {
  double x = 0.0;
  int y = 0;
};

/// n draws of X ~ U[0,1], Y ~ Bernoulli(true_conditional(alpha, X)).
inline std::vector<LabeledPoint> generate(double alpha, std::size_t n, CounterRng& rng) {
  std::vector<LabeledPoint> out(n);
  for (auto& pt : out) {
    pt.x = rng.uniform();
    pt.y = rng.bernoulli(true_conditional(alpha, pt.x)) ? 1 : 0;
  }
  return out;
}

/// Maximum-likelihood logistic fit by Newton (IRLS) steps with step halving,
/// stopping when the mean-gradient norm drops below 1e-8 or after 100 steps.
inline Predictor fit_logistic(const std::vector<LabeledPoint>& data) {
  if (data.size() < 10) throw Error("logistic fit needs at least 10 points");
  const double n = static_cast<double>(data.size());
  std::size_t ones = 0;
  for (const auto& pt : data) ones += static_cast<std::size_t>(pt.y);

  if (ones == 0 || ones == data.size()) {
    const double rate = (static_cast<double>(ones) + 0.5) / (n + 1.0);
    Predictor p(std::log(rate / (1.0 - rate)), 0.0);
    p.intercept_only = true;
    p.converged = true;
    return p;
  }

  auto log_likelihood = [&](double w0, double w1) {
    double total = 0.0;
    for (const auto& pt : data) {
      const double z = w0 + w1 * pt.x;
      // log sigmoid(z) = -log1p(e^{-z}), computed stably on both sides.
      const double log_p = z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
      const double log_not_p = log_p - z;
      total += pt.y ? log_p : log_not_p;
    }
    return total / n;
  };

  double w0 = 0.0, w1 = 0.0;
  double current = log_likelihood(w0, w1);
  Predictor out;
  for (int iter = 0; iter < 100; ++iter) {
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
    for (const auto& pt : data) {
      const double mu = sigmoid(w0 + w1 * pt.x);
      const double r = static_cast<double>(pt.y) - mu;
      const double v = mu * (1.0 - mu);
      g0 += r;
      g1 += r * pt.x;
      h00 += v;
      h01 += v * pt.x;
      h11 += v * pt.x * pt.x;
    }
    g0 /= n;
    g1 /= n;
    h00 /= n;
    h01 /= n;
    h11 /= n;
    out.iterations = iter;
    if (std::hypot(g0, g1) < 1e-8) {
      out.converged = true;
      break;
    }
    const double det = h00 * h11 - h01 * h01;
    if (!(det > 0.0)) break;
    const double d0 = (h11 * g0 - h01 * g1) / det;
    const double d1 = (h00 * g1 - h01 * g0) / det;
    double step = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 30; ++halving, step *= 0.5) {
      const double next = log_likelihood(w0 + step * d0, w1 + step * d1);
      if (next >= current) {
        w0 += step * d0;
        w1 += step * d1;
        current = next;
        moved = true;
        break;
      }
    }
    out.iterations = iter + 1;
    if (!moved) break;
  }
  Predictor fitted(w0, w1);
  fitted.iterations = out.iterations;
  fitted.converged = out.converged;
  return fitted;
}

inline Predictor fit_logistic(const GeneratorConfig& config) {
  if (config.n_fit < 10) throw Error("n_fit must be at least 10");
  CounterRng rng(config.seed, (config.stream << 8) | streams::kLogisticFit);
  return fit_logistic(generate(config.alpha, config.n_fit, rng));
}

/// Quadrature image of X ~ U[0,1] under (predictor(X), E[Y | X]).
inline DiscreteDistribution population_joint(const Predictor& predictor, double alpha,
                                             std::size_t grid_size = 4096) {
  if (grid_size < 64) throw Error("grid size must be at least 64");
  return midpoint_quadrature(
      grid_size, [&](double x) { return predictor(x); },
      [alpha](double x) { return true_conditional(alpha, x); });
}

/// Sample (f(X_t), Y_t) for t = 1..T with fresh (X, Y).
inline EmpiricalSample predictor_sample(const Predictor& predictor, double alpha, std::size_t T,
                                        CounterRng& rng) {
  std::vector<Observation> obs;
  obs.reserve(T);
  for (const auto& pt : generate(alpha, T, rng)) obs.push_back({predictor(pt.x), pt.y});
  return EmpiricalSample(std::move(obs));
}

// ---------------------------------------------------------------------------
// Statistics

/// One-pass mean and sample standard deviation (n - 1 denominator).
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double stddev() const {
    return n_ < 2 ? 0.0 : std::sqrt(std::max(0.0, m2_ / static_cast<double>(n_ - 1)));
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Ranks 1..n with ties sharing their average rank.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && values[order[end]] == values[order[start]]) ++end;
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = rank;
    start = end;
  }
  return ranks;
}

inline std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("correlation inputs differ in length");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

/// Spearman rank correlation; nullopt when either side has no variation.
inline std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("correlation inputs differ in length");
  return pearson(average_ranks(a), average_ranks(b));
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("slope needs at least two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0 && y[k] > 0.0)) throw Error("log-log slope needs positive values");
    lx[k] = std::log(x[k]);
    ly[k] = std::log(y[k]);
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Reports

struct CheckOutcome {
  std::string name;
  bool passed = false;
  /// Hard gates decide the exit status under --check; the rest are monitored.
  bool hard = true;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  Json metadata = Json::object();
  Json rows = Json::array();
  Json summary = Json::object();
  std::vector<CheckOutcome> checks;

  bool hard_checks_pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckOutcome& c) { return c.passed || !c.hard; });
  }

  Json to_json() const {
    Json out;
    out["spec_version"] = kSpecVersion;
    out["kind"] = "experiment";
    out["experiment"] = experiment;
    out["metadata"] = metadata;
    out["rows"] = rows;
    out["summary"] = summary;
    Json cs = Json::array();
    for (const auto& c : checks) {
      cs.push_back({{"name", c.name}, {"passed", c.passed}, {"hard", c.hard}, {"detail", c.detail}});
    }
    out["checks"] = cs;
    return out;
  }
};

inline Json optional_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Table 2

inline const std::array<const char*, 4> kTableMeasures = {"smCE", "Cutoff", "bECE", "SCDL"};

struct ReferenceCell {
  double alpha;
  const char* measure;
  double mean;
  double std;
};

/// Reference mean and std per (alpha, measure) for the logistic-fit setup
/// with N = 1000 replications of T = 500.
inline const std::array<ReferenceCell, 16> kReferenceTable = {{
    {0.0, "smCE", 0.021, 0.014},   {0.5, "smCE", 0.028, 0.013},
    {0.8, "smCE", 0.027, 0.016},   {1.0, "smCE", 0.025, 0.016},
    {0.0, "Cutoff", 0.030, 0.012}, {0.5, "Cutoff", 0.068, 0.016},
    {0.8, "Cutoff", 0.110, 0.016}, {1.0, "Cutoff", 0.136, 0.015},
    {0.0, "bECE", 0.043, 0.011},   {0.5, "bECE", 0.117, 0.015},
    {0.8, "bECE", 0.140, 0.054},   {1.0, "bECE", 0.064, 0.065},
    {0.0, "SCDL", 0.016, 0.003},   {0.5, "SCDL", 0.036, 0.006},
    {0.8, "SCDL", 0.080, 0.014},   {1.0, "SCDL", 0.076, 0.034},
}};

inline const ReferenceCell* reference_cell(double alpha, const std::string& measure) {
  for (const auto& c : kReferenceTable) {
    if (c.alpha == alpha && measure == c.measure) return &c;
  }
  return nullptr;
}

struct Table2Options {
  std::vector<double> alphas = {0.0, 0.5, 0.8, 1.0};
  std::size_t replications = 1000;
  std::size_t sample_size = 500;
  std::uint64_t seed = 0;
  bool refit_per_rep = false;
};

/// Four measures on one evaluation sample, in kTableMeasures order, then the
/// bin-average ECE diagnostic.
inline std::array<double, 5> table_measures(const EmpiricalSample& sample) {
  const auto dist = from_sample(sample);
  return {smce(dist).value, cutoff(dist), binned_ece(dist, 11).value,
          scdl_of_sample(sample).value, bin_average_ece(dist, 11)};
}

inline ExperimentReport table2(const Table2Options& opt) {
  if (opt.replications == 0 || opt.sample_size == 0) throw Error("N and T must be at least 1");
  ExperimentReport report;
  report.experiment = "table2";
  report.metadata = {{"seed", opt.seed},
                     {"N", opt.replications},
                     {"T", opt.sample_size},
                     {"n_fit", 500},
                     {"refit_per_rep", opt.refit_per_rep},
                     {"alphas", opt.alphas},
                     {"bece_bins", 11}};
  Json fits = Json::array();
  std::size_t in_band = 0, with_reference = 0;

  for (std::size_t a = 0; a < opt.alphas.size(); ++a) {
    const double alpha = opt.alphas[a];
    const Predictor shared = fit_logistic(GeneratorConfig{alpha, 500, opt.seed, a});
    fits.push_back({{"alpha", alpha},
                    {"w0", shared.intercept()},
                    {"w1", shared.slope()},
                    {"iterations", shared.iterations},
                    {"converged", shared.converged},
                    {"intercept_only", shared.intercept_only}});
    std::array<RunningStats, 5> stats;
    for (std::size_t r = 0; r < opt.replications; ++r) {
      const std::uint64_t rep_seed = opt.seed + r;
      const Predictor f =
          opt.refit_per_rep ? fit_logistic(GeneratorConfig{alpha, 500, rep_seed, a}) : shared;
      CounterRng rng(rep_seed, (a << 8) | streams::kEvaluation);
      const auto values = table_measures(predictor_sample(f, alpha, opt.sample_size, rng));
      for (std::size_t k = 0; k < 5; ++k) stats[k].add(values[k]);
    }
    for (std::size_t k = 0; k < 5; ++k) {
      // The diagnostic row is compared against the bECE reference too.
      const bool diagnostic = k == 4;
      const std::string name = diagnostic ? "bECE_bin_average" : kTableMeasures[k];
      Json row = {{"alpha", alpha},
                  {"measure", name},
                  {"mean", stats[k].mean()},
                  {"std", stats[k].stddev()}};
      row["diagnostic"] = diagnostic;
      if (const auto* ref = reference_cell(alpha, diagnostic ? "bECE" : kTableMeasures[k])) {
        const double lo = ref->mean - 3.0 * ref->std;
        const double hi = ref->mean + 3.0 * ref->std;
        const bool ok = stats[k].mean() >= lo && stats[k].mean() <= hi;
        const bool std_ok = stats[k].stddev() <= 3.0 * ref->std && stats[k].stddev() >= ref->std / 3.0;
        row["reference_mean"] = ref->mean;
        row["reference_std"] = ref->std;
        row["in_band"] = ok;
        row["std_within_factor_3"] = std_ok;
        if (!diagnostic) {
          ++with_reference;
          in_band += ok ? 1 : 0;
        }
        report.checks.push_back({name + " at alpha=" + fixed(alpha, 1) +
                                     " mean within reference +/- 3 std",
                                 ok, false,
                                 fixed(stats[k].mean()) + " vs [" + fixed(lo) + ", " + fixed(hi) +
                                     "]"});
      }
      report.rows.push_back(row);
    }
  }
  report.metadata["fits"] = fits;
  report.summary = {{"cells_in_band", in_band}, {"cells_with_reference", with_reference}};
  return report;
}

// ---------------------------------------------------------------------------
// Actionability scan

struct ActionabilityOptions {
  std::size_t n_alphas = 200;
  std::uint64_t seed = 0;
  std::size_t grid_size = 4096;
  /// Alphas on which the rounded-response regret bound is checked.
  std::size_t rounded_checks = 20;
};

inline const std::array<const char*, 4> kScanMeasures = {"smCE", "Cutoff", "bECE", "SCDL"};

inline ExperimentReport actionability_scan(const ActionabilityOptions& opt) {
  if (opt.n_alphas < 10) throw Error("n_alphas must be at least 10");
  ExperimentReport report;
  report.experiment = "actionability";
  report.metadata = {{"seed", opt.seed},
                     {"n_alphas", opt.n_alphas},
                     {"grid_size", opt.grid_size},
                     {"n_fit", 500},
                     {"task", "cost_sensitive(0.35)"},
                     {"response", "best_response"}};
  const auto task = cost_sensitive_task(0.35);
  const auto response = Response::best_response(task);

  CounterRng alpha_rng(opt.seed, streams::kAlphas);
  std::vector<double> alphas(opt.n_alphas);
  for (auto& a : alphas) a = alpha_rng.uniform();

  // [predictor][measure] values and [predictor] regrets
  std::array<std::array<std::vector<double>, 4>, 2> values;
  std::array<std::vector<double>, 2> regrets;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t rounded_checked = 0, rounded_violations = 0;

  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const Predictor f = fit_logistic(GeneratorConfig{alphas[k], 500, opt.seed + k, 0});
    for (int variant = 0; variant < 2; ++variant) {
      const Predictor pred = variant == 0 ? f : f.flipped();
      const auto dist = population_joint(pred, alphas[k], opt.grid_size);
      const auto s = scdl(dist);
      const std::array<double, 4> measures = {smce(dist).value, cutoff(dist),
                                              binned_ece(dist, 11).value, s.value};
      const double regret = swap_regret(task, response, dist);
      for (std::size_t j = 0; j < 4; ++j) values[variant][j].push_back(measures[j]);
      regrets[variant].push_back(regret);

      Json row = {{"alpha", alphas[k]},
                  {"predictor", variant == 0 ? "f" : "1-f"},
                  {"smCE", measures[0]},
                  {"Cutoff", measures[1]},
                  {"bECE", measures[2]},
                  {"SCDL", measures[3]},
                  {"m_star", s.m_star ? Json(*s.m_star) : Json(nullptr)},
                  {"regret", regret}};
      if (k < opt.rounded_checks && s.m_star) {
        const double rounded_regret =
            swap_regret(task, Response::rounded(response, *s.m_star), dist);
        const double bound = 2.0 * s.value + 2.0 / static_cast<double>(*s.m_star) + 1e-6;
        row["rounded_regret"] = rounded_regret;
        row["rounded_bound"] = bound;
        ++rounded_checked;
        worst_margin = std::min(worst_margin, bound - rounded_regret);
        if (rounded_regret > bound) ++rounded_violations;
      }
      report.rows.push_back(row);
    }
  }

  Json corr = Json::object();
  std::array<std::array<std::optional<double>, 4>, 2> rho;
  for (int variant = 0; variant < 2; ++variant) {
    Json per = Json::object();
    for (std::size_t j = 0; j < 4; ++j) {
      rho[variant][j] = spearman(values[variant][j], regrets[variant]);
      per[kScanMeasures[j]] = optional_json(rho[variant][j]);
    }
    corr[variant == 0 ? "f" : "1-f"] = per;
  }
  report.summary = {{"spearman", corr},
                    {"rounded_checked", rounded_checked},
                    {"rounded_violations", rounded_violations}};

  auto value_or = [](const std::optional<double>& v) { return v.value_or(-2.0); };
  const double scdl_f = value_or(rho[0][3]);
  const double cutoff_f = value_or(rho[0][1]);
  const double scdl_flip = value_or(rho[1][3]);
  const double cutoff_flip = value_or(rho[1][1]);
  report.checks.push_back({"Spearman(SCDL, regret) >= 0.8 for f", scdl_f >= 0.8, true,
                           fixed(scdl_f)});
  report.checks.push_back({"Spearman(SCDL, regret) > Spearman(Cutoff, regret) for 1-f",
                           scdl_flip > cutoff_flip, true,
                           fixed(scdl_flip) + " vs " + fixed(cutoff_flip)});
  report.checks.push_back({"Spearman(Cutoff, regret) >= 0.8 for f", cutoff_f >= 0.8, false,
                           fixed(cutoff_f)});
  report.checks.push_back({"rounded response regret <= 2 SCDL + 2/m* + 1e-6",
                           rounded_violations == 0 && rounded_checked > 0, true,
                           std::to_string(rounded_violations) + " violations in " +
                               std::to_string(rounded_checked) + ", worst margin " +
                               fixed(worst_margin, 6)});
  return report;
}

// ---------------------------------------------------------------------------
// Testability scaling

/// {(i/8, i/8, 1/9) : i = 0..8}.
inline DiscreteDistribution calibrated_grid_distribution() {
  std::vector<SupportPoint> pts;
  for (int i = 0; i <= 8; ++i) pts.push_back({i / 8.0, i / 8.0, 1.0 / 9.0});
  return DiscreteDistribution(std::move(pts));
}

/// Calibrated law with p uniform on [1/3, 2/3], discretized at n midpoints.
inline DiscreteDistribution uniform_middle_third(std::size_t n = 3000) {
  return midpoint_quadrature(
      n, [](double x) { return (1.0 + x) / 3.0; }, [](double x) { return (1.0 + x) / 3.0; });
}

struct TestabilityOptions {
  std::vector<std::size_t> sizes = {128, 256, 512, 1024, 2048, 4096, 8192};
  std::size_t reps = 200;
  std::uint64_t seed = 0;
};

inline ExperimentReport testability_scan(const DiscreteDistribution& dist,
                                         const TestabilityOptions& opt) {
  if (opt.sizes.size() < 2 || opt.reps == 0) throw Error("need at least two sizes and one rep");
  ExperimentReport report;
  report.experiment = "testability";
  report.metadata = {{"seed", opt.seed},
                     {"reps", opt.reps},
                     {"sizes", opt.sizes},
                     {"distribution", to_json(dist)}};

  const std::array<const char*, 4> names = {"SCDL", "bECE", "Cutoff", "smCE"};
  const std::array<double, 4> truth = {scdl(dist).value, binned_ece(dist, 11).value,
                                       cutoff(dist), smce(dist).value};
  std::array<std::vector<double>, 4> mean_error;
  std::vector<double> xs;
  double min_vmax = std::numeric_limits<double>::infinity();

  for (std::size_t ti = 0; ti < opt.sizes.size(); ++ti) {
    const std::size_t T = opt.sizes[ti];
    std::array<RunningStats, 4> err;
    RunningStats vm;
    double vmin = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < opt.reps; ++r) {
      CounterRng rng(opt.seed + r, (ti << 8) | streams::kSampling);
      const auto sample = sample_from(dist, T, rng);
      const auto emp = from_sample(sample);
      const std::array<double, 4> est = {scdl_of_sample(sample).value,
                                         binned_ece(emp, 11).value, cutoff(emp),
                                         smce(emp).value};
      for (std::size_t j = 0; j < 4; ++j) err[j].add(std::abs(est[j] - truth[j]));
      const double v = vmax(emp).value;
      vm.add(v);
      vmin = std::min(vmin, v);
    }
    min_vmax = std::min(min_vmax, vmin);
    xs.push_back(static_cast<double>(T));
    Json row = {{"T", T}};
    for (std::size_t j = 0; j < 4; ++j) {
      mean_error[j].push_back(err[j].mean());
      row[std::string(names[j]) + "_mean_abs_error"] = err[j].mean();
      row[std::string(names[j]) + "_std_abs_error"] = err[j].stddev();
    }
    row["vmax_mean"] = vm.mean();
    row["vmax_min"] = vmin;
    report.rows.push_back(row);
  }

  Json slopes = Json::object();
  for (std::size_t j = 0; j < 4; ++j) {
    const bool positive = std::all_of(mean_error[j].begin(), mean_error[j].end(),
                                      [](double e) { return e > 0.0; });
    slopes[names[j]] = positive ? Json(loglog_slope(xs, mean_error[j])) : Json(nullptr);
  }
  Json truth_json = Json::object();
  for (std::size_t j = 0; j < 4; ++j) truth_json[names[j]] = truth[j];
  report.summary = {{"population", truth_json}, {"slopes", slopes}, {"vmax_min", min_vmax}};

  const bool have_slope = !slopes["SCDL"].is_null();
  const double slope = have_slope ? slopes["SCDL"].get<double>() : 0.0;
  report.checks.push_back({"SCDL log-log error slope in [-0.65, -0.35]",
                           have_slope && slope >= -0.65 && slope <= -0.35, true,
                           have_slope ? fixed(slope) : "undefined"});
  report.checks.push_back({"SCDL mean error decreases from first to last T",
                           mean_error[0].back() < mean_error[0].front(), true,
                           fixed(mean_error[0].front(), 5) + " -> " +
                               fixed(mean_error[0].back(), 5)});
  return report;
}

// ---------------------------------------------------------------------------
// Lower-bound demo

struct LowerBoundOptions {
  std::vector<std::size_t> sizes = {4, 16, 64, 256};
  std::size_t reps = 2000;
  std::uint64_t seed = 0;
  /// Sizes at or below this also get the exact fraction by enumerating all
  /// 2^T outcome sequences.
  std::size_t exhaustive_limit = 16;
  /// The frequency gate applies from this size on.
  std::size_t gate_from = 16;
};

/// Swap regret under the matching task of the constant responses a = 0 and
/// a = 1 on T points at p = 1/2 with `ones` positive outcomes.
inline std::array<double, 2> constant_response_regrets(std::size_t T, std::size_t ones) {
  std::vector<Observation> obs(T, {0.5, 0});
  for (std::size_t t = 0; t < ones; ++t) obs[t].y = 1;
  const auto dist = from_sample(EmpiricalSample(std::move(obs)));
  const auto task = matching_task();
  return {swap_regret(task, Response::threshold(2.0), dist),
          swap_regret(task, Response::threshold(0.0), dist)};
}

inline ExperimentReport lower_bound_demo(const LowerBoundOptions& opt) {
  if (opt.sizes.empty() || opt.reps == 0) throw Error("need at least one size and one rep");
  ExperimentReport report;
  report.experiment = "lower-bound";
  report.metadata = {{"seed", opt.seed},
                     {"reps", opt.reps},
                     {"sizes", opt.sizes},
                     {"threshold", "0.3 / sqrt(T)"},
                     {"task", "matching"}};
  const DiscreteDistribution coin({{0.5, 0.5, 1.0}});

  for (std::size_t ti = 0; ti < opt.sizes.size(); ++ti) {
    const std::size_t T = opt.sizes[ti];
    if (T == 0) throw Error("sample size must be at least 1");
    const double threshold = 0.3 / std::sqrt(static_cast<double>(T));
    std::vector<std::array<double, 2>> by_ones(T + 1);
    for (std::size_t k = 0; k <= T; ++k) by_ones[k] = constant_response_regrets(T, k);

    std::array<std::size_t, 2> hits = {0, 0};
    for (std::size_t r = 0; r < opt.reps; ++r) {
      CounterRng rng(opt.seed + r, (ti << 8) | streams::kSampling);
      const auto sample = sample_from(coin, T, rng);
      std::size_t ones = 0;
      for (const auto& o : sample.points()) ones += static_cast<std::size_t>(o.y);
      for (int c = 0; c < 2; ++c) hits[c] += by_ones[ones][c] >= threshold ? 1 : 0;
    }
    const double reps = static_cast<double>(opt.reps);
    const std::array<double, 2> frac = {static_cast<double>(hits[0]) / reps,
                                        static_cast<double>(hits[1]) / reps};
    const double best = std::max(frac[0], frac[1]);
    Json row = {{"T", T},
                {"threshold", threshold},
                {"fraction_a0", frac[0]},
                {"fraction_a1", frac[1]},
                {"fraction_best", best}};

    if (T <= opt.exhaustive_limit) {
      // Every outcome sequence, each with probability 2^-T.
      std::array<double, 2> exact = {0.0, 0.0};
      const std::uint64_t total = std::uint64_t{1} << T;
      for (std::uint64_t bits = 0; bits < total; ++bits) {
        const auto ones = static_cast<std::size_t>(__builtin_popcountll(bits));
        for (int c = 0; c < 2; ++c) exact[c] += by_ones[ones][c] >= threshold ? 1.0 : 0.0;
      }
      for (auto& e : exact) e /= static_cast<double>(total);
      row["exact_a0"] = exact[0];
      row["exact_a1"] = exact[1];
      bool ok = true;
      std::string detail;
      for (int c = 0; c < 2; ++c) {
        const double sigma = std::sqrt(exact[c] * (1.0 - exact[c]) / reps);
        const bool within = std::abs(frac[c] - exact[c]) <= 3.0 * sigma + 1e-12;
        ok = ok && within;
        detail += (c ? "; " : "") + std::string("a=") + std::to_string(c) + ": " +
                  fixed(frac[c]) + " vs exact " + fixed(exact[c]);
      }
      report.checks.push_back(
          {"T=" + std::to_string(T) + " Monte Carlo within 3 sigma of enumeration", ok, true,
           detail});
    }
    if (T >= opt.gate_from) {
      report.checks.push_back({"T=" + std::to_string(T) +
                                   " better constant response has SR >= 0.3/sqrt(T) with "
                                   "frequency >= 1/3",
                               best >= 1.0 / 3.0, true, fixed(best)});
    }
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Gap constructions as reports

inline ExperimentReport gap_smce_report(double eps, const std::vector<double>& cuts) {
  const auto gap = gap_smce(eps);
  ExperimentReport report;
  report.experiment = "gap-smce";
  report.metadata = {{"eps", eps},
                     {"first", to_json(gap.first)},
                     {"second", to_json(gap.second)}};
  const double s1 = smce(gap.first).value;
  const double s2 = smce(gap.second).value;
  double min_max = std::numeric_limits<double>::infinity();
  for (const double cut : cuts) {
    const auto r = Response::threshold(cut);
    const double r1 = swap_regret(gap.task, r, gap.first);
    const double r2 = swap_regret(gap.task, r, gap.second);
    min_max = std::min(min_max, std::max(r1, r2));
    report.rows.push_back({{"cut", cut}, {"regret_first", r1}, {"regret_second", r2},
                           {"max_regret", std::max(r1, r2)}});
  }
  report.summary = {{"smce_first", s1}, {"smce_second", s2}, {"min_max_regret", min_max}};
  const bool equal = std::abs(s1 - eps) <= 1e-9 && std::abs(s2 - eps) <= 1e-9;
  report.checks.push_back({"smCE of both laws equals eps within 1e-9", equal, true,
                           fixed(s1, 10) + ", " + fixed(s2, 10)});
  // The bound is attained with equality at the midpoint cut, so allow
  // floating-point slack.
  const double need = 0.25 * std::sqrt(eps);
  report.checks.push_back({"every threshold response has max regret >= sqrt(eps)/4",
                           min_max >= need - 1e-12, true,
                           fixed(min_max, 6) + " vs " + fixed(need, 6)});
  return report;
}

inline std::vector<double> default_threshold_cuts(double eps) {
  std::vector<double> cuts;
  for (int k = 0; k <= 40; ++k) cuts.push_back(k / 40.0);
  const double root = std::sqrt(eps);
  for (const double c : {0.5 - root, 0.5 + root, 0.5 - root + 1e-9, 0.5 + root + 1e-9, 0.5}) {
    cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

/// Parses identity | nearest:<m> | threshold:<cut> | rounded:<m> (identity
/// after randomized rounding).
inline Response parse_quadratic_response(const std::string& spec) {
  if (spec == "identity") return Response::identity();
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw Error("unknown response: " + spec);
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  double value = 0.0;
  if (!detail::parse_double(arg, value)) throw Error("bad response argument: " + spec);
  if (kind == "nearest" || kind == "rounded") {
    if (!(value >= 1.0) || value != std::floor(value)) {
      throw Error("grid size must be a positive integer: " + spec);
    }
    const auto m = static_cast<GridSize>(value);
    return kind == "nearest" ? Response::nearest_grid(m) : Response::rounded(Response::identity(), m);
  }
  if (kind == "threshold") {
    return Response::table("threshold(" + arg + ")",
                           [value](double p) { return p >= value ? 1.0 : 0.0; }, false);
  }
  throw Error("unknown response: " + spec);
}

inline ExperimentReport gap_cutoff_report(double eps, const std::string& response_spec) {
  const auto response = parse_quadratic_response(response_spec);
  const auto gap = gap_cutoff(eps, response);
  ExperimentReport report;
  report.experiment = "gap-cutoff";
  report.metadata = {{"eps", eps}, {"response", response.name()}, {"k", gap.points}};
  for (const auto* c : {&gap.oscillating, &gap.single_point}) {
    report.rows.push_back({{"candidate", c->name},
                           {"cutoff", c->cutoff},
                           {"regret", c->regret},
                           {"distribution", to_json(c->dist)}});
  }
  const double need = std::pow(eps, 2.0 / 3.0) / 4.0;
  report.summary = {{"chosen", gap.chosen},
                    {"regret", gap.regret},
                    {"p0", gap.p0},
                    {"oscillating_cutoff", gap.oscillating.cutoff},
                    {"regret_floor", need}};
  report.checks.push_back({"oscillating law has Cutoff = eps within 1e-12",
                           std::abs(gap.oscillating.cutoff - eps) <= 1e-12, true,
                           fixed(gap.oscillating.cutoff, 12)});
  report.checks.push_back({"response regret >= eps^(2/3)/4", gap.regret >= need, true,
                           fixed(gap.regret, 6) + " vs " + fixed(need, 6)});
  return report;
}

// ---------------------------------------------------------------------------
// Prediction curves

/// Per alpha: x, E[Y | f(X) = f(x)], f(x) and 1 - f(x) on a coarse x grid,
/// with f fit exactly as in table2.
inline ExperimentReport curves(const std::vector<double>& alphas, std::uint64_t seed,
                               std::size_t points = 101, std::size_t grid_size = 4096) {
  if (points < 2) throw Error("need at least two curve points");
  ExperimentReport report;
  report.experiment = "curves";
  report.metadata = {{"seed", seed}, {"alphas", alphas}, {"points", points},
                     {"grid_size", grid_size}};
  Json fits = Json::array();
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const Predictor f = fit_logistic(GeneratorConfig{alphas[a], 500, seed, a});
    fits.push_back({{"alpha", alphas[a]}, {"w0", f.intercept()}, {"w1", f.slope()}});
    const auto pop = population_joint(f, alphas[a], grid_size);
    for (std::size_t k = 0; k < points; ++k) {
      // Sample x on the quadrature midpoints so E[Y | f(x)] is the merged atom.
      const std::size_t cell = k * (grid_size - 1) / (points - 1);
      const double x = (static_cast<double>(cell) + 0.5) / static_cast<double>(grid_size);
      const double p = f(x);
      const auto support = pop.support();
      const auto it = std::lower_bound(support.begin(), support.end(), p,
                                       [](const SupportPoint& s, double v) { return s.p < v; });
      const double cond = (it != support.end() && it->p == p) ? it->q
                                                               : true_conditional(alphas[a], x);
      report.rows.push_back({{"alpha", alphas[a]},
                             {"x", x},
                             {"conditional", cond},
                             {"f", p},
                             {"one_minus_f", 1.0 - p}});
    }
  }
  report.metadata["fits"] = fits;
  return report;
}

}  // namespace calibloss
