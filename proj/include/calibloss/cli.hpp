#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calibloss/baselines.hpp"
#include "calibloss/decisions.hpp"
#include "calibloss/distributions.hpp"
#include "calibloss/experiments.hpp"
#include "calibloss/report.hpp"
#include "calibloss/scdl.hpp"
#include "calibloss/selftest.hpp"

namespace calibloss {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsage = 2;
}  // namespace exit_code

inline const std::vector<std::string> kMeasureNames = {"scdl", "ece", "bece",
                                                       "smce", "cutoff", "cdl"};
inline const std::vector<std::string> kExperimentNames = {
    "table2", "actionability", "testability", "lower-bound", "gap-smce", "gap-cutoff", "curves"};

inline std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) out += (k ? sep : "") + items[k];
  return out;
}

/// Flattened row {name, value, detail...} per requested measure.
inline Json measure_rows(const EmpiricalSample& sample, const std::vector<std::string>& measures,
                         std::uint64_t bins, BinConvention convention,
                         std::optional<unsigned> cap) {
  const auto dist = from_sample(sample);
  Json rows = Json::array();
  for (const auto& name : measures) {
    Json row = {{"name", name}};
    if (name == "scdl") {
      const auto r = scdl_of_sample(sample, cap);
      row["value"] = r.value;
      row["m_star"] = r.m_star ? Json(*r.m_star) : Json(nullptr);
      row["converged"] = r.converged;
      row["cap_exponent"] = cap.value_or(default_cap_exponent(sample.size()));
    } else if (name == "ece") {
      row["value"] = ece(dist);
    } else if (name == "bece") {
      const auto r = binned_ece(dist, bins, convention);
      row["value"] = r.value;
      row["unclipped"] = r.unclipped;
      row["bins"] = bins;
      row["convention"] = convention == BinConvention::equal_intervals ? "equal_intervals"
                                                                       : "grid_points";
    } else if (name == "smce") {
      row["value"] = smce(dist).value;
    } else if (name == "cutoff") {
      const auto r = cutoff_detailed(dist);
      row["value"] = r.value;
      row["interval_low"] = r.a;
      row["interval_high"] = r.b;
    } else if (name == "cdl") {
      const auto b = cdl_bounds(dist);
      const auto v = vmax(dist);
      row["value"] = b.lower;
      row["lower"] = b.lower;
      row["upper"] = b.upper;
      row["mu_star"] = v.mu_star;
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("CALIBLOSS_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "reports";
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibration measures, decision regret and experiment reports"};
  app.require_subcommand(1);

  // measure
  auto* measure = app.add_subcommand("measure", "Compute measures on a prediction,outcome CSV");
  std::string input;
  std::vector<std::string> measures;
  std::uint64_t bins = 11;
  std::string convention_name = "equal_intervals";
  std::optional<unsigned> cap;
  std::string format_name = "table";
  bool json_flag = false;
  measure->add_option("--input,-i", input, "CSV file with header prediction,outcome")->required();
  measure->add_option("--measures,-m", measures, "Subset of: " + join(kMeasureNames))
      ->delimiter(',');
  measure->add_option("--bins", bins, "Bin count for bece")->check(CLI::PositiveNumber);
  measure->add_option("--bin-convention", convention_name, "equal_intervals or grid_points");
  measure->add_option("--m-cap", cap, "Resolution cap exponent for scdl (2^cap)");
  measure->add_option("--format", format_name, "json, table or csv");
  measure->add_flag("--json", json_flag, "Same as --format json");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run an experiment and write its report");
  std::string experiment_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> sample_size;
  std::vector<double> alphas;
  std::optional<std::size_t> n_alphas;
  std::vector<std::size_t> sizes;
  std::optional<double> eps;
  std::string response_name = "identity";
  std::string dist_path;
  std::string preset = "grid9";
  bool refit = false;
  bool check = false;
  std::string out_dir;
  std::string exp_format = "table";
  experiment->add_option("name", experiment_name, "One of: " + join(kExperimentNames))
      ->required();
  experiment->add_option("--seed", seed, "Base seed; replication r uses seed + r");
  experiment->add_option("--reps", reps, "Replications");
  experiment->add_option("--T", sample_size, "Sample size per replication (table2)");
  experiment->add_option("--alphas", alphas, "Alpha list (table2, curves)")->delimiter(',');
  experiment->add_option("--n-alphas", n_alphas, "Random alphas (actionability)");
  experiment->add_option("--sizes", sizes, "Sample sizes (testability, lower-bound)")
      ->delimiter(',');
  experiment->add_option("--eps", eps, "Epsilon (gap-smce, gap-cutoff)");
  experiment->add_option("--response", response_name,
                         "identity, nearest:<m>, rounded:<m> or threshold:<cut> (gap-cutoff)");
  experiment->add_option("--dist", dist_path, "Distribution JSON (testability)");
  experiment->add_option("--preset", preset, "grid9 or middle-third (testability)");
  experiment->add_flag("--refit-per-rep", refit, "Refit the predictor every replication");
  experiment->add_flag("--check", check, "Exit 1 when a hard gate fails");
  experiment->add_option("--out-dir", out_dir, "Report directory (default $CALIBLOSS_OUT_DIR)");
  experiment->add_option("--format", exp_format, "Stdout rendering: json, table or csv");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Run the invariant suite");
  std::uint64_t selftest_seed = 1;
  std::size_t selftest_count = 1000;
  selftest->add_option("--seed", selftest_seed, "Seed");
  selftest->add_option("--distributions", selftest_count, "Random laws to check");

  // render
  auto* render_cmd = app.add_subcommand("render", "Re-render a saved JSON report");
  std::string report_path;
  std::string render_format = "table";
  render_cmd->add_option("report", report_path, "Report JSON")->required();
  render_cmd->add_option("--format", render_format, "json, table or csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  }

  try {
    if (*measure) {
      if (measures.empty()) measures = kMeasureNames;
      for (const auto& m : measures) {
        if (std::find(kMeasureNames.begin(), kMeasureNames.end(), m) == kMeasureNames.end()) {
          err << "error: unknown measure '" << m << "'; valid measures: " << join(kMeasureNames)
              << "\n";
          return exit_code::kUsage;
        }
      }
      const auto format = json_flag ? OutputFormat::json : parse_format(format_name);
      BinConvention convention;
      if (convention_name == "equal_intervals") {
        convention = BinConvention::equal_intervals;
      } else if (convention_name == "grid_points") {
        convention = BinConvention::grid_points;
      } else {
        throw Error("unknown bin convention: " + convention_name);
      }
      if (cap && (*cap < 1 || *cap > 48)) throw Error("--m-cap must lie in [1, 48]");
      const auto sample = load_csv(input);
      Json report;
      report["spec_version"] = kSpecVersion;
      report["kind"] = "measures";
      report["input"] = input;
      report["n"] = sample.size();
      report["measures"] = measure_rows(sample, measures, bins, convention, cap);
      out << render(report, format);
      return exit_code::kOk;
    }

    if (*experiment) {
      if (std::find(kExperimentNames.begin(), kExperimentNames.end(), experiment_name) ==
          kExperimentNames.end()) {
        err << "error: unknown experiment '" << experiment_name
            << "'; valid experiments: " << join(kExperimentNames) << "\n";
        return exit_code::kUsage;
      }
      const bool deterministic = experiment_name == "gap-smce" || experiment_name == "gap-cutoff";
      if (!deterministic && !seed) {
        err << "error: --seed is required for " << experiment_name << "\n";
        return exit_code::kUsage;
      }
      const auto format = parse_format(exp_format);
      const std::uint64_t base = seed.value_or(0);

      ExperimentReport report;
      if (experiment_name == "table2") {
        Table2Options opt;
        opt.seed = base;
        if (reps) opt.replications = *reps;
        if (sample_size) opt.sample_size = *sample_size;
        if (!alphas.empty()) opt.alphas = alphas;
        opt.refit_per_rep = refit;
        report = table2(opt);
      } else if (experiment_name == "actionability") {
        ActionabilityOptions opt;
        opt.seed = base;
        if (n_alphas) opt.n_alphas = *n_alphas;
        report = actionability_scan(opt);
      } else if (experiment_name == "testability") {
        TestabilityOptions opt;
        opt.seed = base;
        if (reps) opt.reps = *reps;
        if (!sizes.empty()) opt.sizes = sizes;
        DiscreteDistribution dist = calibrated_grid_distribution();
        if (!dist_path.empty()) {
          dist = load_distribution(dist_path);
        } else if (preset == "middle-third") {
          dist = uniform_middle_third();
        } else if (preset != "grid9") {
          throw Error("unknown preset: " + preset + " (valid: grid9, middle-third)");
        }
        report = testability_scan(dist, opt);
      } else if (experiment_name == "lower-bound") {
        LowerBoundOptions opt;
        opt.seed = base;
        if (reps) opt.reps = *reps;
        if (!sizes.empty()) opt.sizes = sizes;
        report = lower_bound_demo(opt);
      } else if (experiment_name == "gap-smce") {
        const double e = eps.value_or(0.01);
        report = gap_smce_report(e, default_threshold_cuts(e));
      } else if (experiment_name == "gap-cutoff") {
        report = gap_cutoff_report(eps.value_or(0.001), response_name);
      } else if (experiment_name == "curves") {
        report = curves(alphas.empty() ? std::vector<double>{0.0, 0.5, 0.8, 1.0} : alphas, base);
      }

      const Json json = report.to_json();
      const auto dir = out_dir.empty() ? default_out_dir() : std::filesystem::path(out_dir);
      const auto written = write_report(json, dir, utc_timestamp());
      out << render(json, format);
      std::size_t failed = 0, warned = 0;
      for (const auto& c : report.checks) {
        if (!c.passed) ++(c.hard ? failed : warned);
      }
      err << experiment_name << ": " << report.checks.size() << " checks, " << failed
          << " hard failures, " << warned << " monitored misses; wrote " << written.json.string()
          << "\n";
      return (check && !report.hard_checks_pass()) ? exit_code::kCheckFailed : exit_code::kOk;
    }

    if (*selftest) {
      SelftestOptions opt;
      opt.seed = selftest_seed;
      opt.distributions = selftest_count;
      const auto result = run_selftest(opt);
      out << format_selftest(result);
      return result.passed() ? exit_code::kOk : exit_code::kCheckFailed;
    }

    if (*render_cmd) {
      out << render(read_report(report_path), parse_format(render_format));
      return exit_code::kOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  }
  return exit_code::kUsage;
}

}  // namespace calibloss
