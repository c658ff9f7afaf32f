#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "calibloss/baselines.hpp"
#include "calibloss/binning.hpp"
#include "calibloss/distributions.hpp"
#include "calibloss/error.hpp"
#include "calibloss/scdl.hpp"

namespace calibloss {

/// Finite action set with utilities U(a, y) in [0, 1] for y in {0, 1}.
/// Actions are identified by their position in declaration order.
class DecisionTask {
 public:
  struct Action {
    std::string name;
    double if_zero = 0.0;  // U(a, 0)
    double if_one = 0.0;   // U(a, 1)
  };

  explicit DecisionTask(std::vector<Action> actions) : actions_(std::move(actions)) {
    if (actions_.empty()) throw Error("a decision task needs at least one action");
    for (const auto& a : actions_) {
      if (!(a.if_zero >= 0.0 && a.if_zero <= 1.0 && a.if_one >= 0.0 && a.if_one <= 1.0)) {
        throw Error("utility of action '" + a.name + "' outside [0, 1]");
      }
    }
  }

  std::size_t size() const { return actions_.size(); }
  const Action& operator[](std::size_t a) const { return actions_[a]; }
  const std::vector<Action>& actions() const { return actions_; }

  double utility(std::size_t a, int y) const {
    return y == 1 ? actions_[a].if_one : actions_[a].if_zero;
  }

  /// (1 - p) U(a, 0) + p U(a, 1).
  double expected_utility(std::size_t a, double p) const {
    return (1.0 - p) * actions_[a].if_zero + p * actions_[a].if_one;
  }

 private:
  std::vector<Action> actions_;
};

/// U(a, y) = 1{a = y}.
inline DecisionTask matching_task() {
  return DecisionTask({{"0", 1.0, 0.0}, {"1", 0.0, 1.0}});
}

/// U(a, y) = 1 - c (1 - y) a - (1 - c) y (1 - a); the best response is to
/// act once p exceeds c.
inline DecisionTask cost_sensitive_task(double cost = 0.35) {
  if (!(cost >= 0.0 && cost <= 1.0)) throw Error("cost must lie in [0, 1]");
  return DecisionTask({{"0", 1.0, cost}, {"1", 1.0 - cost, 1.0}});
}

/// Task file: CSV with header `action,u0,u1`, one action per row.
inline DecisionTask parse_task(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<DecisionTask::Action> actions;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = detail::trim(line);
    if (!have_header) {
      if (view != "action,u0,u1") {
        throw Error("missing header `action,u0,u1`, line " + std::to_string(line_no));
      }
      have_header = true;
      continue;
    }
    if (view.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = view.find(',', start);
      cells.push_back(view.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    double u0 = 0.0, u1 = 0.0;
    if (cells.size() != 3 || !detail::parse_double(cells[1], u0) ||
        !detail::parse_double(cells[2], u1)) {
      throw Error("malformed row, line " + std::to_string(line_no));
    }
    if (u0 < 0.0 || u0 > 1.0 || u1 < 0.0 || u1 > 1.0) {
      throw Error("utility out of range, line " + std::to_string(line_no));
    }
    actions.push_back({std::string(detail::trim(cells[0])), u0, u1});
  }
  if (actions.empty()) throw Error("empty input");
  return DecisionTask(std::move(actions));
}

inline DecisionTask load_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_task(in);
}

/// argmax_a E_{y ~ Ber(p)} U(a, y); ties go to the earliest action.
inline std::size_t best_response(const DecisionTask& task, double p) {
  std::size_t best = 0;
  double best_value = task.expected_utility(0, p);
  for (std::size_t a = 1; a < task.size(); ++a) {
    const double v = task.expected_utility(a, p);
    if (v > best_value) {
      best_value = v;
      best = a;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Response functions

struct WeightedAction {
  double action = 0.0;
  double prob = 0.0;
};

/// Distribution over actions produced for one prediction.
using ActionLaw = std::vector<WeightedAction>;

/// A (possibly randomized) map from predictions to actions.
///
/// Finite-task actions are indices into the task's action list, carried as
/// doubles so that the quadratic task (actions in [0, 1]) shares the type.
class Response {
 public:
  enum class Kind { best_response, threshold, identity_quadratic, table, rounded };

  static Response best_response(DecisionTask task) {
    auto shared = std::make_shared<const DecisionTask>(std::move(task));
    return Response(Kind::best_response, "best_response", true,
                    [shared](double p) -> ActionLaw {
                      return {{static_cast<double>(calibloss::best_response(*shared, p)), 1.0}};
                    });
  }

  /// Action 1 when p >= cut, else action 0.
  static Response threshold(double cut) {
    std::ostringstream name;
    name << "threshold(" << cut << ")";
    return Response(Kind::threshold, name.str(), true, [cut](double p) -> ActionLaw {
      return {{p >= cut ? 1.0 : 0.0, 1.0}};
    });
  }

  /// a = p, for the quadratic task on A = [0, 1].
  static Response identity() {
    return Response(Kind::identity_quadratic, "identity", false,
                    [](double p) -> ActionLaw { return {{p, 1.0}}; });
  }

  /// Exact lookup p -> action; evaluating an absent p is an error.
  static Response table(std::map<double, double> actions, bool finite_actions) {
    auto shared = std::make_shared<const std::map<double, double>>(std::move(actions));
    return Response(Kind::table, "table", finite_actions, [shared](double p) -> ActionLaw {
      const auto it = shared->find(p);
      if (it == shared->end()) throw Error("response table has no entry for the prediction");
      return {{it->second, 1.0}};
    });
  }

  /// Deterministic map given as a function of p.
  static Response table(std::string name, std::function<double(double)> map,
                        bool finite_actions) {
    return Response(Kind::table, std::move(name), finite_actions,
                    [map = std::move(map)](double p) -> ActionLaw { return {{map(p), 1.0}}; });
  }

  /// p -> nearest multiple of 1/m (halves round up), a real action.
  static Response nearest_grid(GridSize m) {
    if (m == 0) throw Error("grid size must be positive");
    std::ostringstream name;
    name << "nearest(1/" << m << ")";
    const double md = static_cast<double>(m);
    return table(name.str(), [md](double p) { return std::floor(p * md + 0.5) / md; }, false);
  }

  /// inner applied to the randomized rounding of p onto the 1/m grid.
  static Response rounded(Response inner, GridSize m) {
    if (m == 0) throw Error("grid size must be positive");
    std::ostringstream name;
    name << inner.name() << " o round(" << m << ")";
    const bool finite = inner.finite_actions();
    auto shared = std::make_shared<const Response>(std::move(inner));
    return Response(Kind::rounded, name.str(), finite, [shared, m](double p) -> ActionLaw {
      const auto loc = locate(p, m);
      const double md = static_cast<double>(m);
      ActionLaw law;
      auto add = [&](GridSize bin, double prob) {
        if (prob <= 0.0) return;
        for (const auto& wa : (*shared)(static_cast<double>(bin) / md)) {
          law.push_back({wa.action, wa.prob * prob});
        }
      };
      add(loc.lower, 1.0 - loc.upper_share);
      add(loc.lower + 1, loc.upper_share);
      return law;
    });
  }

  ActionLaw operator()(double p) const { return law_(p); }
  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  /// False when actions are real numbers rather than task indices.
  bool finite_actions() const { return finite_; }

 private:
  Response(Kind kind, std::string name, bool finite, std::function<ActionLaw(double)> law)
      : kind_(kind), name_(std::move(name)), finite_(finite), law_(std::move(law)) {}

  Kind kind_;
  std::string name_;
  bool finite_;
  std::function<ActionLaw(double)> law_;
};

// ---------------------------------------------------------------------------
// Swap regret

/// Joint law of (action, outcome) under dist and response, grouped by
/// action: mass Pr[a] and outcome mass Pr[a, y = 1].
struct ActionOutcomeLaw {
  std::map<double, std::pair<double, double>> by_action;
};

inline ActionOutcomeLaw action_outcome_law(const Response& response,
                                           const DiscreteDistribution& dist) {
  ActionOutcomeLaw law;
  for (const auto& pt : dist.support()) {
    for (const auto& wa : response(pt.p)) {
      if (wa.prob <= 0.0) continue;
      auto& cell = law.by_action[wa.action];
      cell.first += pt.w * wa.prob;
      cell.second += pt.w * wa.prob * pt.q;
    }
  }
  return law;
}

/// sup over swaps sigma : A -> A of E[U(sigma(a), y) - U(a, y)], which
/// decomposes into an independent best swap per realized action.
inline double swap_regret(const DecisionTask& task, const Response& response,
                          const DiscreteDistribution& dist) {
  if (!response.finite_actions()) {
    throw Error("response has a continuous action set: use swap_regret_quadratic");
  }
  const auto law = action_outcome_law(response, dist);
  double total = 0.0;
  for (const auto& [action, cell] : law.by_action) {
    const auto a = static_cast<std::size_t>(action);
    if (action < 0.0 || static_cast<double>(a) != action || a >= task.size()) {
      throw Error("response produced an action outside the task");
    }
    const double ones = cell.second;
    const double zeros = cell.first - cell.second;
    auto gain = [&](std::size_t b) {
      return zeros * task.utility(b, 0) + ones * task.utility(b, 1);
    };
    const double current = gain(a);
    double best = current;
    for (std::size_t b = 0; b < task.size(); ++b) best = std::max(best, gain(b));
    total += best - current;
  }
  return total;
}

/// Swap regret for A = [0, 1], U(a, y) = 1 - (a - y)^2: the best swap sends
/// each action to E[y | a], leaving E[(a - E[y | a])^2].
inline double swap_regret_quadratic(const DiscreteDistribution& dist, const Response& response) {
  const auto law = action_outcome_law(response, dist);
  double total = 0.0;
  for (const auto& [action, cell] : law.by_action) {
    const double mean = cell.second / cell.first;
    total += cell.first * (action - mean) * (action - mean);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Actionability check

struct ActionabilityReport {
  GridSize m = 0;
  /// sup V of the rounded law, a lower bound on its CDL.
  double lower = 0.0;
  /// 2 scdl_m + 2 / m.
  double upper = 0.0;
  bool pass = false;
};

inline bool is_power_of_two(GridSize m) { return m >= 2 && (m & (m - 1)) == 0; }

inline ActionabilityReport check_actionability(const DiscreteDistribution& dist, GridSize m) {
  if (!is_power_of_two(m)) throw Error("m must be a power of two, at least 2");
  ActionabilityReport r;
  r.m = m;
  r.lower = vmax(round_distribution(dist, m)).value;
  r.upper = 2.0 * scdl_m(dist, m) + 2.0 / static_cast<double>(m);
  r.pass = r.lower <= r.upper + 1e-10;
  return r;
}

// ---------------------------------------------------------------------------
// Gap constructions

struct SmceGap {
  DiscreteDistribution first;
  DiscreteDistribution second;
  DecisionTask task;
};

/// Two laws with smooth calibration error eps whose best actions disagree
/// at the shared prediction 1/2 - sqrt(eps), under
/// U(a, y) = (1 - sqrt eps) 1{a = 0, y = 0} + 1{a = 1, y = 1}.
inline SmceGap gap_smce(double eps) {
  if (!(eps > 0.0 && eps < 0.125)) throw Error("epsilon must lie in (0, 1/8)");
  const double root = std::sqrt(eps);
  DiscreteDistribution first({{0.5 - root, 0.5, 0.5}, {0.5 + root, 0.5, 0.5}});
  DiscreteDistribution second({{0.5 - root, 0.5 - root - eps, 1.0}});
  DecisionTask task({{"0", 1.0 - root, 0.0}, {"1", 0.0, 1.0}});
  return {std::move(first), std::move(second), std::move(task)};
}

struct CutoffGapCandidate {
  std::string name;
  DiscreteDistribution dist;
  double cutoff = 0.0;
  double regret = 0.0;
};

struct CutoffGapReport {
  double eps = 0.0;
  GridSize points = 0;
  /// Prediction of the single-atom candidate.
  double p0 = 0.0;
  CutoffGapCandidate oscillating;
  CutoffGapCandidate single_point;
  /// "oscillating" or "single_point", whichever has larger regret.
  std::string chosen;
  double regret = 0.0;
};

/// floor(eps^{-1/3}) with a relative tolerance of 1e-9 against cube-root
/// rounding (eps = 1e-3 must give 10).
inline GridSize cube_root_floor_inverse(double eps) {
  auto m = static_cast<GridSize>(std::llround(std::cbrt(1.0 / eps)));
  auto cube_times = [eps](GridSize k) {
    const double kd = static_cast<double>(k);
    return kd * kd * kd * eps;
  };
  while (m > 1 && cube_times(m) > 1.0 + 1e-9) --m;
  while (cube_times(m + 1) <= 1.0 + 1e-9) ++m;
  return m;
}

/// Both candidate laws behind the eps^{2/3} gap between Cutoff and quadratic
/// swap regret, evaluated against `response`:
///   oscillating: k = floor(eps^{-1/3}) atoms at 1/3 + i/(3k), mass 3 eps
///     each, E[y|p_i] = p_i + (-1)^i / 3, remaining mass at (0, q = 0);
///   single point: p0 with E[y] = p0 + eps, p0 chosen on a grid over
///     [0, 1 - eps] to maximize the regret of `response`.
inline CutoffGapReport gap_cutoff(double eps, const Response& response,
                                  std::size_t p0_grid = 4096) {
  if (!(eps > 0.0 && eps < 1e-2)) throw Error("epsilon must lie in (0, 0.01)");
  const GridSize k = cube_root_floor_inverse(eps);
  const double kd = static_cast<double>(k);
  if (3.0 * kd * eps >= 1.0) throw Error("epsilon too large for the construction");

  CutoffGapReport out{eps, k, 0.0,
                      {"oscillating", DiscreteDistribution({{0.0, 0.0, 1.0}}), 0, 0},
                      {"single_point", DiscreteDistribution({{0.0, 0.0, 1.0}}), 0, 0},
                      "", 0.0};

  std::vector<SupportPoint> pts;
  pts.push_back({0.0, 0.0, 1.0 - 3.0 * kd * eps});
  for (GridSize i = 1; i <= k; ++i) {
    const double p = 1.0 / 3.0 + static_cast<double>(i) / (3.0 * kd);
    const double bias = (i % 2 == 0) ? 1.0 / 3.0 : -1.0 / 3.0;
    pts.push_back({p, std::clamp(p + bias, 0.0, 1.0), 3.0 * eps});
  }
  out.oscillating.dist = DiscreteDistribution(std::move(pts));
  out.oscillating.cutoff = cutoff(out.oscillating.dist);
  out.oscillating.regret = swap_regret_quadratic(out.oscillating.dist, response);

  double best_regret = -1.0;
  for (std::size_t g = 0; g <= p0_grid; ++g) {
    const double p0 = (1.0 - eps) * static_cast<double>(g) / static_cast<double>(p0_grid);
    DiscreteDistribution d({{p0, p0 + eps, 1.0}});
    const double r = swap_regret_quadratic(d, response);
    if (r > best_regret) {
      best_regret = r;
      out.p0 = p0;
      out.single_point.dist = std::move(d);
      out.single_point.regret = r;
    }
  }
  out.single_point.cutoff = cutoff(out.single_point.dist);

  if (out.oscillating.regret >= out.single_point.regret) {
    out.chosen = "oscillating";
    out.regret = out.oscillating.regret;
  } else {
    out.chosen = "single_point";
    out.regret = out.single_point.regret;
  }
  return out;
}

}  // namespace calibloss
