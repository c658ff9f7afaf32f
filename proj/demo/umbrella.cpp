// Rain forecasts and an umbrella decision: measures next to the regret a
// forecast-following decision maker actually suffers.

#include <iomanip>
#include <iostream>

#include "calibloss/calibloss.hpp"

using namespace calibloss;

namespace {

void show(const std::string& label, const DiscreteDistribution& forecasts,
          const DecisionTask& task) {
  const auto s = scdl(forecasts);
  const double regret = swap_regret(task, Response::best_response(task), forecasts);
  std::cout << std::left << std::setw(22) << label << std::fixed << std::setprecision(4)
            << " ECE " << ece(forecasts) << "  smCE " << smce(forecasts).value << "  Cutoff "
            << cutoff(forecasts) << "  SCDL " << s.value << "  regret " << regret << "\n";
}

}  // namespace

int main() {
  // Carrying an umbrella costs 0.35 on dry days; skipping it costs 0.65 in rain.
  const DecisionTask umbrella = cost_sensitive_task(0.35);

  show("calibrated", DiscreteDistribution({{0.2, 0.2, 0.5}, {0.8, 0.8, 0.5}}), umbrella);
  show("overconfident", DiscreteDistribution({{0.1, 0.3, 0.5}, {0.9, 0.7, 0.5}}), umbrella);
  show("wrong side of 0.35", DiscreteDistribution({{0.3, 0.45, 0.6}, {0.7, 0.7, 0.4}}), umbrella);

  // The same measures from raw (forecast, rained) pairs.
  const auto sample = sample_from(DiscreteDistribution({{0.3, 0.45, 0.6}, {0.7, 0.7, 0.4}}), 2000, 7);
  const auto r = scdl_of_sample(sample);
  std::cout << "sample of 2000 days:   SCDL " << std::fixed << std::setprecision(4) << r.value
            << " with m* = " << (r.m_star ? std::to_string(*r.m_star) : "inf") << "\n";
  return 0;
}
