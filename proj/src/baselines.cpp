#include "uavrsma/baselines.hpp"

namespace uavrsma {

PlanMetrics SchemeResult::recompute(const Scenario& scenario) const {
  return evaluate_plan(scenario.config, make_channels(scenario.config, point.uav, scenario.users),
                       plan, point);
}

SchemeResult solve_scheme(Scheme scheme, const Scenario& scenario, const SolverSettings& settings,
                          const OperatingPoint* warm_start) {
  SchemeResult out;
  out.scheme = scheme;
  AlternatingResult r = warm_start ? alternating_optimize(scenario, scheme, *warm_start, settings)
                                   : alternating_optimize(scenario, scheme, settings);
  out.point = std::move(r.point);
  out.plan = std::move(r.plan);
  out.metrics = std::move(r.metrics);
  out.trace = std::move(r.trace);
  out.feasible = r.feasible;
  return out;
}

SchemeResult solve_rsma(const Scenario& scenario, const SolverSettings& settings) {
  return solve_scheme(Scheme::kRsma, scenario, settings);
}

SchemeResult solve_noma(const Scenario& scenario, const SolverSettings& settings) {
  return solve_scheme(Scheme::kNoma, scenario, settings);
}

SchemeResult solve_oma(const Scenario& scenario, const SolverSettings& settings) {
  return solve_scheme(Scheme::kOma, scenario, settings);
}

}  // namespace uavrsma
