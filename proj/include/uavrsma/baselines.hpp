#pragma once

// RSMA and the two comparators run through the same alternating optimizer;
// only the decoding plan differs.

#include "uavrsma/decoding_plan.hpp"
#include "uavrsma/model.hpp"
#include "uavrsma/subproblems.hpp"

namespace uavrsma {

struct SchemeResult {
  Scheme scheme = Scheme::kRsma;
  OperatingPoint point;  // NOMA/OMA: column 0 and beta are zero
  DecodingPlan plan;
  PlanMetrics metrics;
  SolveTrace trace;
  bool feasible = false;

  /// Re-evaluates the stored point under the stored plan.
  [[nodiscard]] PlanMetrics recompute(const Scenario& scenario) const;
};

/// Optimizes `scheme` from `warm_start` when given, else from initial_point().
SchemeResult solve_scheme(Scheme scheme, const Scenario& scenario, const SolverSettings& settings,
                          const OperatingPoint* warm_start = nullptr);

SchemeResult solve_rsma(const Scenario& scenario, const SolverSettings& settings);
/// Gain-ordered SIC, no common stream.
SchemeResult solve_noma(const Scenario& scenario, const SolverSettings& settings);
/// K equal time slots; the radar sees the slot-averaged covariance.
SchemeResult solve_oma(const Scenario& scenario, const SolverSettings& settings);

}  // namespace uavrsma
