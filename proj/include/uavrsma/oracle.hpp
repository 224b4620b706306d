#pragma once

// Brute-force references for the RSMA problem. The physics here is written
// out again from the definitions and does not call into model.cpp, so the
// oracles can catch mistakes there.

#include <cstdint>
#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "uavrsma/linearize.hpp"
#include "uavrsma/model.hpp"

namespace uavrsma {

enum class Execution { kSerial, kParallel };

struct GridSearchResult {
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  double objective = 0.0;  // sum_k log2(1 + private SINR_k)
  long evaluated = 0;
  long feasible = 0;
};

/// Exhaustive search over the lattice {0, step, 2 step, ...}^2 of the area
/// for the best private sum rate with x and beta fixed, subject to QoS and
/// the common-rate constraint. Ties go to the lowest lattice index.
/// Empty when no lattice point is feasible. Throws on step <= 0.
std::optional<GridSearchResult> grid_search_location(const Scenario& scenario,
                                                     const Eigen::MatrixXcd& x,
                                                     const Eigen::VectorXd& beta, double step,
                                                     Execution exec = Execution::kParallel);

struct SamplerResult {
  double energy_efficiency = 0.0;
  Eigen::MatrixXcd x;
  Eigen::VectorXd beta;
  long feasible = 0;
  long sample_index = -1;
};

/// Draws n (x, beta) pairs at the fixed UAV position z: complex Gaussian
/// columns scaled to a uniform total power in [0, P_max], beta uniform on
/// {beta >= 0, sum beta <= R_c(x)}. Returns the best feasible EE, ties to
/// the lowest sample index. Sample i uses its own stream, so the serial and
/// parallel paths agree bit for bit.
std::optional<SamplerResult> random_feasible_sampler(const Scenario& scenario,
                                                     const Eigen::Vector2d& z, long n,
                                                     std::uint64_t seed,
                                                     Execution exec = Execution::kParallel);

/// Independent RSMA EE and feasibility at (z, x, beta).
struct OracleEvaluation {
  double energy_efficiency = 0.0;
  double private_sum_rate = 0.0;
  double min_common_rate = 0.0;
  double max_residual = 0.0;
};
OracleEvaluation oracle_evaluate(const Scenario& scenario, const Eigen::Vector2d& z,
                                 const Eigen::MatrixXcd& x, const Eigen::VectorXd& beta);

struct FiniteDifferenceReport {
  double value_gap = 0.0;        // |f(v_ref) - s(v_ref)|
  double max_grad_relerr = 0.0;  // max_i |g_fd - g| / max(|g_fd|_inf, 1e-12)
  [[nodiscard]] bool passed() const { return value_gap <= 1e-10 && max_grad_relerr <= 1e-4; }
};

/// Central differences of `f` at the surrogate's reference point.
FiniteDifferenceReport finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& f, const AffineSurrogate& surrogate,
    double step);

}  // namespace uavrsma
