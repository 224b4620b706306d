#pragma once

// First-order surrogates for the non-convex terms of the location and
// beamforming subproblems, plus real-vectorization helpers for complex
// beamforming matrices.

#include <vector>

#include <Eigen/Dense>

#include "uavrsma/model.hpp"

namespace uavrsma {

enum class BoundDirection { kLower, kUpper, kLocal };

const char* to_string(BoundDirection d);

/// value_at_ref + gradient . (v - reference_point)
struct AffineSurrogate {
  Eigen::VectorXd reference_point;
  Eigen::VectorXd gradient;
  double value_at_ref = 0.0;
  BoundDirection direction = BoundDirection::kLocal;

  [[nodiscard]] double evaluate(const Eigen::VectorXd& v) const;
  /// Constant term once the expression is written as gradient . v + offset.
  [[nodiscard]] double offset() const { return value_at_ref - gradient.dot(reference_point); }
};

/// Slack variables of the two subproblems with their SCA reference copies.
struct SlackState {
  Eigen::VectorXd f;      // private SINR
  Eigen::VectorXd gamma;  // private interference plus noise
  Eigen::VectorXd eps;    // common-stream interference plus noise
  Eigen::VectorXd theta;  // common-stream SINR
  Eigen::VectorXd f_ref, gamma_ref, eps_ref, theta_ref;

  /// Copies the current values into the reference copies.
  void commit();
  [[nodiscard]] bool valid() const;
};

// --- location (z) surrogates ------------------------------------------------

/// g(z) = |h_k(z)^H x_j|^2 as a function of the UAV position only.
struct SignalPowerSurrogate {
  BoundDirection direction = BoundDirection::kLocal;
  AffineSurrogate tangent;         // first-order expansion at z^r (all variants)
  double gain = 0.0;               // C = M |alpha_k|^2 |a(theta_k)^H x_j|^2
  double height_sq = 0.0;          // H^2
  double exponent = 2.0;           // path-loss exponent
  Eigen::Vector2d user = Eigen::Vector2d::Zero();
  double u_ref = 0.0;              // ||z^r - z_k||^2

  /// Surrogate value; +inf when the upper variant's denominator is not positive.
  [[nodiscard]] double evaluate(const Eigen::Vector2d& z) const;
};

/// True value of |h_k(z)^H x_j|^2.
double signal_power_z(const SystemConfig& cfg, const UserTerminal& user,
                      const Eigen::VectorXcd& column, const Eigen::Vector2d& z);

/// kLocal: affine tangent in z (any exponent).
/// kLower: tangent in u = ||z - z_k||^2; concave in z and a global lower bound
///         (requires exponent 2).
/// kUpper: C / (1 + H^2 + u_lin(z)) with u_lin the tangent of u; convex in z and
///         a global upper bound (requires exponent 2).
SignalPowerSurrogate signal_power_surrogate_z(const SystemConfig& cfg, const UserTerminal& user,
                                              const Eigen::VectorXcd& column,
                                              const Eigen::Vector2d& z_ref,
                                              BoundDirection direction);

// --- bilinear and square-root bounds ----------------------------------------

/// weight * (u + v)^2 + a * u + b * v + c, a convex quadratic in (u, v).
struct BilinearBound {
  double weight = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  [[nodiscard]] double evaluate(double u, double v) const;
};

/// 1/2 (f+g)^2 - 1/2 (f_r^2 + g_r^2) - f_r (f - f_r) - g_r (g - g_r) >= f g.
BilinearBound bilinear_upper_bound(double f_ref, double g_ref);

/// 1/4 (t+e)^2 - 1/2 (t_r - e_r)(t - e) + 1/4 (t_r - e_r)^2 >= t e.
BilinearBound bilinear_upper_bound_quarter(double t_ref, double e_ref);

/// Tangent of sqrt(f g) at (f_r, g_r) over the variables (f, g). The tangent
/// of a concave function, so a global upper bound of sqrt(f g).
AffineSurrogate sqrt_bilinear_lower_bound(double f_ref, double g_ref);

// --- beamforming (x) surrogates ---------------------------------------------

/// Interleaved (re, im) column-major vectorization matching complex variable blocks.
Eigen::VectorXd vectorize(const Eigen::MatrixXcd& x);
Eigen::MatrixXcd devectorize(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols);

/// 2 Re(x_r^H h h^H x) - |h^H x_r|^2 over the vectorized column x; <= |h^H x|^2.
AffineSurrogate quadratic_signal_lower_bound_x(const Eigen::VectorXcd& h,
                                               const Eigen::VectorXcd& x_ref);

/// Tangent of the beampattern level sum_j w_j |a^H x_j|^2 over vectorized x;
/// a global lower bound since the level is convex in x.
AffineSurrogate beampattern_level_lower_bound_x(const Eigen::MatrixXcd& x_ref, double theta,
                                                double spacing_ratio,
                                                const Eigen::VectorXd& column_weights = {});

/// First-order expansion of the beampattern MSE in vectorized x. Local only.
AffineSurrogate beampattern_surrogate_x(const Eigen::MatrixXcd& x_ref,
                                        const std::vector<RadarTarget>& targets,
                                        double spacing_ratio,
                                        const Eigen::VectorXd& column_weights = {});

/// First-order expansion of the beampattern MSE in z. Target angles are fixed,
/// so the gradient vanishes.
AffineSurrogate beampattern_surrogate_z(const Eigen::MatrixXcd& x, const Eigen::Vector2d& z_ref,
                                        const std::vector<RadarTarget>& targets,
                                        double spacing_ratio,
                                        const Eigen::VectorXd& column_weights = {});

/// Rotates private column k (1-based, paired with channel column k-1) so that
/// h_k^H x_k is real and nonnegative. Zero inner products are left unchanged.
Eigen::MatrixXcd rotate_beamformer(const Eigen::MatrixXcd& x, const ChannelSet& channels);

}  // namespace uavrsma
