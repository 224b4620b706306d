#include "uavrsma/linearize.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace uavrsma {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd weights_or_ones(const Eigen::VectorXd& w, Eigen::Index cols) {
  if (w.size() == 0) return Eigen::VectorXd::Ones(cols);
  if (w.size() != cols) throw std::invalid_argument("column_weights size mismatch");
  return w;
}

// Gradient of sum_j w_j |a^H x_j|^2 over vectorized x.
Eigen::VectorXd level_gradient(const Eigen::MatrixXcd& x, const Eigen::VectorXcd& a,
                               const Eigen::VectorXd& w) {
  const Eigen::Index M = x.rows();
  Eigen::VectorXd g(2 * x.size());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Eigen::VectorXcd d = (2.0 * w(j)) * (a * (a.adjoint() * x.col(j))(0));
    for (Eigen::Index m = 0; m < M; ++m) {
      g(2 * (j * M + m)) = d(m).real();
      g(2 * (j * M + m) + 1) = d(m).imag();
    }
  }
  return g;
}

}  // namespace

const char* to_string(BoundDirection d) {
  switch (d) {
    case BoundDirection::kLower: return "lower";
    case BoundDirection::kUpper: return "upper";
    case BoundDirection::kLocal: return "local";
  }
  return "unknown";
}

double AffineSurrogate::evaluate(const Eigen::VectorXd& v) const {
  if (v.size() != reference_point.size())
    throw std::invalid_argument("AffineSurrogate: dimension mismatch");
  return value_at_ref + gradient.dot(v - reference_point);
}

void SlackState::commit() {
  f_ref = f;
  gamma_ref = gamma;
  eps_ref = eps;
  theta_ref = theta;
}

bool SlackState::valid() const {
  const auto nonneg = [](const Eigen::VectorXd& v) { return v.size() == 0 || v.minCoeff() >= 0.0; };
  const bool shapes = f.size() == f_ref.size() && gamma.size() == gamma_ref.size() &&
                      eps.size() == eps_ref.size() && theta.size() == theta_ref.size();
  return shapes && nonneg(f) && nonneg(gamma) && nonneg(eps) && nonneg(theta) && nonneg(f_ref) &&
         nonneg(gamma_ref) && nonneg(eps_ref) && nonneg(theta_ref);
}

// --- location surrogates ------------------------------------------------------

double signal_power_z(const SystemConfig& cfg, const UserTerminal& user,
                      const Eigen::VectorXcd& column, const Eigen::Vector2d& z) {
  const Eigen::VectorXcd h = channel_vector(cfg, z, user);
  return std::norm(h.dot(column));
}

double SignalPowerSurrogate::evaluate(const Eigen::Vector2d& z) const {
  const double u = (z - user).squaredNorm();
  switch (direction) {
    case BoundDirection::kLocal: return tangent.evaluate(z);
    case BoundDirection::kLower: {
      const double den = 1.0 + height_sq + u_ref;
      return gain / den - gain / (den * den) * (u - u_ref);
    }
    case BoundDirection::kUpper: {
      const Eigen::Vector2d zr = tangent.reference_point;
      const double u_lin = u_ref + 2.0 * (zr - user).dot(z - zr);
      const double den = 1.0 + height_sq + u_lin;
      return den > 0.0 ? gain / den : kInf;
    }
  }
  return kInf;
}

SignalPowerSurrogate signal_power_surrogate_z(const SystemConfig& cfg, const UserTerminal& user,
                                              const Eigen::VectorXcd& column,
                                              const Eigen::Vector2d& z_ref,
                                              BoundDirection direction) {
  if (direction != BoundDirection::kLocal && cfg.pathloss_exponent != 2.0)
    throw std::invalid_argument("signal_power_surrogate_z: global bounds need exponent 2");
  if (column.size() != cfg.num_antennas)
    throw std::invalid_argument("signal_power_surrogate_z: column size mismatch");
  SignalPowerSurrogate s;
  s.direction = direction;
  s.height_sq = cfg.uav_height * cfg.uav_height;
  s.exponent = cfg.pathloss_exponent;
  s.user = user.position;
  const Eigen::VectorXcd a = steering_vector(user.aod, cfg.num_antennas, cfg.spacing_ratio, true);
  s.gain = cfg.num_antennas * std::norm(user.fading) * std::norm(a.dot(column));
  s.u_ref = (z_ref - user.position).squaredNorm();

  // g(u) = C / (1 + (H^2 + u)^(gamma/2)), dg/du, chain rule du/dz = 2 (z - z_k).
  const double half = 0.5 * s.exponent;
  const double p = std::pow(s.height_sq + s.u_ref, half);
  const double g = s.gain / (1.0 + p);
  const double dgdu = -s.gain * half * std::pow(s.height_sq + s.u_ref, half - 1.0) /
                      ((1.0 + p) * (1.0 + p));
  s.tangent.reference_point = z_ref;
  s.tangent.value_at_ref = g;
  s.tangent.gradient = dgdu * 2.0 * (z_ref - user.position);
  s.tangent.direction = direction;
  return s;
}

// --- bilinear and square-root bounds ----------------------------------------

double BilinearBound::evaluate(double u, double v) const {
  return weight * (u + v) * (u + v) + a * u + b * v + c;
}

BilinearBound bilinear_upper_bound(double f_ref, double g_ref) {
  BilinearBound bb;
  bb.weight = 0.5;
  bb.a = -f_ref;
  bb.b = -g_ref;
  bb.c = 0.5 * (f_ref * f_ref + g_ref * g_ref);
  return bb;
}

BilinearBound bilinear_upper_bound_quarter(double t_ref, double e_ref) {
  const double d = t_ref - e_ref;
  BilinearBound bb;
  bb.weight = 0.25;
  bb.a = -0.5 * d;
  bb.b = 0.5 * d;
  bb.c = 0.25 * d * d;
  return bb;
}

AffineSurrogate sqrt_bilinear_lower_bound(double f_ref, double g_ref) {
  if (!(f_ref > 0.0) || !(g_ref > 0.0))
    throw std::invalid_argument("sqrt_bilinear_lower_bound: references must be positive");
  AffineSurrogate s;
  s.reference_point = Eigen::Vector2d(f_ref, g_ref);
  s.value_at_ref = std::sqrt(f_ref * g_ref);
  s.gradient = Eigen::Vector2d(0.5 * std::sqrt(g_ref / f_ref), 0.5 * std::sqrt(f_ref / g_ref));
  s.direction = BoundDirection::kUpper;
  return s;
}

// --- beamforming surrogates ---------------------------------------------------

Eigen::VectorXd vectorize(const Eigen::MatrixXcd& x) {
  Eigen::VectorXd v(2 * x.size());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index m = 0; m < x.rows(); ++m) {
      v(2 * (j * x.rows() + m)) = x(m, j).real();
      v(2 * (j * x.rows() + m) + 1) = x(m, j).imag();
    }
  return v;
}

Eigen::MatrixXcd devectorize(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != 2 * rows * cols) throw std::invalid_argument("devectorize: size mismatch");
  Eigen::MatrixXcd x(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index m = 0; m < rows; ++m)
      x(m, j) = cdouble(v(2 * (j * rows + m)), v(2 * (j * rows + m) + 1));
  return x;
}

AffineSurrogate quadratic_signal_lower_bound_x(const Eigen::VectorXcd& h,
                                               const Eigen::VectorXcd& x_ref) {
  if (h.size() != x_ref.size())
    throw std::invalid_argument("quadratic_signal_lower_bound_x: dimension mismatch");
  AffineSurrogate s;
  s.reference_point = vectorize(x_ref);
  s.value_at_ref = std::norm(h.dot(x_ref));
  s.gradient = level_gradient(x_ref, h, Eigen::VectorXd::Ones(1));
  s.direction = BoundDirection::kLower;
  return s;
}

AffineSurrogate beampattern_level_lower_bound_x(const Eigen::MatrixXcd& x_ref, double theta,
                                                double spacing_ratio,
                                                const Eigen::VectorXd& column_weights) {
  const Eigen::VectorXd w = weights_or_ones(column_weights, x_ref.cols());
  const Eigen::VectorXcd a =
      steering_vector(theta, static_cast<int>(x_ref.rows()), spacing_ratio, false);
  AffineSurrogate s;
  s.reference_point = vectorize(x_ref);
  s.value_at_ref = beampattern_level(x_ref, theta, spacing_ratio, false, w);
  s.gradient = level_gradient(x_ref, a, w);
  s.direction = BoundDirection::kLower;
  return s;
}

AffineSurrogate beampattern_surrogate_x(const Eigen::MatrixXcd& x_ref,
                                        const std::vector<RadarTarget>& targets,
                                        double spacing_ratio,
                                        const Eigen::VectorXd& column_weights) {
  const Eigen::VectorXd w = weights_or_ones(column_weights, x_ref.cols());
  AffineSurrogate s;
  s.reference_point = vectorize(x_ref);
  s.gradient = Eigen::VectorXd::Zero(s.reference_point.size());
  for (const auto& t : targets) {
    const Eigen::VectorXcd a =
        steering_vector(t.angle, static_cast<int>(x_ref.rows()), spacing_ratio, false);
    const double e = beampattern_level(x_ref, t.angle, spacing_ratio, false, w) - t.level;
    s.value_at_ref += e * e;
    s.gradient += 2.0 * e * level_gradient(x_ref, a, w);
  }
  s.direction = BoundDirection::kLocal;
  return s;
}

AffineSurrogate beampattern_surrogate_z(const Eigen::MatrixXcd& x, const Eigen::Vector2d& z_ref,
                                        const std::vector<RadarTarget>& targets,
                                        double spacing_ratio,
                                        const Eigen::VectorXd& column_weights) {
  AffineSurrogate s;
  s.reference_point = z_ref;
  s.gradient = Eigen::Vector2d::Zero();
  s.value_at_ref = beampattern_mse(x, targets, spacing_ratio, false, column_weights);
  s.direction = BoundDirection::kLocal;
  return s;
}

Eigen::MatrixXcd rotate_beamformer(const Eigen::MatrixXcd& x, const ChannelSet& channels) {
  if (x.cols() != channels.num_users() + 1 || x.rows() != channels.h.rows())
    throw std::invalid_argument("rotate_beamformer: shape mismatch");
  Eigen::MatrixXcd out = x;
  for (int k = 1; k < out.cols(); ++k) {
    const cdouble g = channels.h.col(k - 1).dot(out.col(k));
    if (std::abs(g) == 0.0) continue;
    out.col(k) *= std::conj(g) / std::abs(g);
  }
  return out;
}

}  // namespace uavrsma
