#include "uavrsma/model.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uavrsma {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("SystemConfig: " + what);
}

Eigen::VectorXd weights_or_ones(const Eigen::VectorXd& w, Eigen::Index cols) {
  if (w.size() == 0) return Eigen::VectorXd::Ones(cols);
  if (w.size() != cols) throw std::invalid_argument("column_weights size mismatch");
  return w;
}

}  // namespace

void SystemConfig::validate() const {
  require(num_antennas >= 1, "num_antennas must be >= 1");
  require(num_users >= 1, "num_users must be >= 1");
  require(spacing_ratio > 0.0, "spacing_ratio must be > 0");
  require(uav_height > 0.0, "uav_height must be > 0");
  require(pathloss_exponent > 0.0, "pathloss_exponent must be > 0");
  require(noise_power > 0.0, "noise_power must be > 0");
  require(power_budget > 0.0, "power_budget must be > 0");
  require(hover_power > 0.0, "hover_power must be > 0");
  require(dynamic_power >= 0.0 && static_power >= 0.0, "circuit powers must be >= 0");
  require(beampattern_tolerance > 0.0, "beampattern_tolerance must be > 0");
  require(area_side > 0.0, "area_side must be > 0");
  require(static_cast<int>(qos_thresholds.size()) == num_users,
          "qos_thresholds needs one entry per user");
  for (double r : qos_thresholds) require(r >= 0.0, "qos thresholds must be >= 0");
  require(!radar_targets.empty(), "at least one radar target is required");
  for (const auto& t : radar_targets) require(t.level >= 0.0, "radar levels must be >= 0");
}

double FeasibilityReport::max_residual() const {
  double worst = std::max({common_rate, nonnegativity, power, beampattern});
  if (qos.size() > 0) worst = std::max(worst, qos.maxCoeff());
  return worst;
}

Eigen::VectorXcd steering_vector(double theta, int num_antennas, double spacing_ratio,
                                 bool normalized) {
  if (num_antennas < 1) throw std::invalid_argument("steering_vector: num_antennas must be >= 1");
  const double c = normalized ? 1.0 / std::sqrt(static_cast<double>(num_antennas)) : 1.0;
  const double phase = 2.0 * std::numbers::pi * spacing_ratio * std::sin(theta);
  Eigen::VectorXcd a(num_antennas);
  for (int m = 0; m < num_antennas; ++m) a(m) = c * std::polar(1.0, phase * m);
  return a;
}

double path_loss(double distance, double exponent) {
  if (distance < 0.0) throw std::invalid_argument("path_loss: negative distance");
  return 1.0 + std::pow(distance, exponent);
}

double link_distance(const SystemConfig& cfg, const Eigen::Vector2d& uav,
                     const Eigen::Vector2d& user) {
  return std::sqrt(cfg.uav_height * cfg.uav_height + (uav - user).squaredNorm());
}

Eigen::VectorXcd channel_vector(const SystemConfig& cfg, const Eigen::Vector2d& uav,
                                const UserTerminal& user) {
  const double d = link_distance(cfg, uav, user.position);
  const double scale = std::sqrt(static_cast<double>(cfg.num_antennas) /
                                 path_loss(d, cfg.pathloss_exponent));
  return (scale * user.fading) *
         steering_vector(user.aod, cfg.num_antennas, cfg.spacing_ratio, true);
}

ChannelSet make_channels(const SystemConfig& cfg, const Eigen::Vector2d& uav,
                         const std::vector<UserTerminal>& users) {
  ChannelSet out;
  const auto K = static_cast<Eigen::Index>(users.size());
  out.h.resize(cfg.num_antennas, K);
  out.distance.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    out.h.col(k) = channel_vector(cfg, uav, users[k]);
    out.distance(k) = link_distance(cfg, uav, users[k].position);
  }
  return out;
}

double common_sinr(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& x, double noise) {
  if (h.size() != x.rows()) throw std::invalid_argument("common_sinr: dimension mismatch");
  const Eigen::RowVectorXcd g = h.adjoint() * x;
  const double interference = g.tail(g.size() - 1).squaredNorm();
  return std::norm(g(0)) / (interference + noise);
}

double private_sinr(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& x, int k, double noise) {
  if (k < 1 || k >= x.cols()) throw std::out_of_range("private_sinr: user index out of range");
  if (h.size() != x.rows()) throw std::invalid_argument("private_sinr: dimension mismatch");
  const Eigen::RowVectorXcd g = h.adjoint() * x;
  double interference = 0.0;
  for (Eigen::Index j = 1; j < g.size(); ++j)
    if (j != k) interference += std::norm(g(j));
  return std::norm(g(k)) / (interference + noise);
}

Rates achievable_rates(const ChannelSet& channels, const Eigen::MatrixXcd& x, double noise) {
  const int K = channels.num_users();
  Rates r;
  r.common.resize(K);
  r.private_.resize(K);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXcd h = channels.h.col(k);
    r.common(k) = std::log2(1.0 + common_sinr(h, x, noise));
    r.private_(k) = std::log2(1.0 + private_sinr(h, x, k + 1, noise));
  }
  r.bottleneck_user = 0;
  for (int k = 1; k < K; ++k)
    if (r.common(k) < r.common(r.bottleneck_user)) r.bottleneck_user = k;
  r.min_common = K > 0 ? r.common(r.bottleneck_user) : 0.0;
  return r;
}

double beampattern_level(const Eigen::MatrixXcd& x, double theta, double spacing_ratio,
                         bool normalized, const Eigen::VectorXd& column_weights) {
  const Eigen::VectorXd w = weights_or_ones(column_weights, x.cols());
  const Eigen::VectorXcd a =
      steering_vector(theta, static_cast<int>(x.rows()), spacing_ratio, normalized);
  const Eigen::RowVectorXcd proj = a.adjoint() * x;
  double level = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) level += w(j) * std::norm(proj(j));
  return level;
}

double beampattern_mse(const Eigen::MatrixXcd& x, const std::vector<RadarTarget>& targets,
                       double spacing_ratio, bool normalized,
                       const Eigen::VectorXd& column_weights) {
  if (targets.empty()) throw std::invalid_argument("beampattern_mse: empty target list");
  double mse = 0.0;
  for (const auto& t : targets) {
    const double e =
        beampattern_level(x, t.angle, spacing_ratio, normalized, column_weights) - t.level;
    mse += e * e;
  }
  return mse;
}

double transmit_power(const Eigen::MatrixXcd& x) { return x.squaredNorm(); }

double energy_efficiency(const Eigen::VectorXd& common_rates, const Eigen::VectorXd& private_rates,
                         const Eigen::MatrixXcd& x, double fixed_power) {
  const double numerator = common_rates.sum() + private_rates.sum();
  return numerator / (transmit_power(x) + fixed_power);
}

Metrics evaluate_metrics(const SystemConfig& cfg, const ChannelSet& channels,
                         const OperatingPoint& point) {
  Metrics m;
  const int K = channels.num_users();
  m.common_sinr.resize(K);
  m.private_sinr.resize(K);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXcd h = channels.h.col(k);
    m.common_sinr(k) = common_sinr(h, point.beamformers, cfg.noise_power);
    m.private_sinr(k) = private_sinr(h, point.beamformers, k + 1, cfg.noise_power);
  }
  m.rates = achievable_rates(channels, point.beamformers, cfg.noise_power);
  m.beampattern_mse = beampattern_mse(point.beamformers, cfg.radar_targets, cfg.spacing_ratio);
  m.transmit_power = transmit_power(point.beamformers);
  m.energy_efficiency = energy_efficiency(point.common_rates, m.rates.private_,
                                          point.beamformers, cfg.fixed_power());
  return m;
}

FeasibilityReport check_feasibility(const SystemConfig& cfg, const ChannelSet& channels,
                                    const OperatingPoint& point) {
  const Rates r = achievable_rates(channels, point.beamformers, cfg.noise_power);
  FeasibilityReport rep;
  const Eigen::VectorXd& beta = point.common_rates;
  rep.common_rate = beta.sum() - r.min_common;
  rep.nonnegativity = beta.size() > 0 ? (-beta).maxCoeff() : 0.0;
  rep.power = transmit_power(point.beamformers) - cfg.power_budget;
  rep.beampattern =
      beampattern_mse(point.beamformers, cfg.radar_targets, cfg.spacing_ratio) -
      cfg.beampattern_tolerance;
  const int K = channels.num_users();
  rep.qos.resize(K);
  for (int k = 0; k < K; ++k)
    rep.qos(k) = cfg.qos_thresholds[k] - beta(k) - r.private_(k);
  return rep;
}

double radar_level(int num_antennas, double level_ratio, double reference_power) {
  return level_ratio * num_antennas * reference_power;
}

SystemConfig default_config() {
  SystemConfig cfg;
  cfg.num_antennas = 8;
  cfg.num_users = 4;
  cfg.spacing_ratio = 0.5;
  cfg.uav_height = 50.0;
  cfg.pathloss_exponent = 2.0;
  cfg.noise_power = dbm_to_watts(-50.0);
  cfg.power_budget = dbm_to_watts(26.0);
  cfg.dynamic_power = 0.01;
  cfg.static_power = 0.02;
  cfg.hover_power = dbm_to_watts(30.0) - cfg.circuit_power();
  cfg.beampattern_tolerance = db_to_linear(-20.0);
  cfg.area_side = 50.0;
  cfg.qos_thresholds.assign(cfg.num_users, 1.0);
  const double angle = 40.0 * std::numbers::pi / 180.0;
  cfg.radar_targets = {{angle, radar_level(cfg.num_antennas, 0.5, dbm_to_watts(20.0))}};
  cfg.rng_seed = 1;
  return cfg;
}

}  // namespace uavrsma
