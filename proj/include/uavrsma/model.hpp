#pragma once

// Physical model of a UAV that serves K single-antenna users with
// rate-splitting multiple access while steering a MIMO-radar beampattern.
// Every closed-form quantity used by the optimizers and oracles lives here.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace uavrsma {

using cdouble = std::complex<double>;

/// A radar target: look angle (radians, measured from array broadside) and
/// the desired beampattern level at that angle.
struct RadarTarget {
  double angle = 0.0;
  double level = 0.0;
};

/// Scenario constants, all in linear SI units. Decibel inputs are converted
/// once by the config loader.
struct SystemConfig {
  int num_antennas = 8;
  int num_users = 4;
  double spacing_ratio = 0.5;  // element spacing over wavelength
  double uav_height = 50.0;    // m
  double pathloss_exponent = 2.0;
  double noise_power = 1e-8;   // W
  double power_budget = 0.398107170553497;  // W
  double hover_power = 0.9;    // W
  double dynamic_power = 0.01; // W per RF chain
  double static_power = 0.02;  // W
  std::vector<double> qos_thresholds;  // bits/s/Hz, one per user
  std::vector<RadarTarget> radar_targets;
  double beampattern_tolerance = 0.01;
  double area_side = 50.0;  // m
  std::uint64_t rng_seed = 1;

  /// P_cir = M * P_dyn + P_sta.
  [[nodiscard]] double circuit_power() const {
    return num_antennas * dynamic_power + static_power;
  }
  /// P_hov + P_cir, the power drawn regardless of the beamformers.
  [[nodiscard]] double fixed_power() const { return hover_power + circuit_power(); }

  /// Throws std::invalid_argument naming the first broken invariant.
  void validate() const;
};

struct UserTerminal {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  cdouble fading{1.0, 0.0};
  double aod = 0.0;  // radians
};

/// A configuration together with one draw of user positions and fading.
struct Scenario {
  SystemConfig config;
  std::vector<UserTerminal> users;
};

/// Candidate solution. Column 0 of `beamformers` is the common precoder,
/// column k (1..K) the private precoder of user k.
struct OperatingPoint {
  Eigen::Vector2d uav = Eigen::Vector2d::Zero();
  Eigen::MatrixXcd beamformers;
  Eigen::VectorXd common_rates;
};

struct ChannelSet {
  Eigen::MatrixXcd h;         // M x K, column k is h_k
  Eigen::VectorXd distance;   // K

  [[nodiscard]] int num_users() const { return static_cast<int>(h.cols()); }
  [[nodiscard]] Eigen::VectorXcd user(int k) const { return h.col(k); }
};

struct Rates {
  Eigen::VectorXd common;   // R_k^c
  Eigen::VectorXd private_; // R_k
  double min_common = 0.0;  // R_c
  int bottleneck_user = 0;  // argmin_k R_k^c, lowest index on ties
};

struct Metrics {
  Eigen::VectorXd common_sinr;
  Eigen::VectorXd private_sinr;
  Rates rates;
  double beampattern_mse = 0.0;
  double transmit_power = 0.0;
  double energy_efficiency = 0.0;
};

/// Residuals of the master-problem constraints; each entry is <= 0 exactly
/// when the constraint holds.
struct FeasibilityReport {
  double common_rate = 0.0;       // sum(beta) - min_k R_k^c
  double nonnegativity = 0.0;     // max_k(-beta_k)
  double power = 0.0;             // tr(xx^H) - P_max
  double beampattern = 0.0;       // mse - delta
  Eigen::VectorXd qos;            // R_k^th - beta_k - R_k

  [[nodiscard]] double max_residual() const;
  [[nodiscard]] bool satisfied(double tol = 0.0) const { return max_residual() <= tol; }
};

// --- closed-form physics ---------------------------------------------------

/// ULA response. Entry m is c * exp(j 2 pi rho m sin(theta)), c = 1/sqrt(M)
/// when normalized, else 1.
Eigen::VectorXcd steering_vector(double theta, int num_antennas, double spacing_ratio,
                                 bool normalized = true);

/// PL(X) = 1 + X^gamma.
double path_loss(double distance, double exponent);

/// Horizontal-plus-height distance between the UAV at `uav` and a user.
double link_distance(const SystemConfig& cfg, const Eigen::Vector2d& uav,
                     const Eigen::Vector2d& user);

/// h_k = sqrt(M) alpha_k a(theta_k) / PL(d_k)^(1/2).
Eigen::VectorXcd channel_vector(const SystemConfig& cfg, const Eigen::Vector2d& uav,
                                const UserTerminal& user);

ChannelSet make_channels(const SystemConfig& cfg, const Eigen::Vector2d& uav,
                         const std::vector<UserTerminal>& users);

/// |h^H x_c|^2 / (sum_{j=1..K} |h^H x_j|^2 + noise).
double common_sinr(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& x, double noise);

/// |h^H x_k|^2 / (sum_{j!=k} |h^H x_j|^2 + noise); k indexes the private
/// column, 1 <= k <= K. Throws std::out_of_range otherwise.
double private_sinr(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& x, int k, double noise);

Rates achievable_rates(const ChannelSet& channels, const Eigen::MatrixXcd& x, double noise);

/// sum_l |a^H(theta_l) R a(theta_l) - zeta_l|^2 with R = sum_j w_j x_j x_j^H.
/// `column_weights` defaults to all ones; `normalized` selects the steering
/// convention (the radar constraint uses the unnormalized one).
double beampattern_mse(const Eigen::MatrixXcd& x, const std::vector<RadarTarget>& targets,
                       double spacing_ratio, bool normalized = false,
                       const Eigen::VectorXd& column_weights = Eigen::VectorXd());

/// Beampattern level a^H R a at one angle.
double beampattern_level(const Eigen::MatrixXcd& x, double theta, double spacing_ratio,
                         bool normalized = false,
                         const Eigen::VectorXd& column_weights = Eigen::VectorXd());

double transmit_power(const Eigen::MatrixXcd& x);

/// sum_k (beta_k + R_k) / (tr(xx^H) + fixed_power).
double energy_efficiency(const Eigen::VectorXd& common_rates, const Eigen::VectorXd& private_rates,
                         const Eigen::MatrixXcd& x, double fixed_power);

Metrics evaluate_metrics(const SystemConfig& cfg, const ChannelSet& channels,
                         const OperatingPoint& point);

FeasibilityReport check_feasibility(const SystemConfig& cfg, const ChannelSet& channels,
                                    const OperatingPoint& point);

// --- unit helpers -----------------------------------------------------------

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

/// Default scenario: M=8, K=4, rho=0.5, H=50 m, gamma=2, noise -50 dBm,
/// P_max 26 dBm, fixed power 30 dBm, delta -20 dB, 50 m square, one target.
SystemConfig default_config();

/// Desired level for a target: eta * M * P_ref.
double radar_level(int num_antennas, double level_ratio, double reference_power);

}  // namespace uavrsma
