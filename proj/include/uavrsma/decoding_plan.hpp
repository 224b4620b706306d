#pragma once

// Which stream each receiver decodes, against which interference, and how the
// resulting SINRs turn into rates. RSMA, gain-ordered SIC NOMA and equal-slot
// OMA are all expressed as plans so the optimizers stay scheme-agnostic.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavrsma/model.hpp"

namespace uavrsma {

enum class Scheme { kRsma, kNoma, kOma };

const char* to_string(Scheme s);
/// Parses "rsma", "noma", "oma" (any case). Throws std::invalid_argument.
Scheme parse_scheme(const std::string& name);

struct DecodeLink {
  int receiver = 0;              // user index, 0-based
  int stream = 0;                // beamformer column decoded
  std::vector<int> interferers;  // beamformer columns treated as noise
  int slot = -1;                 // private-rate slot (user index) or -1 for the common stream
  bool own = false;              // stream is the receiver's own private stream
};

struct DecodingPlan {
  Scheme scheme = Scheme::kRsma;
  int num_users = 0;
  std::vector<DecodeLink> links;
  std::vector<int> sic_order;     // NOMA: users by descending channel gain
  Eigen::VectorXd rate_weight;    // per slot (1, or 1/K for OMA)
  Eigen::VectorXd column_weight;  // per column, for consumed power and beampattern
  bool per_slot_power = false;    // OMA: each slot obeys the budget on its own

  [[nodiscard]] bool has_common() const { return scheme == Scheme::kRsma; }
  [[nodiscard]] bool column_active(int j) const { return j > 0 || has_common(); }
};

/// Builds the plan. The NOMA decoding order uses ||h_k|| from `channels`,
/// ties broken by the lower index first.
DecodingPlan make_plan(Scheme scheme, const ChannelSet& channels);

struct PlanMetrics {
  Eigen::VectorXd link_sinr;
  Eigen::VectorXd link_interference;  // sum over interferers of |h^H x_i|^2 + noise
  Eigen::VectorXd slot_rate;          // weighted private rate per user
  double common_rate = 0.0;           // min over common links; 0 without a common stream
  double consumed_power = 0.0;
  double beampattern_mse = 0.0;
  double rate_sum = 0.0;              // sum(beta) + sum(slot_rate)
  double energy_efficiency = 0.0;
  FeasibilityReport feasibility;
};

PlanMetrics evaluate_plan(const SystemConfig& cfg, const ChannelSet& channels,
                          const DecodingPlan& plan, const OperatingPoint& point);

}  // namespace uavrsma
