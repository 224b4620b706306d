#include "uavrsma/decoding_plan.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace uavrsma {

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::kRsma: return "RSMA";
    case Scheme::kNoma: return "NOMA";
    case Scheme::kOma: return "OMA";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "rsma") return Scheme::kRsma;
  if (n == "noma") return Scheme::kNoma;
  if (n == "oma") return Scheme::kOma;
  throw std::invalid_argument("unknown scheme: " + name);
}

DecodingPlan make_plan(Scheme scheme, const ChannelSet& channels) {
  const int K = channels.num_users();
  DecodingPlan plan;
  plan.scheme = scheme;
  plan.num_users = K;
  plan.rate_weight = Eigen::VectorXd::Ones(K);
  plan.column_weight = Eigen::VectorXd::Ones(K + 1);

  switch (scheme) {
    case Scheme::kRsma: {
      std::vector<int> all(K);
      std::iota(all.begin(), all.end(), 1);
      for (int k = 0; k < K; ++k) {
        DecodeLink c{k, 0, all, -1, false};
        plan.links.push_back(c);
      }
      for (int k = 0; k < K; ++k) {
        DecodeLink p{k, k + 1, {}, k, true};
        for (int j = 1; j <= K; ++j)
          if (j != k + 1) p.interferers.push_back(j);
        plan.links.push_back(p);
      }
      break;
    }
    case Scheme::kNoma: {
      plan.column_weight(0) = 0.0;
      plan.sic_order.resize(K);
      std::iota(plan.sic_order.begin(), plan.sic_order.end(), 0);
      std::stable_sort(plan.sic_order.begin(), plan.sic_order.end(), [&](int a, int b) {
        return channels.h.col(a).squaredNorm() > channels.h.col(b).squaredNorm();
      });
      // rank[k]: position of user k in the order, 0 = strongest.
      std::vector<int> rank(K);
      for (int i = 0; i < K; ++i) rank[plan.sic_order[i]] = i;
      for (int j = 0; j < K; ++j) {
        std::vector<int> stronger;
        for (int i = 0; i < rank[j]; ++i) stronger.push_back(plan.sic_order[i] + 1);
        plan.links.push_back({j, j + 1, stronger, j, true});
        // Every stronger user first decodes and cancels stream j.
        for (int i = 0; i < rank[j]; ++i) {
          const int k = plan.sic_order[i];
          plan.links.push_back({k, j + 1, stronger, j, false});
        }
      }
      break;
    }
    case Scheme::kOma: {
      plan.column_weight(0) = 0.0;
      plan.column_weight.tail(K).setConstant(1.0 / K);
      plan.rate_weight.setConstant(1.0 / K);
      plan.per_slot_power = true;
      for (int k = 0; k < K; ++k) plan.links.push_back({k, k + 1, {}, k, true});
      break;
    }
  }
  return plan;
}

PlanMetrics evaluate_plan(const SystemConfig& cfg, const ChannelSet& channels,
                          const DecodingPlan& plan, const OperatingPoint& point) {
  const int K = plan.num_users;
  const Eigen::MatrixXcd& x = point.beamformers;
  if (x.cols() != K + 1 || channels.num_users() != K)
    throw std::invalid_argument("evaluate_plan: shape mismatch");
  // g(k, j) = |h_k^H x_j|^2
  const Eigen::MatrixXd g = (channels.h.adjoint() * x).cwiseAbs2();

  PlanMetrics m;
  const int L = static_cast<int>(plan.links.size());
  m.link_sinr.resize(L);
  m.link_interference.resize(L);
  m.slot_rate = Eigen::VectorXd::Constant(K, std::numeric_limits<double>::infinity());
  double common = std::numeric_limits<double>::infinity();
  for (int l = 0; l < L; ++l) {
    const DecodeLink& link = plan.links[l];
    double interference = cfg.noise_power;
    for (int i : link.interferers) interference += g(link.receiver, i);
    m.link_interference(l) = interference;
    m.link_sinr(l) = g(link.receiver, link.stream) / interference;
    const double rate = std::log2(1.0 + m.link_sinr(l));
    if (link.slot < 0) {
      common = std::min(common, rate);
    } else {
      m.slot_rate(link.slot) = std::min(m.slot_rate(link.slot), plan.rate_weight(link.slot) * rate);
    }
  }
  m.common_rate = plan.has_common() ? common : 0.0;

  const Eigen::VectorXd col_power = x.colwise().squaredNorm().transpose();
  m.consumed_power = plan.column_weight.dot(col_power);
  m.beampattern_mse =
      beampattern_mse(x, cfg.radar_targets, cfg.spacing_ratio, false, plan.column_weight);

  Eigen::VectorXd beta = point.common_rates;
  if (beta.size() != K) beta = Eigen::VectorXd::Zero(K);
  m.rate_sum = beta.sum() + m.slot_rate.sum();
  m.energy_efficiency = m.rate_sum / (m.consumed_power + cfg.fixed_power());

  FeasibilityReport& f = m.feasibility;
  f.common_rate = beta.sum() - m.common_rate;
  f.nonnegativity = K > 0 ? (-beta).maxCoeff() : 0.0;
  if (!plan.has_common()) {
    // No common stream: beta must vanish and the column must stay unused.
    f.common_rate = std::max(beta.cwiseAbs().maxCoeff(), col_power(0));
  }
  f.power = (plan.per_slot_power ? col_power.tail(K).maxCoeff() : col_power.sum()) -
            cfg.power_budget;
  f.beampattern = m.beampattern_mse - cfg.beampattern_tolerance;
  f.qos.resize(K);
  for (int k = 0; k < K; ++k) f.qos(k) = cfg.qos_thresholds[k] - beta(k) - m.slot_rate(k);
  return m;
}

}  // namespace uavrsma
