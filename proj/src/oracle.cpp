#include "uavrsma/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <omp.h>

namespace uavrsma {

namespace {

using cd = std::complex<double>;

// --- physics from the definitions -------------------------------------------------

cd steering_entry(double theta, int m, double rho) {
  return std::polar(1.0, 2.0 * std::numbers::pi * rho * m * std::sin(theta));
}

// Channel matrix, column k for user k; note sqrt(M) * (1/sqrt(M)) = 1.
std::vector<std::vector<cd>> channels_at(const Scenario& sc, const Eigen::Vector2d& z) {
  const SystemConfig& cfg = sc.config;
  std::vector<std::vector<cd>> h(sc.users.size(), std::vector<cd>(cfg.num_antennas));
  for (size_t k = 0; k < sc.users.size(); ++k) {
    const UserTerminal& u = sc.users[k];
    const double dx = z.x() - u.position.x();
    const double dy = z.y() - u.position.y();
    const double dist = std::sqrt(dx * dx + dy * dy + cfg.uav_height * cfg.uav_height);
    const double pl = 1.0 + std::pow(dist, cfg.pathloss_exponent);
    for (int m = 0; m < cfg.num_antennas; ++m)
      h[k][m] = u.fading * steering_entry(u.aod, m, cfg.spacing_ratio) / std::sqrt(pl);
  }
  return h;
}

// |h^H x_j|^2
double gain(const std::vector<cd>& h, const Eigen::MatrixXcd& x, int j) {
  cd s = 0.0;
  for (size_t m = 0; m < h.size(); ++m) s += std::conj(h[m]) * x(static_cast<Eigen::Index>(m), j);
  return std::norm(s);
}

struct RatePair {
  std::vector<double> common, priv;
};

RatePair rates(const std::vector<std::vector<cd>>& h, const Eigen::MatrixXcd& x, double noise) {
  const int K = static_cast<int>(h.size());
  RatePair r;
  for (int k = 0; k < K; ++k) {
    std::vector<double> g(K + 1);
    double all_private = 0.0;
    for (int j = 0; j <= K; ++j) {
      g[j] = gain(h[k], x, j);
      if (j > 0) all_private += g[j];
    }
    r.common.push_back(std::log2(1.0 + g[0] / (all_private + noise)));
    r.priv.push_back(std::log2(1.0 + g[k + 1] / (all_private - g[k + 1] + noise)));
  }
  return r;
}

double mse(const Scenario& sc, const Eigen::MatrixXcd& x) {
  const SystemConfig& cfg = sc.config;
  double total = 0.0;
  for (const RadarTarget& t : cfg.radar_targets) {
    double level = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      cd s = 0.0;
      for (int m = 0; m < cfg.num_antennas; ++m)
        s += std::conj(steering_entry(t.angle, m, cfg.spacing_ratio)) * x(m, j);
      level += std::norm(s);
    }
    total += (level - t.level) * (level - t.level);
  }
  return total;
}

struct Evaluation {
  double ee = 0.0;
  double private_sum = 0.0;
  double min_common = 0.0;
  double residual = 0.0;
};

Evaluation evaluate(const Scenario& sc, const std::vector<std::vector<cd>>& h,
                    const Eigen::MatrixXcd& x, const Eigen::VectorXd& beta, bool radar_and_power) {
  const SystemConfig& cfg = sc.config;
  const RatePair r = rates(h, x, cfg.noise_power);
  Evaluation e;
  e.min_common = std::numeric_limits<double>::infinity();
  double beta_sum = 0.0;
  e.residual = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < h.size(); ++k) {
    e.min_common = std::min(e.min_common, r.common[k]);
    e.private_sum += r.priv[k];
    beta_sum += beta(static_cast<Eigen::Index>(k));
    e.residual = std::max(e.residual, -beta(static_cast<Eigen::Index>(k)));
    e.residual = std::max(e.residual, cfg.qos_thresholds[k] - beta(static_cast<Eigen::Index>(k)) -
                                          r.priv[k]);
  }
  e.residual = std::max(e.residual, beta_sum - e.min_common);
  const double power = x.squaredNorm();
  if (radar_and_power) {
    e.residual = std::max(e.residual, power - cfg.power_budget);
    e.residual = std::max(e.residual, mse(sc, x) - cfg.beampattern_tolerance);
  }
  e.ee = (beta_sum + e.private_sum) / (power + cfg.fixed_power());
  return e;
}

std::uint64_t splitmix64(std::uint64_t v) {
  v += 0x9e3779b97f4a7c15ULL;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
  return v ^ (v >> 31);
}

struct Candidate {
  double value = -std::numeric_limits<double>::infinity();
  long index = -1;
  long feasible = 0;

  void offer(double v, long i) {
    ++feasible;
    if (index < 0 || v > value || (v == value && i < index)) {
      value = v;
      index = i;
    }
  }
  void merge(const Candidate& o) {
    feasible += o.feasible;
    if (o.index >= 0 && (index < 0 || o.value > value || (o.value == value && o.index < index))) {
      value = o.value;
      index = o.index;
    }
  }
};

// Sample i of the random sampler. Returns false when it is infeasible.
bool draw_sample(const Scenario& sc, const std::vector<std::vector<cd>>& h, std::uint64_t seed,
                 long i, Eigen::MatrixXcd& x, Eigen::VectorXd& beta, double& ee) {
  const SystemConfig& cfg = sc.config;
  const int K = static_cast<int>(sc.users.size());
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i))));
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  x.resize(cfg.num_antennas, K + 1);
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index m = 0; m < x.rows(); ++m) x(m, c) = cd(normal(rng), normal(rng));
  const double norm2 = x.squaredNorm();
  if (norm2 > 0.0) x *= std::sqrt(unit(rng) * cfg.power_budget / norm2);
  const RatePair r = rates(h, x, cfg.noise_power);
  double rc = std::numeric_limits<double>::infinity();
  for (double v : r.common) rc = std::min(rc, v);
  std::vector<double> w(K + 1);
  double wsum = 0.0;
  for (double& v : w) wsum += (v = expo(rng));
  beta.resize(K);
  for (int k = 0; k < K; ++k) beta(k) = rc * w[k] / wsum;
  const Evaluation e = evaluate(sc, h, x, beta, true);
  ee = e.ee;
  return e.residual <= 0.0;
}

}  // namespace

OracleEvaluation oracle_evaluate(const Scenario& scenario, const Eigen::Vector2d& z,
                                 const Eigen::MatrixXcd& x, const Eigen::VectorXd& beta) {
  const Evaluation e = evaluate(scenario, channels_at(scenario, z), x, beta, true);
  return {e.ee, e.private_sum, e.min_common, e.residual};
}

std::optional<GridSearchResult> grid_search_location(const Scenario& scenario,
                                                     const Eigen::MatrixXcd& x,
                                                     const Eigen::VectorXd& beta, double step,
                                                     Execution exec) {
  if (!(step > 0.0)) throw std::invalid_argument("grid_search_location: step must be > 0");
  const double side = scenario.config.area_side;
  const long n = static_cast<long>(std::floor(side / step + 1e-9)) + 1;
  const long total = n * n;
  auto point = [&](long i) { return Eigen::Vector2d((i / n) * step, (i % n) * step); };
  auto objective = [&](long i, double& value) {
    const Evaluation e = evaluate(scenario, channels_at(scenario, point(i)), x, beta, false);
    value = e.private_sum;
    return e.residual <= 0.0;
  };

  Candidate best;
  if (exec == Execution::kSerial) {
    for (long i = 0; i < total; ++i) {
      double v;
      if (objective(i, v)) best.offer(v, i);
    }
  } else {
#pragma omp parallel
    {
      Candidate local;
#pragma omp for schedule(static)
      for (long i = 0; i < total; ++i) {
        double v;
        if (objective(i, v)) local.offer(v, i);
      }
#pragma omp critical(uavrsma_grid_reduce)
      best.merge(local);
    }
  }
  if (best.index < 0) return std::nullopt;
  GridSearchResult out;
  out.z = point(best.index);
  out.objective = best.value;
  out.evaluated = total;
  out.feasible = best.feasible;
  return out;
}

std::optional<SamplerResult> random_feasible_sampler(const Scenario& scenario,
                                                     const Eigen::Vector2d& z, long n,
                                                     std::uint64_t seed, Execution exec) {
  if (n < 1) throw std::invalid_argument("random_feasible_sampler: n must be >= 1");
  const auto h = channels_at(scenario, z);
  Candidate best;
  if (exec == Execution::kSerial) {
    Eigen::MatrixXcd x;
    Eigen::VectorXd beta;
    for (long i = 0; i < n; ++i) {
      double ee;
      if (draw_sample(scenario, h, seed, i, x, beta, ee)) best.offer(ee, i);
    }
  } else {
#pragma omp parallel
    {
      Candidate local;
      Eigen::MatrixXcd x;
      Eigen::VectorXd beta;
#pragma omp for schedule(static)
      for (long i = 0; i < n; ++i) {
        double ee;
        if (draw_sample(scenario, h, seed, i, x, beta, ee)) local.offer(ee, i);
      }
#pragma omp critical(uavrsma_sampler_reduce)
      best.merge(local);
    }
  }
  if (best.index < 0) return std::nullopt;
  SamplerResult out;
  double ee;
  draw_sample(scenario, h, seed, best.index, out.x, out.beta, ee);
  out.energy_efficiency = best.value;
  out.feasible = best.feasible;
  out.sample_index = best.index;
  return out;
}

FiniteDifferenceReport finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& f, const AffineSurrogate& surrogate,
    double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be > 0");
  const Eigen::VectorXd& v = surrogate.reference_point;
  FiniteDifferenceReport r;
  r.value_gap = std::abs(f(v) - surrogate.value_at_ref);
  Eigen::VectorXd fd(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    Eigen::VectorXd a = v, b = v;
    a(i) += step;
    b(i) -= step;
    fd(i) = (f(a) - f(b)) / (2.0 * step);
  }
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
  r.max_grad_relerr = v.size() ? (fd - surrogate.gradient).cwiseAbs().maxCoeff() / scale : 0.0;
  return r;
}

}  // namespace uavrsma
