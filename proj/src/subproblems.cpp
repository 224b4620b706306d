#include "uavrsma/subproblems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace uavrsma {

namespace {

constexpr double kFloor = 1e-12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Re(h^H x) and Im(h^H x) for a complex column stored at `off`.
LinearExpr inner_re(const Eigen::VectorXcd& h, int off) {
  LinearExpr e;
  for (Eigen::Index m = 0; m < h.size(); ++m) {
    e.add(off + 2 * static_cast<int>(m), h(m).real());
    e.add(off + 2 * static_cast<int>(m) + 1, h(m).imag());
  }
  return e;
}

LinearExpr inner_im(const Eigen::VectorXcd& h, int off) {
  LinearExpr e;
  for (Eigen::Index m = 0; m < h.size(); ++m) {
    e.add(off + 2 * static_cast<int>(m), -h(m).imag());
    e.add(off + 2 * static_cast<int>(m) + 1, h(m).real());
  }
  return e;
}

void add_abs2(ConvexFunction& fn, const Eigen::VectorXcd& h, int off, double weight) {
  fn.add_square(inner_re(h, off), weight);
  fn.add_square(inner_im(h, off), weight);
}

void add_column_power(ConvexFunction& fn, int off, int rows, double weight) {
  for (int i = 0; i < 2 * rows; ++i) fn.add_square(LinearExpr().add(off + i, 1.0), weight);
}

// Adds scale * grad . vec(x) where grad is over the full vectorized matrix.
void add_full_gradient(LinearExpr& e, const Eigen::VectorXd& grad,
                       const std::vector<int>& column_offset, int rows, double scale) {
  for (size_t j = 0; j < column_offset.size(); ++j) {
    if (column_offset[j] < 0) continue;
    for (int i = 0; i < 2 * rows; ++i)
      e.add(column_offset[j] + i, scale * grad(2 * rows * static_cast<int>(j) + i));
  }
}

bool accept_feasible(const PlanMetrics& m, const SolverSettings& s) {
  return m.feasibility.max_residual() <= s.feasibility_tol;
}

double relative_gain(double now, double before) {
  return (now - before) / std::max(std::abs(before), 1e-12);
}

// Smallest SINR among the links that bound slot j's rate.
Eigen::VectorXd slot_sinr(const DecodingPlan& plan, const PlanMetrics& m) {
  Eigen::VectorXd s = Eigen::VectorXd::Constant(plan.num_users, std::numeric_limits<double>::infinity());
  for (size_t l = 0; l < plan.links.size(); ++l) {
    const int j = plan.links[l].slot;
    if (j >= 0) s(j) = std::min(s(j), m.link_sinr(static_cast<Eigen::Index>(l)));
  }
  return s;
}

// Largest constraint value of `p` at `v`; equalities count by magnitude.
double program_violation(const ConvexProgram& p, const Eigen::VectorXd& v) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& f : p.inequalities) worst = std::max(worst, f.evaluate(v));
  for (const auto& e : p.equalities) worst = std::max(worst, std::abs(e.evaluate(v)));
  return worst;
}

OperatingPoint blend(const OperatingPoint& ref, const OperatingPoint& cand, double t) {
  OperatingPoint p = ref;
  p.uav = ref.uav + t * (cand.uav - ref.uav);
  p.beamformers = ref.beamformers + t * (cand.beamformers - ref.beamformers);
  p.common_rates = ref.common_rates + t * (cand.common_rates - ref.common_rates);
  return p;
}

}  // namespace

// --- settings and trace ---------------------------------------------------------

void SolverSettings::validate() const {
  if (!(sca_tolerance > 0.0) || !(dinkelbach_tolerance > 0.0) || !(outer_tolerance > 0.0))
    throw std::invalid_argument("SolverSettings: tolerances must be > 0");
  if (max_sca_iterations < 1 || max_dinkelbach_iterations < 1 || max_outer_iterations < 1)
    throw std::invalid_argument("SolverSettings: iteration caps must be >= 1");
  if (damping_limit < 0) throw std::invalid_argument("SolverSettings: damping_limit must be >= 0");
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kInit: return "init";
    case Stage::kRestore: return "restore";
    case Stage::kLocation: return "location";
    case Stage::kBeamforming: return "beamforming";
    case Stage::kDinkelbach: return "dinkelbach";
    case Stage::kOuter: return "outer";
  }
  return "unknown";
}

void SolveTrace::add(TraceEntry e) {
  e.index = entries.empty() ? 0 : entries.back().index + 1;
  entries.push_back(e);
}

void SolveTrace::merge(const SolveTrace& other) {
  for (const auto& e : other.entries) add(e);
  convex_solves += other.convex_solves;
  location_solves += other.location_solves;
  beamforming_solves += other.beamforming_solves;
  restoration_failed = restoration_failed || other.restoration_failed;
  diagnostics.insert(diagnostics.end(), other.diagnostics.begin(), other.diagnostics.end());
}

std::vector<TraceEntry> SolveTrace::stage(Stage s) const {
  std::vector<TraceEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [s](const TraceEntry& e) { return e.stage == s; });
  return out;
}

// --- location subproblem --------------------------------------------------------

double location_objective(const PlanMetrics& m) { return m.slot_rate.sum(); }

LocationProgram build_location_program(const Scenario& scenario, const DecodingPlan& plan,
                                       const OperatingPoint& point) {
  const SystemConfig& cfg = scenario.config;
  if (cfg.pathloss_exponent != 2.0)
    throw std::invalid_argument("build_location_program: path-loss exponent must be 2");
  const int K = plan.num_users;
  const int L = static_cast<int>(plan.links.size());
  const double noise = cfg.noise_power;
  const Eigen::Vector2d zr = point.uav;
  const ChannelSet channels = make_channels(cfg, zr, scenario.users);
  const PlanMetrics m = evaluate_plan(cfg, channels, plan, point);
  const Eigen::MatrixXcd& x = point.beamformers;
  const double wc = point.common_rates.size() == K ? point.common_rates.sum() : 0.0;

  LocationProgram lp;
  ConvexProgram& p = lp.program;
  lp.z = p.add_block("z", 2);
  const int f0 = p.add_block("f", K);
  const int s0 = p.add_block("slack", L);
  lp.f_scale = slot_sinr(plan, m).cwiseMax(kFloor);
  lp.link_scale = (m.link_interference / noise).cwiseMax(1.0);
  for (int j = 0; j < K; ++j) lp.f.push_back(f0 + j);
  for (int l = 0; l < L; ++l) lp.link_slack.push_back(s0 + l);
  lp.reference_objective = location_objective(m);

  const BilinearBound half = bilinear_upper_bound(1.0, 1.0);
  for (int l = 0; l < L; ++l) {
    const DecodeLink& link = plan.links[l];
    const UserTerminal& user = scenario.users[link.receiver];
    const double G = lp.link_scale(l);
    const int g = lp.link_slack[l];

    // Concave lower bound of the desired signal power.
    const SignalPowerSurrogate sig =
        signal_power_surrogate_z(cfg, user, x.col(link.stream), zr, BoundDirection::kLower);
    const double C = sig.gain / noise;
    const double den = 1.0 + sig.height_sq + sig.u_ref;
    const double curv = C / (den * den);
    ConvexFunction signal;
    signal.linear.constant = -(C / den + curv * sig.u_ref);
    signal.add_square(LinearExpr(-user.position.x()).add(lp.z, 1.0), curv);
    signal.add_square(LinearExpr(-user.position.y()).add(lp.z + 1, 1.0), curv);
    if (link.slot >= 0) {
      const double FG = lp.f_scale(link.slot) * G;
      const int f = lp.f[link.slot];
      signal.add_square(LinearExpr().add(f, 1.0).add(g, 1.0), FG * half.weight);
      signal.linear.add(f, FG * half.a).add(g, FG * half.b);
      signal.linear.constant += FG * half.c;
      signal.label = "private_signal";
      p.inequalities.push_back(signal);
    } else if (wc > 0.0) {
      signal.linear.add(g, (std::exp2(wc) - 1.0) * G);
      signal.label = "common_signal";
      p.inequalities.push_back(signal);
    }

    // Convex upper bound of the interference plus noise.
    ConvexFunction interference;
    interference.label = link.slot >= 0 ? "private_interference" : "common_interference";
    interference.linear.add(g, -G);
    interference.linear.constant = 1.0;
    double gain_sum = 0.0;
    for (int i : link.interferers) {
      const Eigen::VectorXcd a =
          steering_vector(user.aod, cfg.num_antennas, cfg.spacing_ratio, true);
      gain_sum += cfg.num_antennas * std::norm(user.fading) * std::norm(a.dot(x.col(i))) / noise;
    }
    if (gain_sum > 0.0) {
      const Eigen::Vector2d d = zr - user.position;
      LinearExpr u_lin(1.0 + sig.height_sq + sig.u_ref - 2.0 * d.dot(zr));
      u_lin.add(lp.z, 2.0 * d.x()).add(lp.z + 1, 2.0 * d.y());
      interference.add_reciprocal(u_lin, gain_sum);
    }
    p.inequalities.push_back(interference);
  }

  for (int j = 0; j < K; ++j) {
    const double beta_j = point.common_rates.size() == K ? point.common_rates(j) : 0.0;
    ConvexFunction qos;
    qos.label = "qos";
    qos.linear.add(lp.f[j], -lp.f_scale(j));
    qos.linear.constant =
        std::exp2((cfg.qos_thresholds[j] - beta_j) / plan.rate_weight(j)) - 1.0;
    p.inequalities.push_back(qos);
    ConvexFunction nonneg;
    nonneg.label = "nonneg";
    nonneg.linear.add(lp.f[j], -1.0);
    p.inequalities.push_back(nonneg);
  }
  for (int c = 0; c < 2; ++c) {
    ConvexFunction lo, hi;
    lo.label = hi.label = "area";
    lo.linear.add(lp.z + c, -1.0);
    hi.linear.add(lp.z + c, 1.0);
    hi.linear.constant = -cfg.area_side;
    p.inequalities.push_back(lo);
    p.inequalities.push_back(hi);
  }
  // Beamformer-only constraints are constant here; the solver checks them.
  ConvexFunction radar;
  radar.label = "beampattern";
  radar.linear.constant =
      beampattern_surrogate_z(x, zr, cfg.radar_targets, cfg.spacing_ratio, plan.column_weight)
          .value_at_ref -
      cfg.beampattern_tolerance;
  p.inequalities.push_back(radar);
  ConvexFunction power;
  power.label = "power";
  power.linear.constant = m.feasibility.power;
  p.inequalities.push_back(power);

  for (int j = 0; j < K; ++j)
    p.objective.add_neglog2(LinearExpr(1.0).add(lp.f[j], lp.f_scale(j)), plan.rate_weight(j));
  p.objective_model = "sum_j w_j * -log2(1 + F_j u_j) as logarithmic atoms";

  p.start = Eigen::VectorXd::Ones(p.num_variables());
  p.start.segment(lp.z, 2) = zr;
  return lp;
}

LocationResult sca_location(const Scenario& scenario, const DecodingPlan& plan,
                            const OperatingPoint& start, const SolverSettings& settings) {
  const auto t0 = Clock::now();
  const SystemConfig& cfg = scenario.config;
  LocationResult out;
  OperatingPoint cur = start;
  PlanMetrics m = evaluate_plan(cfg, make_channels(cfg, cur.uav, scenario.users), plan, cur);
  double obj = location_objective(m);
  out.trace.converged = false;

  for (int it = 1; it <= settings.max_sca_iterations; ++it) {
    const LocationProgram lp = build_location_program(scenario, plan, cur);
    const SolveResult res = solve_convex(lp.program, settings.interior_point);
    ++out.trace.convex_solves;
    ++out.trace.location_solves;
    if (!res.usable()) {
      out.trace.diagnostics.push_back(std::string("location program ") + to_string(res.status));
      break;
    }
    OperatingPoint cand = cur;
    cand.uav = res.x.segment(lp.z, 2);
    bool accepted = false;
    int damping = 0;
    PlanMetrics mc;
    for (; damping <= settings.damping_limit; ++damping) {
      const OperatingPoint trial = blend(cur, cand, std::ldexp(1.0, -damping));
      mc = evaluate_plan(cfg, make_channels(cfg, trial.uav, scenario.users), plan, trial);
      if (accept_feasible(mc, settings) && location_objective(mc) > obj) {
        cand = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.trace.converged = true;  // no ascent left at the reference
      break;
    }
    const double gain = relative_gain(location_objective(mc), obj);
    cur = cand;
    m = mc;
    obj = location_objective(mc);
    TraceEntry e;
    e.stage = Stage::kLocation;
    e.iteration = it;
    e.objective = obj;
    e.residual = m.feasibility.max_residual();
    e.damping = damping;
    e.wall_time = seconds_since(t0);
    e.ee = m.energy_efficiency;
    e.power = m.consumed_power;
    out.trace.add(e);
    if (gain < settings.sca_tolerance) {
      out.trace.converged = true;
      break;
    }
  }
  out.z = cur.uav;
  out.objective = obj;
  out.feasible = accept_feasible(m, settings);
  return out;
}

// --- beamforming subproblem ----------------------------------------------------

Eigen::MatrixXcd BeamformingProgram::beamformers(const Eigen::VectorXd& v) const {
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(num_antennas, num_users + 1);
  for (int j = 0; j <= num_users; ++j) {
    if (column_offset[j] < 0) continue;
    for (int m = 0; m < num_antennas; ++m)
      x(m, j) = cdouble(v(column_offset[j] + 2 * m), v(column_offset[j] + 2 * m + 1));
  }
  return x;
}

Eigen::VectorXd BeamformingProgram::common_rates(const Eigen::VectorXd& v) const {
  if (beta < 0) return Eigen::VectorXd::Zero(num_users);
  return v.segment(beta, num_users);
}

double BeamformingProgram::numerator(const Eigen::VectorXd& v, const DecodingPlan& plan) const {
  double n = common_rates(v).sum();
  for (int j = 0; j < num_users; ++j)
    n += plan.rate_weight(j) * std::log2(1.0 + f_scale(j) * v(f[j]));
  return n;
}

BeamformingProgram build_beamforming_program(const Scenario& scenario, const ChannelSet& channels,
                                             const DecodingPlan& plan,
                                             const OperatingPoint& point,
                                             const BeamformingOptions& options) {
  const SystemConfig& cfg = scenario.config;
  const int K = plan.num_users;
  const int M = cfg.num_antennas;
  const int L = static_cast<int>(plan.links.size());
  const int T = static_cast<int>(cfg.radar_targets.size());
  const double sigma = std::sqrt(cfg.noise_power);
  const Eigen::MatrixXcd hn = channels.h / sigma;  // noise-normalized channels
  const Eigen::MatrixXcd& xr = point.beamformers;
  const PlanMetrics m = evaluate_plan(cfg, channels, plan, point);
  Eigen::VectorXd beta_r = point.common_rates;
  if (beta_r.size() != K) beta_r = Eigen::VectorXd::Zero(K);

  BeamformingProgram bp;
  bp.num_antennas = M;
  bp.num_users = K;
  ConvexProgram& p = bp.program;
  for (int j = 0; j <= K; ++j)
    bp.column_offset.push_back(plan.column_active(j) ? p.add_block("x" + std::to_string(j), M, 1, true)
                                                     : -1);
  if (plan.has_common()) bp.beta = p.add_block("beta", K);
  const int f0 = p.add_block("f", K);
  const int s0 = p.add_block("slack", L);
  for (int j = 0; j < K; ++j) bp.f.push_back(f0 + j);
  for (int l = 0; l < L; ++l) bp.link_slack.push_back(s0 + l);
  std::vector<int> common_links;
  for (int l = 0; l < L; ++l)
    if (plan.links[l].slot < 0) common_links.push_back(l);
  const int t0 = p.add_block("theta", static_cast<int>(common_links.size()));
  bp.link_theta.assign(L, -1);
  for (size_t c = 0; c < common_links.size(); ++c) bp.link_theta[common_links[c]] = t0 + static_cast<int>(c);
  const int e0 = p.add_block("target_error", T);
  for (int t = 0; t < T; ++t) bp.target_error.push_back(e0 + t);
  if (options.restoration) bp.shortfall = p.add_block("shortfall", 1);

  bp.f_scale = slot_sinr(plan, m).cwiseMax(kFloor);
  bp.link_scale = (m.link_interference / cfg.noise_power).cwiseMax(1.0);
  bp.theta_scale = m.link_sinr.cwiseMax(kFloor);

  const BilinearBound quarter = bilinear_upper_bound_quarter(1.0, 1.0);
  const AffineSurrogate root = sqrt_bilinear_lower_bound(1.0, 1.0);

  for (int l = 0; l < L; ++l) {
    const DecodeLink& link = plan.links[l];
    const Eigen::VectorXcd h = hn.col(link.receiver);
    const double G = bp.link_scale(l);
    const int g = bp.link_slack[l];

    ConvexFunction interference;
    interference.label = link.slot >= 0 ? "private_interference" : "common_interference";
    for (int i : link.interferers)
      if (bp.column_offset[i] >= 0) add_abs2(interference, h, bp.column_offset[i], 1.0);
    interference.linear.add(g, -G);
    interference.linear.constant = 1.0;
    p.inequalities.push_back(interference);

    const int xs = bp.column_offset[link.stream];
    // Slack pair whose product the link's signal power must cover.
    const int a = link.slot >= 0 ? bp.f[link.slot] : bp.link_theta[l];
    const double A = link.slot >= 0 ? bp.f_scale(link.slot) : bp.theta_scale(l);
    ConvexFunction signal;
    signal.label = link.slot >= 0 ? "private_signal" : "common_signal";
    if (link.own) {
      // sqrt(A G) * tangent(u_a, u_g) <= Re(h^H x_s), valid after rotation.
      const double s = std::sqrt(A * G);
      signal.linear.add(a, s * root.gradient(0)).add(g, s * root.gradient(1));
      signal.linear.constant = s * root.offset();
      signal.linear.add(inner_re(h, xs), -1.0);
    } else {
      const double AG = A * G;
      signal.add_square(LinearExpr().add(a, 1.0).add(g, 1.0), AG * quarter.weight);
      signal.linear.add(a, AG * quarter.a).add(g, AG * quarter.b);
      signal.linear.constant = AG * quarter.c;
      const AffineSurrogate lb = quadratic_signal_lower_bound_x(h, xr.col(link.stream));
      for (int i = 0; i < 2 * M; ++i) signal.linear.add(xs + i, -lb.gradient(i));
      signal.linear.constant -= lb.offset();
    }
    p.inequalities.push_back(signal);

    if (link.slot < 0) {
      ConvexFunction rate;
      rate.label = "common_rate";
      for (int k = 0; k < K; ++k) rate.linear.add(bp.beta + k, 1.0);
      rate.add_neglog2(LinearExpr(1.0).add(a, A));
      p.inequalities.push_back(rate);
      ConvexFunction nonneg;
      nonneg.label = "nonneg";
      nonneg.linear.add(a, -1.0);
      p.inequalities.push_back(nonneg);
    }
  }

  for (int j = 0; j < K; ++j) {
    const double w = plan.rate_weight(j);
    ConvexFunction qos;
    qos.label = "qos";
    LinearExpr exponent(cfg.qos_thresholds[j] / w);
    if (bp.beta >= 0) exponent.add(bp.beta + j, -1.0 / w);
    if (bp.shortfall >= 0) exponent.add(bp.shortfall, -1.0 / w);
    if (exponent.is_constant())
      qos.linear.constant = std::exp2(exponent.constant);
    else
      qos.add_exp2(exponent);
    qos.linear.constant -= 1.0;
    qos.linear.add(bp.f[j], -bp.f_scale(j));
    p.inequalities.push_back(qos);
    ConvexFunction nonneg;
    nonneg.label = "nonneg";
    nonneg.linear.add(bp.f[j], -1.0);
    p.inequalities.push_back(nonneg);
    if (bp.beta >= 0) {
      ConvexFunction nb;
      nb.label = "nonneg";
      nb.linear.add(bp.beta + j, -1.0);
      p.inequalities.push_back(nb);
    }
  }

  if (plan.per_slot_power) {
    for (int j = 0; j <= K; ++j) {
      if (bp.column_offset[j] < 0) continue;
      ConvexFunction power;
      power.label = "power";
      add_column_power(power, bp.column_offset[j], M, 1.0);
      power.linear.constant = -cfg.power_budget;
      p.inequalities.push_back(power);
    }
  } else {
    ConvexFunction power;
    power.label = "power";
    for (int j = 0; j <= K; ++j)
      if (bp.column_offset[j] >= 0) add_column_power(power, bp.column_offset[j], M, 1.0);
    power.linear.constant = -cfg.power_budget;
    p.inequalities.push_back(power);
  }

  // Radar: |level_t - zeta_t| <= e_t with the concave side linearized, and
  // sum_t e_t^2 <= delta. A global restriction of the true constraint.
  ConvexFunction radar;
  radar.label = "beampattern";
  radar.linear.constant = -cfg.beampattern_tolerance;
  for (int t = 0; t < T; ++t) {
    const RadarTarget& target = cfg.radar_targets[t];
    const Eigen::VectorXcd a = steering_vector(target.angle, M, cfg.spacing_ratio, false);
    ConvexFunction above;
    above.label = "beampattern_level";
    for (int j = 0; j <= K; ++j)
      if (bp.column_offset[j] >= 0 && plan.column_weight(j) > 0.0)
        add_abs2(above, a, bp.column_offset[j], plan.column_weight(j));
    above.linear.constant = -target.level;
    above.linear.add(bp.target_error[t], -1.0);
    p.inequalities.push_back(above);

    const AffineSurrogate lb = beampattern_level_lower_bound_x(xr, target.angle, cfg.spacing_ratio,
                                                               plan.column_weight);
    ConvexFunction below;
    below.label = "beampattern_level";
    add_full_gradient(below.linear, lb.gradient, bp.column_offset, M, -1.0);
    below.linear.constant = target.level - lb.offset();
    below.linear.add(bp.target_error[t], -1.0);
    p.inequalities.push_back(below);

    radar.add_square(LinearExpr().add(bp.target_error[t], 1.0));
  }
  p.inequalities.push_back(radar);

  if (options.restoration) {
    p.objective.linear.add(bp.shortfall, 1.0);
    ConvexFunction floor_fn;
    floor_fn.label = "shortfall_floor";
    floor_fn.linear.add(bp.shortfall, -1.0);
    floor_fn.linear.constant = -1.0;
    p.inequalities.push_back(floor_fn);
    p.objective_model = "minimize the QoS shortfall";
  } else {
    const double tau = options.tau;
    for (int j = 0; j <= K; ++j)
      if (bp.column_offset[j] >= 0 && plan.column_weight(j) > 0.0)
        add_column_power(p.objective, bp.column_offset[j], M, tau * plan.column_weight(j));
    p.objective.linear.constant = tau * cfg.fixed_power();
    if (bp.beta >= 0)
      for (int k = 0; k < K; ++k) p.objective.linear.add(bp.beta + k, -1.0);
    for (int j = 0; j < K; ++j)
      p.objective.add_neglog2(LinearExpr(1.0).add(bp.f[j], bp.f_scale(j)), plan.rate_weight(j));
    p.objective_model = "tau * power - sum(beta) - sum_j w_j log2(1 + F_j u_j)";
  }

  // Start at the reference: slacks at their scale (u = 1).
  Eigen::VectorXd v = Eigen::VectorXd::Ones(p.num_variables());
  for (int j = 0; j <= K; ++j)
    if (bp.column_offset[j] >= 0)
      for (int i = 0; i < M; ++i) {
        v(bp.column_offset[j] + 2 * i) = xr(i, j).real();
        v(bp.column_offset[j] + 2 * i + 1) = xr(i, j).imag();
      }
  if (bp.beta >= 0) v.segment(bp.beta, K) = beta_r;
  for (int t = 0; t < T; ++t)
    v(bp.target_error[t]) = std::abs(beampattern_level(xr, cfg.radar_targets[t].angle,
                                                       cfg.spacing_ratio, false,
                                                       plan.column_weight) -
                                     cfg.radar_targets[t].level);
  if (bp.shortfall >= 0) v(bp.shortfall) = std::max(m.feasibility.qos.maxCoeff(), -1.0);
  p.start = v;
  return bp;
}

BeamformingResult dinkelbach_beamforming(const Scenario& scenario, const ChannelSet& channels,
                                         const DecodingPlan& plan, const OperatingPoint& start,
                                         const SolverSettings& settings) {
  const auto clock0 = Clock::now();
  const SystemConfig& cfg = scenario.config;
  BeamformingResult out;
  OperatingPoint cur = start;
  cur.beamformers = rotate_beamformer(start.beamformers, channels);
  if (cur.common_rates.size() != plan.num_users) cur.common_rates = Eigen::VectorXd::Zero(plan.num_users);
  PlanMetrics m = evaluate_plan(cfg, channels, plan, cur);
  double ee = m.energy_efficiency;
  out.tau = ee;
  if (!accept_feasible(m, settings)) {
    out.trace.diagnostics.push_back("beamforming started from an infeasible point");
    out.point = cur;
    out.energy_efficiency = ee;
    return out;
  }

  for (int it = 1; it <= settings.max_sca_iterations; ++it) {
    double tau = ee;
    Eigen::VectorXd warm;
    Eigen::VectorXd solution;
    BeamformingProgram last;
    const int loop_id = it;
    for (int t = 0; t < settings.max_dinkelbach_iterations; ++t) {
      BeamformingProgram bp =
          build_beamforming_program(scenario, channels, plan, cur, {tau, false});
      if (warm.size() == bp.program.num_variables()) bp.program.start = warm;
      const SolveResult res = solve_convex(bp.program, settings.interior_point);
      ++out.trace.convex_solves;
      ++out.trace.beamforming_solves;
      if (!res.usable()) {
        out.trace.diagnostics.push_back(std::string("beamforming program ") + to_string(res.status));
        break;
      }
      // An inexact solve must not lose to the known feasible start; the exact
      // parametric optimum never does.
      Eigen::VectorXd sol = res.x;
      const Eigen::VectorXd& known = bp.program.start;
      if (known.size() == sol.size() &&
          program_violation(bp.program, known) <=
              std::max(res.max_violation, settings.interior_point.feasibility_tol) &&
          bp.program.objective.evaluate(known) < bp.program.objective.evaluate(sol))
        sol = known;
      const Eigen::MatrixXcd x = bp.beamformers(sol);
      const double N = bp.numerator(sol, plan);
      const double D = plan.column_weight.dot(x.colwise().squaredNorm().transpose()) +
                       cfg.fixed_power();
      const double phi = tau * D - N;
      TraceEntry e;
      e.stage = Stage::kDinkelbach;
      e.loop = loop_id;
      e.iteration = t;
      e.objective = N / D;
      e.tau = tau;
      e.phi = phi;
      e.ee = N / D;
      e.power = D - cfg.fixed_power();
      e.wall_time = seconds_since(clock0);
      out.trace.add(e);
      solution = sol;
      warm = sol;
      last = std::move(bp);
      out.phi = phi;
      const double next = N / D;
      out.tau = next;
      if (std::abs(phi) <= settings.dinkelbach_tolerance) break;
      tau = next;
    }
    if (solution.size() == 0) break;

    OperatingPoint cand = cur;
    cand.beamformers = last.beamformers(solution);
    cand.common_rates = last.common_rates(solution);
    bool accepted = false;
    int damping = 0;
    PlanMetrics mc;
    for (; damping <= settings.damping_limit; ++damping) {
      const OperatingPoint trial = blend(cur, cand, std::ldexp(1.0, -damping));
      mc = evaluate_plan(cfg, channels, plan, trial);
      if (accept_feasible(mc, settings) && mc.energy_efficiency > ee) {
        cand = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.trace.converged = true;
      break;
    }
    const double gain = relative_gain(mc.energy_efficiency, ee);
    cur = cand;
    cur.beamformers = rotate_beamformer(cand.beamformers, channels);
    m = mc;
    ee = mc.energy_efficiency;
    TraceEntry e;
    e.stage = Stage::kBeamforming;
    e.loop = loop_id;
    e.iteration = it;
    e.objective = ee;
    e.tau = out.tau;
    e.phi = out.phi;
    e.residual = m.feasibility.max_residual();
    e.damping = damping;
    e.wall_time = seconds_since(clock0);
    e.ee = ee;
    e.power = m.consumed_power;
    out.trace.add(e);
    if (gain < settings.sca_tolerance) {
      out.trace.converged = true;
      break;
    }
  }
  out.point = cur;
  out.energy_efficiency = ee;
  out.feasible = accept_feasible(m, settings);
  return out;
}

// --- initialization, restoration, outer loop ---------------------------------------

namespace {

// Columns that the radar fit may adjust.
std::vector<int> radar_columns(const DecodingPlan& plan) {
  if (plan.has_common()) return {0};
  std::vector<int> cols(plan.num_users);
  std::iota(cols.begin(), cols.end(), 1);
  return cols;
}

// Minimum-norm Gauss-Newton on the target-level residuals over `cols`.
void fit_beampattern(const SystemConfig& cfg, const DecodingPlan& plan, Eigen::MatrixXcd& x,
                     const std::vector<int>& cols) {
  const int T = static_cast<int>(cfg.radar_targets.size());
  const int M = cfg.num_antennas;
  for (int it = 0; it < 60; ++it) {
    Eigen::VectorXd e(T);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(T, 2 * M * static_cast<int>(cols.size()));
    for (int t = 0; t < T; ++t) {
      const RadarTarget& tg = cfg.radar_targets[t];
      e(t) = beampattern_level(x, tg.angle, cfg.spacing_ratio, false, plan.column_weight) - tg.level;
      const AffineSurrogate s =
          beampattern_level_lower_bound_x(x, tg.angle, cfg.spacing_ratio, plan.column_weight);
      for (size_t c = 0; c < cols.size(); ++c)
        J.row(t).segment(2 * M * c, 2 * M) = s.gradient.segment(2 * M * cols[c], 2 * M).transpose();
    }
    if (e.squaredNorm() <= 1e-6 * cfg.beampattern_tolerance) break;
    const double lambda = 1e-9 * std::max(1.0, J.squaredNorm());
    Eigen::MatrixXd JJ = J * J.transpose();
    JJ.diagonal().array() += lambda;
    const Eigen::VectorXd step = -J.transpose() * JJ.ldlt().solve(e);
    // Halve until the residual decreases.
    double alpha = 1.0;
    Eigen::MatrixXcd best = x;
    for (int ls = 0; ls < 30; ++ls) {
      Eigen::MatrixXcd trial = x;
      for (size_t c = 0; c < cols.size(); ++c)
        for (int i = 0; i < M; ++i)
          trial(i, cols[c]) += alpha * cdouble(step(2 * M * c + 2 * i), step(2 * M * c + 2 * i + 1));
      const double r = beampattern_mse(trial, cfg.radar_targets, cfg.spacing_ratio, false,
                                       plan.column_weight);
      if (r < e.squaredNorm()) {
        best = trial;
        break;
      }
      alpha *= 0.5;
    }
    if (best == x) break;
    x = best;
  }
}

void private_directions(const ChannelSet& channels, const DecodingPlan& plan,
                        const SystemConfig& cfg, Eigen::MatrixXcd& dirs) {
  const int K = plan.num_users;
  const Eigen::MatrixXcd& H = channels.h;
  if (plan.scheme == Scheme::kRsma) {
    const double reg = K * cfg.noise_power / cfg.power_budget;
    Eigen::MatrixXcd G = H.adjoint() * H;
    G.diagonal().array() += reg;
    dirs = H * G.ldlt().solve(Eigen::MatrixXcd::Identity(K, K));
  } else {
    dirs = H;
  }
  for (int k = 0; k < K; ++k) dirs.col(k).normalize();
}

double budget_usage(const DecodingPlan& plan, const Eigen::MatrixXcd& x) {
  const Eigen::VectorXd cp = x.colwise().squaredNorm().transpose();
  return plan.per_slot_power ? cp.tail(plan.num_users).maxCoeff() : cp.sum();
}

}  // namespace

Eigen::Vector2d user_centroid(const Scenario& scenario) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& u : scenario.users) c += u.position;
  return scenario.users.empty() ? c : Eigen::Vector2d(c / static_cast<double>(scenario.users.size()));
}

DecodingPlan scenario_plan(const Scenario& scenario, Scheme scheme) {
  return make_plan(scheme, make_channels(scenario.config, user_centroid(scenario), scenario.users));
}

OperatingPoint initial_point(const Scenario& scenario, const DecodingPlan& plan) {
  const SystemConfig& cfg = scenario.config;
  const int K = plan.num_users;
  const int M = cfg.num_antennas;
  OperatingPoint p;
  p.uav = user_centroid(scenario);
  const ChannelSet ch = make_channels(cfg, p.uav, scenario.users);

  Eigen::MatrixXcd dirs;
  private_directions(ch, plan, cfg, dirs);
  const double slot_share = plan.per_slot_power ? 1.0 : 1.0 / K;
  Eigen::VectorXcd common_dir = Eigen::VectorXcd::Zero(M);
  for (int k = 0; k < K; ++k) common_dir += ch.h.col(k) / ch.h.col(k).norm();
  if (common_dir.norm() > 0.0) common_dir.normalize();

  double private_fraction = 0.5;
  Eigen::MatrixXcd x;
  for (int attempt = 0; attempt < 12; ++attempt) {
    x = Eigen::MatrixXcd::Zero(M, K + 1);
    const double pk = private_fraction * cfg.power_budget * slot_share;
    for (int k = 0; k < K; ++k) x.col(k + 1) = std::sqrt(pk) * dirs.col(k);
    if (plan.has_common()) x.col(0) = std::sqrt(0.1 * cfg.power_budget) * common_dir;
    fit_beampattern(cfg, plan, x, radar_columns(plan));
    const double usage = budget_usage(plan, x);
    const double mse =
        beampattern_mse(x, cfg.radar_targets, cfg.spacing_ratio, false, plan.column_weight);
    if (usage <= 0.9 * cfg.power_budget && mse <= 0.25 * cfg.beampattern_tolerance) break;
    private_fraction *= 0.6;
  }
  p.beamformers = x;
  p.common_rates = Eigen::VectorXd::Zero(K);
  if (plan.has_common()) {
    const PlanMetrics m = evaluate_plan(cfg, ch, plan, p);
    p.common_rates.setConstant(0.9 * m.common_rate / K);
  }
  return p;
}

bool restore_feasibility(const Scenario& scenario, const DecodingPlan& plan,
                         OperatingPoint& point, const SolverSettings& settings,
                         SolveTrace& trace) {
  const SystemConfig& cfg = scenario.config;
  const ChannelSet ch = make_channels(cfg, point.uav, scenario.users);
  PlanMetrics m = evaluate_plan(cfg, ch, plan, point);
  if (accept_feasible(m, settings)) return true;

  if (m.feasibility.power > 0.0) {
    point.beamformers *= std::sqrt(0.999 * cfg.power_budget / budget_usage(plan, point.beamformers));
    m = evaluate_plan(cfg, ch, plan, point);
  }
  if (m.feasibility.beampattern > 0.0) {
    fit_beampattern(cfg, plan, point.beamformers, radar_columns(plan));
    if (budget_usage(plan, point.beamformers) > cfg.power_budget)
      point.beamformers *= std::sqrt(0.999 * cfg.power_budget / budget_usage(plan, point.beamformers));
    m = evaluate_plan(cfg, ch, plan, point);
  }
  point.common_rates = point.common_rates.cwiseMax(0.0);
  if (plan.has_common() && m.feasibility.common_rate > 0.0 && point.common_rates.sum() > 0.0) {
    point.common_rates *= 0.999 * std::max(m.common_rate, 0.0) / point.common_rates.sum();
    m = evaluate_plan(cfg, ch, plan, point);
  }
  if (accept_feasible(m, settings)) return true;
  if (m.feasibility.power > settings.feasibility_tol ||
      m.feasibility.beampattern > settings.feasibility_tol ||
      m.feasibility.common_rate > settings.feasibility_tol) {
    trace.diagnostics.push_back("restoration could not meet power, radar or common-rate limits");
    return false;
  }

  // QoS: drive the worst shortfall below zero with the same convex restriction.
  const auto t0 = Clock::now();
  for (int it = 1; it <= settings.max_sca_iterations; ++it) {
    point.beamformers = rotate_beamformer(point.beamformers, ch);
    const double before = m.feasibility.qos.maxCoeff();
    const BeamformingProgram bp = build_beamforming_program(scenario, ch, plan, point, {0.0, true});
    const SolveResult res = solve_convex(bp.program, settings.interior_point);
    ++trace.convex_solves;
    ++trace.beamforming_solves;
    if (!res.usable()) {
      trace.diagnostics.push_back(std::string("restoration program ") + to_string(res.status));
      break;
    }
    OperatingPoint cand = point;
    cand.beamformers = bp.beamformers(res.x);
    cand.common_rates = bp.common_rates(res.x);
    bool accepted = false;
    PlanMetrics mc;
    int damping = 0;
    for (; damping <= settings.damping_limit; ++damping) {
      const OperatingPoint trial = blend(point, cand, std::ldexp(1.0, -damping));
      mc = evaluate_plan(cfg, ch, plan, trial);
      const FeasibilityReport& f = mc.feasibility;
      const bool others = std::max({f.power, f.beampattern, f.common_rate, f.nonnegativity}) <=
                          settings.feasibility_tol;
      if (others && f.qos.maxCoeff() < before) {
        cand = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    point = cand;
    m = mc;
    TraceEntry e;
    e.stage = Stage::kRestore;
    e.iteration = it;
    e.objective = m.feasibility.qos.maxCoeff();
    e.residual = m.feasibility.max_residual();
    e.damping = damping;
    e.wall_time = seconds_since(t0);
    e.ee = m.energy_efficiency;
    e.power = m.consumed_power;
    trace.add(e);
    if (m.feasibility.qos.maxCoeff() <= -1e-6) break;
  }
  if (accept_feasible(m, settings)) return true;
  trace.diagnostics.push_back("QoS thresholds unattainable from the initial point");
  return false;
}

AlternatingResult alternating_optimize(const Scenario& scenario, Scheme scheme,
                                       const OperatingPoint& init, const SolverSettings& settings) {
  const SystemConfig& cfg = scenario.config;
  cfg.validate();
  settings.validate();
  if (static_cast<int>(scenario.users.size()) != cfg.num_users)
    throw std::invalid_argument("alternating_optimize: user count does not match the config");
  const auto t0 = Clock::now();
  AlternatingResult out;
  out.plan = scenario_plan(scenario, scheme);
  const DecodingPlan& plan = out.plan;
  OperatingPoint point = init;
  if (point.common_rates.size() != cfg.num_users) point.common_rates = Eigen::VectorXd::Zero(cfg.num_users);

  if (!restore_feasibility(scenario, plan, point, settings, out.trace)) {
    out.trace.restoration_failed = true;
    out.point = point;
    out.metrics = evaluate_plan(cfg, make_channels(cfg, point.uav, scenario.users), plan, point);
    return out;
  }
  PlanMetrics m = evaluate_plan(cfg, make_channels(cfg, point.uav, scenario.users), plan, point);
  double ee = m.energy_efficiency;
  auto record = [&](int s) {
    TraceEntry e;
    e.stage = Stage::kOuter;
    e.outer = s;
    e.iteration = s;
    e.objective = m.energy_efficiency;
    e.residual = m.feasibility.max_residual();
    e.wall_time = seconds_since(t0);
    e.ee = m.energy_efficiency;
    e.power = m.consumed_power;
    out.trace.add(e);
  };
  record(0);

  for (int s = 1; s <= settings.max_outer_iterations; ++s) {
    LocationResult loc = sca_location(scenario, plan, point, settings);
    for (auto& e : loc.trace.entries) e.outer = s;
    out.trace.merge(loc.trace);
    point.uav = loc.z;
    const ChannelSet ch = make_channels(cfg, point.uav, scenario.users);
    BeamformingResult bf = dinkelbach_beamforming(scenario, ch, plan, point, settings);
    for (auto& e : bf.trace.entries) e.outer = s;
    out.trace.merge(bf.trace);
    point = bf.point;
    m = evaluate_plan(cfg, ch, plan, point);
    record(s);
    const double gain = relative_gain(m.energy_efficiency, ee);
    ee = m.energy_efficiency;
    if (gain < settings.outer_tolerance) {
      out.trace.converged = true;
      break;
    }
  }
  out.point = point;
  out.metrics = m;
  out.feasible = accept_feasible(m, settings);
  return out;
}

AlternatingResult alternating_optimize(const Scenario& scenario, Scheme scheme,
                                       const SolverSettings& settings) {
  return alternating_optimize(scenario, scheme, initial_point(scenario, scenario_plan(scenario, scheme)),
                              settings);
}

}  // namespace uavrsma
