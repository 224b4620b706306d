// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [output_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "uavrsma/baselines.hpp"
#include "uavrsma/harness.hpp"
#include "uavrsma/linearize.hpp"
#include "uavrsma/oracle.hpp"
#include "uavrsma/subproblems.hpp"

using namespace uavrsma;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::map<int, std::pair<bool, std::string>> verdicts;
std::string transcript;

void emit(const std::string& line) {
  transcript += line + "\n";
  fmt::print("{}\n", line);
  std::fflush(stdout);
}

void report(int id, const char* name, bool pass, const std::string& detail, double seconds) {
  std::string line = fmt::format("[{}] criterion {}: {} | {}", pass ? "PASS" : "FAIL", id, name, detail);
  if (seconds > 0.0) line += fmt::format(" ({:.1f} s)", seconds);
  verdicts[id] = {pass, line};
  emit(line);
}

void info(const std::string& line) { emit("       " + line); }

// --- criterion 1 ---------------------------------------------------------------

struct SurrogateTally {
  long draws = 0;
  long violations = 0;
  double tangency = 0.0;  // relative gap at the reference
  double grad = 0.0;      // finite-difference relative error

  void gap(double approx, double exact) {
    const double g = std::abs(approx - exact);
    tangency = std::max(tangency, exact != 0.0 ? g / std::abs(exact) : g);
  }
  void fd(const FiniteDifferenceReport& r) { grad = std::max(grad, r.max_grad_relerr); }
  [[nodiscard]] bool ok() const { return violations == 0 && tangency <= 1e-10 && grad <= 1e-4; }
};

// Round-off allowance on a bound comparison.
bool violates_upper(double bound, double value) {
  return bound < value - 1e-12 * std::max(1.0, std::abs(value));
}
bool violates_lower(double bound, double value) {
  return bound > value + 1e-12 * std::max(1.0, std::abs(value));
}

AffineSurrogate tangent_of(const BilinearBound& b, double u, double v) {
  AffineSurrogate s;
  s.reference_point = Eigen::Vector2d(u, v);
  s.gradient = Eigen::Vector2d(2 * b.weight * (u + v) + b.a, 2 * b.weight * (u + v) + b.b);
  s.value_at_ref = b.evaluate(u, v);
  return s;
}

Eigen::VectorXcd random_vector(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = {d(rng), d(rng)};
  return v;
}

void criterion_surrogates() {
  const auto t0 = Clock::now();
  constexpr long kDraws = 10000;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> logu(-3.0, 1.0);
  auto positive = [&] { return std::pow(10.0, logu(rng)); };
  const auto prod = [](const Eigen::VectorXd& w) { return w(0) * w(1); };
  const auto root = [](const Eigen::VectorXd& w) { return std::sqrt(w(0) * w(1)); };

  std::map<std::string, SurrogateTally> t;

  for (long i = 0; i < kDraws; ++i) {
    const double fr = positive(), gr = positive(), f = positive(), g = positive();
    {
      auto& s = t["bilinear_upper_bound"];
      const BilinearBound b = bilinear_upper_bound(fr, gr);
      ++s.draws;
      s.violations += violates_upper(b.evaluate(f, g), f * g);
      s.gap(b.evaluate(fr, gr), fr * gr);
      s.fd(finite_difference_check(prod, tangent_of(b, fr, gr), 1e-6 * std::min(fr, gr)));
    }
    {
      auto& s = t["bilinear_upper_bound_quarter"];
      const BilinearBound b = bilinear_upper_bound_quarter(fr, gr);
      ++s.draws;
      s.violations += violates_upper(b.evaluate(f, g), f * g);
      s.gap(b.evaluate(fr, gr), fr * gr);
      s.fd(finite_difference_check(prod, tangent_of(b, fr, gr), 1e-6 * std::min(fr, gr)));
    }
    {
      auto& s = t["sqrt_bilinear_lower_bound"];
      const AffineSurrogate a = sqrt_bilinear_lower_bound(fr, gr);
      ++s.draws;
      s.violations += violates_upper(a.evaluate(Eigen::Vector2d(f, g)), std::sqrt(f * g));
      s.gap(a.value_at_ref, std::sqrt(fr * gr));
      s.fd(finite_difference_check(root, a, 1e-6 * std::min(fr, gr)));
    }
  }

  const SystemConfig cfg = default_config();
  const int M = cfg.num_antennas;
  for (long i = 0; i < kDraws; ++i) {
    const Eigen::VectorXcd h = random_vector(rng, M, 1.0);
    const Eigen::VectorXcd xr = random_vector(rng, M, 0.1);
    const Eigen::VectorXcd x = random_vector(rng, M, 0.1);
    auto& s = t["quadratic_signal_lower_bound_x"];
    const AffineSurrogate a = quadratic_signal_lower_bound_x(h, xr);
    const auto power = [&](const Eigen::VectorXd& v) {
      return std::norm(h.dot(devectorize(v, M, 1).col(0)));
    };
    ++s.draws;
    s.violations += violates_lower(a.evaluate(vectorize(x)), std::norm(h.dot(x)));
    s.gap(a.value_at_ref, std::norm(h.dot(xr)));
    s.fd(finite_difference_check(power, a, 1e-6));
  }

  // location surrogates in z and the beampattern level in x
  std::uniform_real_distribution<double> pos(0.0, cfg.area_side);
  std::uniform_real_distribution<double> angle(-1.2, 1.2);
  for (long i = 0; i < kDraws; ++i) {
    UserTerminal user;
    user.position = {pos(rng), pos(rng)};
    user.fading = random_vector(rng, 1, std::sqrt(0.5))(0);
    user.aod = angle(rng);
    const Eigen::VectorXcd col = random_vector(rng, M, 0.1);
    const Eigen::Vector2d zr(pos(rng), pos(rng)), z(pos(rng), pos(rng));
    const double exact = signal_power_z(cfg, user, col, z);
    const double at_ref = signal_power_z(cfg, user, col, zr);
    const auto g = [&](const Eigen::VectorXd& v) {
      return signal_power_z(cfg, user, col, Eigen::Vector2d(v(0), v(1)));
    };
    {
      auto& s = t["signal_power_surrogate_z (lower)"];
      const SignalPowerSurrogate sp = signal_power_surrogate_z(cfg, user, col, zr, BoundDirection::kLower);
      ++s.draws;
      s.violations += violates_lower(sp.evaluate(z), exact);
      s.gap(sp.evaluate(zr), at_ref);
      s.fd(finite_difference_check(g, sp.tangent, 1e-4));
      // the bound itself shares the true gradient at the reference
      s.fd(finite_difference_check(
          [&](const Eigen::VectorXd& v) { return sp.evaluate(Eigen::Vector2d(v(0), v(1))); },
          sp.tangent, 1e-4));
    }
    {
      auto& s = t["signal_power_surrogate_z (upper)"];
      const SignalPowerSurrogate sp = signal_power_surrogate_z(cfg, user, col, zr, BoundDirection::kUpper);
      ++s.draws;
      s.violations += violates_upper(sp.evaluate(z), exact);
      s.gap(sp.evaluate(zr), at_ref);
      s.fd(finite_difference_check(
          [&](const Eigen::VectorXd& v) { return sp.evaluate(Eigen::Vector2d(v(0), v(1))); },
          sp.tangent, 1e-4));
    }
    {
      auto& s = t["beampattern_level_lower_bound_x"];
      Eigen::MatrixXcd xr(M, 2), x(M, 2);
      xr << col, random_vector(rng, M, 0.1);
      x << random_vector(rng, M, 0.1), random_vector(rng, M, 0.1);
      const double theta = angle(rng);
      const AffineSurrogate a = beampattern_level_lower_bound_x(xr, theta, cfg.spacing_ratio);
      const auto level = [&](const Eigen::VectorXd& v) {
        return beampattern_level(devectorize(v, M, 2), theta, cfg.spacing_ratio);
      };
      ++s.draws;
      s.violations += violates_lower(a.evaluate(vectorize(x)), beampattern_level(x, theta, cfg.spacing_ratio));
      s.gap(a.value_at_ref, beampattern_level(xr, theta, cfg.spacing_ratio));
      s.fd(finite_difference_check(level, a, 1e-6));
    }
  }

  bool pass = true;
  long draws = 0, violations = 0;
  double tangency = 0.0, grad = 0.0;
  for (const auto& [name, s] : t) {
    info(fmt::format("{:<34} draws {:>6}  violations {}  tangency {:.2e}  fd {:.2e}", name, s.draws,
                     s.violations, s.tangency, s.grad));
    pass = pass && s.ok();
    draws += s.draws;
    violations += s.violations;
    tangency = std::max(tangency, s.tangency);
    grad = std::max(grad, s.grad);
  }
  const double secs = since(t0);
  pass = pass && secs < 30.0;
  report(1, "surrogate validity", pass,
         fmt::format("{} draws, {} violations, max tangency gap {:.2e}, max fd error {:.2e}", draws,
                     violations, tangency, grad),
         secs);
}

// --- shared sweep ----------------------------------------------------------------

std::vector<std::uint64_t> seeds(int n) {
  std::vector<std::uint64_t> s(n);
  for (int i = 0; i < n; ++i) s[i] = static_cast<std::uint64_t>(i + 1);
  return s;
}

const RunRecord* find(const ExperimentReport& r, double value, std::uint64_t seed, Scheme scheme) {
  for (const auto& run : r.runs)
    if (run.sweep_value == value && run.seed == seed && run.scheme == scheme) return &run;
  return nullptr;
}

// Outer-loop EE is non-decreasing and the run converged within the cap.
bool monotone_and_converged(const SchemeResult& r, int cap) {
  const auto outer = r.trace.stage(Stage::kOuter);
  for (size_t i = 1; i < outer.size(); ++i)
    if (outer[i].ee < outer[i - 1].ee - 1e-8) return false;
  return r.trace.converged && !outer.empty() && outer.back().outer <= cap;
}

struct ResidualTally {
  long solutions = 0;
  long failed = 0;
  double worst = -std::numeric_limits<double>::infinity();
  double worst_mse = 0.0;

  void add(const Scenario& sc, const SchemeResult& r) {
    ++solutions;
    const PlanMetrics m = r.recompute(sc);
    worst = std::max(worst, m.feasibility.max_residual());
    worst_mse = std::max(worst_mse, m.beampattern_mse);
    if (!r.feasible || m.feasibility.max_residual() > 1e-6 ||
        m.beampattern_mse > sc.config.beampattern_tolerance + 1e-6)
      ++failed;
  }
};

ResidualTally residuals;

struct DinkelbachTally {
  long loops = 0;
  long tau_drops = 0;
  long open_loops = 0;  // terminal |phi| above the tolerance
  double worst_phi = 0.0;
  double worst_tau_gap = 0.0;  // relative |tau - N/D| at loop exit

  void add(const SolveTrace& trace, double tol) {
    const auto e = trace.stage(Stage::kDinkelbach);
    for (size_t i = 0; i < e.size(); ++i) {
      if (e[i].iteration == 0) ++loops;
      const bool last = i + 1 == e.size() || e[i + 1].iteration == 0;
      if (!last) {
        if (e[i + 1].tau < e[i].tau - 1e-12 * std::abs(e[i].tau)) ++tau_drops;
        continue;
      }
      worst_phi = std::max(worst_phi, std::abs(e[i].phi));
      if (std::abs(e[i].phi) > tol) ++open_loops;
      worst_tau_gap = std::max(worst_tau_gap, std::abs(e[i].tau - e[i].objective) / e[i].objective);
    }
  }
};

DinkelbachTally dinkelbach;

void criteria_sweep(const fs::path& out) {
  const auto t0 = Clock::now();
  ExperimentSpec spec;
  spec.sweep_values.clear();
  for (int v = 23; v <= 32; ++v) spec.sweep_values.push_back(v);
  spec.seeds = seeds(20);
  spec.output_dir = (out / "sweep").string();
  const ExperimentReport rep = run_experiment(spec);
  const double sweep_secs = since(t0);
  info(fmt::format("sweep: {} runs over 23..32 dBm, 20 seeds, 3 schemes in {:.1f} s, written to {}",
                   rep.runs.size(), sweep_secs, spec.output_dir));

  for (const auto& run : rep.runs) {
    residuals.add(generate_scenario(spec.config_for(run.sweep_value), run.seed), run.result);
    dinkelbach.add(run.result.trace, spec.solver.dinkelbach_tolerance);
  }

  // criterion 2
  {
    int bad_trace = 0, bad_order = 0, max_outer = 0;
    for (std::uint64_t seed : spec.seeds) {
      double ee[3] = {0, 0, 0};
      int i = 0;
      for (double v : {23.0, 26.0, 29.0}) {
        const RunRecord* r = find(rep, v, seed, Scheme::kRsma);
        if (!r || !monotone_and_converged(r->result, 30)) ++bad_trace;
        if (r) {
          ee[i] = r->result.metrics.energy_efficiency;
          const auto outer = r->result.trace.stage(Stage::kOuter);
          if (!outer.empty()) max_outer = std::max(max_outer, outer.back().outer);
        }
        ++i;
      }
      if (!(ee[2] >= ee[1] && ee[1] >= ee[0])) ++bad_order;
    }
    report(2, "monotone convergence", bad_trace == 0 && bad_order == 0 && sweep_secs < 600.0,
           fmt::format("{} of 60 RSMA runs non-monotone or unconverged, max {} outer iterations, "
                       "{} of 20 seeds break EE(29) >= EE(26) >= EE(23)",
                       bad_trace, max_outer, bad_order),
           sweep_secs);
  }

  // criterion 4
  {
    double mean[3] = {0, 0, 0};
    for (std::uint64_t seed : spec.seeds)
      for (Scheme s : spec.schemes)
        if (const RunRecord* r = find(rep, 26.0, seed, s))
          mean[static_cast<int>(s)] += r->result.metrics.energy_efficiency / spec.seeds.size();
    const double rsma = mean[0], noma = mean[1], oma = mean[2];
    const double gain_oma = (rsma - oma) / oma, gain_noma = (rsma - noma) / noma;
    report(4, "scheme ordering", rsma > noma && noma > oma && gain_oma > 0.0,
           fmt::format("mean EE at 26 dBm: RSMA {:.3f}, NOMA {:.3f}, OMA {:.3f} bit/Hz/J; "
                       "RSMA gain {:.1f}% over OMA, {:.1f}% over NOMA",
                       rsma, noma, oma, 100 * gain_oma, 100 * gain_noma),
           sweep_secs);
  }

  // criterion 5: per (seed, scheme) chain, the first budget where consumed
  // power falls 5% below the budget is the saturation point
  {
    int bad = 0, saturated = 0;
    double worst_spread = 0.0;
    std::map<Scheme, double> plateau_mean;
    for (std::uint64_t seed : spec.seeds)
      for (Scheme s : spec.schemes) {
        std::vector<double> budget, used;
        for (double v : spec.sweep_values) {
          const RunRecord* r = find(rep, v, seed, s);
          if (!r) continue;
          budget.push_back(dbm_to_watts(v));
          used.push_back(r->result.metrics.consumed_power);
        }
        size_t sat = 0;
        while (sat < used.size() && used[sat] >= 0.95 * budget[sat]) ++sat;
        bool ok = used.size() == spec.sweep_values.size();
        for (size_t i = 1; i < sat; ++i) ok = ok && used[i] >= used[i - 1] - 1e-12;
        if (sat < used.size()) {
          ++saturated;
          const auto [lo, hi] = std::minmax_element(used.begin() + sat, used.end());
          const double spread = (*hi - *lo) / *hi;
          worst_spread = std::max(worst_spread, spread);
          ok = ok && spread < 0.05;
          plateau_mean[s] += used.back() / spec.seeds.size();
        }
        if (!ok) ++bad;
      }
    report(5, "power saturation", bad == 0,
           fmt::format("{} of 60 chains violate; {} saturated within the sweep, worst plateau spread "
                       "{:.2f}%; plateau power RSMA {:.3f} W, NOMA {:.3f} W, OMA {:.3f} W",
                       bad, saturated, 100 * worst_spread, plateau_mean[Scheme::kRsma],
                       plateau_mean[Scheme::kNoma], plateau_mean[Scheme::kOma]),
           sweep_secs);
  }
}

// Cold starts, no continuation: the budget ordering holds up to solver tolerance.
void cold_start_note() {
  const auto t0 = Clock::now();
  ExperimentSpec spec;
  spec.sweep_values = {23.0, 26.0, 29.0};
  spec.schemes = {Scheme::kRsma};
  spec.seeds = seeds(20);
  spec.continuation = false;
  const ExperimentReport rep = run_experiment(spec, false);
  double worst = 0.0;
  int broken = 0;
  for (std::uint64_t seed : spec.seeds) {
    const double a = find(rep, 23.0, seed, Scheme::kRsma)->result.metrics.energy_efficiency;
    const double b = find(rep, 26.0, seed, Scheme::kRsma)->result.metrics.energy_efficiency;
    const double c = find(rep, 29.0, seed, Scheme::kRsma)->result.metrics.energy_efficiency;
    const double drop = std::max((a - b) / a, (b - c) / b);
    if (drop > 0.0) ++broken;
    worst = std::max(worst, drop);
  }
  for (const auto& run : rep.runs)
    residuals.add(generate_scenario(spec.config_for(run.sweep_value), run.seed), run.result);
  info(fmt::format("cold starts without continuation: {} of 20 seeds lose EE at a larger budget, "
                   "worst relative loss {:.1e} against the 1e-4 outer tolerance ({:.1f} s)",
                   broken, worst, since(t0)));
}

void criterion_dinkelbach() {
  const auto t0 = Clock::now();
  const SolverSettings settings;
  double worst_direct = 0.0;
  int infeasible = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    for (Scheme s : {Scheme::kRsma, Scheme::kNoma, Scheme::kOma}) {
      const Scenario sc = generate_scenario(default_config(), seed);
      const DecodingPlan plan = scenario_plan(sc, s);
      OperatingPoint p = initial_point(sc, plan);
      SolveTrace t;
      if (!restore_feasibility(sc, plan, p, settings, t)) {
        ++infeasible;
        continue;
      }
      const ChannelSet ch = make_channels(sc.config, p.uav, sc.users);
      const BeamformingResult r = dinkelbach_beamforming(sc, ch, plan, p, settings);
      if (!r.feasible) ++infeasible;
      dinkelbach.add(r.trace, settings.dinkelbach_tolerance);
      worst_direct = std::max(worst_direct, std::abs(r.tau - r.energy_efficiency) / r.energy_efficiency);
    }
  const auto& d = dinkelbach;
  const bool pass = d.loops > 0 && d.tau_drops == 0 && d.open_loops == 0 &&
                    d.worst_tau_gap <= 1e-4 && worst_direct <= 1e-4 && infeasible == 0;
  report(6, "Dinkelbach correctness", pass,
         fmt::format("{} inner loops, {} tau decreases, {} end with |phi| > 1e-4 (max {:.1e}); "
                     "loop-exit |tau - EE|/EE max {:.1e}, final tau vs achieved EE max {:.1e} over 60 "
                     "direct solves",
                     d.loops, d.tau_drops, d.open_loops, d.worst_phi, d.worst_tau_gap, worst_direct),
         since(t0));
}

void criterion_oracles() {
  const auto t0 = Clock::now();
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const OracleCase c = run_oracle_case(seed, 100000, 1.0, SolverSettings{});
    pass = pass && c.ready && c.location_ok() && c.beamforming_ok();
    info(fmt::format("seed {}: location {:.6f} vs grid {:.6f} ({:.2f}%), EE {:.4f} vs best sample {} "
                     "({}), oracle re-evaluation {:.4f}",
                     seed, c.sca_objective, c.grid_objective,
                     c.grid_found ? 100 * c.sca_objective / c.grid_objective : 0.0, c.dinkelbach_ee,
                     c.sampler_found ? fmt::format("{:.4f}", c.sampler_ee) : std::string("none"),
                     c.sampler_found ? fmt::format("{:+.1f}%", 100 * (c.dinkelbach_ee / c.sampler_ee - 1))
                                     : std::string("no feasible sample"),
                     c.dinkelbach_oracle_ee));
  }
  const double secs = since(t0);
  report(7, "oracle equivalence", pass && secs < 300.0,
         "K=2, M=2, 5 seeds, 1 m grid, 1e5 samples", secs);
}

void criterion_complexity() {
  const auto t0 = Clock::now();
  std::vector<double> lk, ls;
  std::string table;
  for (int K : {2, 4, 6, 8}) {
    ExperimentSpec spec;
    spec.config_text = fmt::format("system: {{num_users: {}}}\n", K);
    spec.schemes = {Scheme::kRsma};
    spec.seeds = seeds(3);
    const ExperimentReport rep = run_experiment(spec, false);
    double mean = 0.0;
    for (const auto& run : rep.runs) {
      mean += run.result.trace.convex_solves / 3.0;
      residuals.add(generate_scenario(spec.config_for(run.sweep_value), run.seed), run.result);
    }
    lk.push_back(std::log(K));
    ls.push_back(std::log(mean));
    table += fmt::format("{}K={}: {:.1f}", table.empty() ? "" : ", ", K, mean);
  }
  const double mk = std::accumulate(lk.begin(), lk.end(), 0.0) / lk.size();
  const double ms = std::accumulate(ls.begin(), ls.end(), 0.0) / ls.size();
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < lk.size(); ++i) {
    num += (lk[i] - mk) * (ls[i] - ms);
    den += (lk[i] - mk) * (lk[i] - mk);
  }
  const double slope = num / den;
  report(8, "empirical complexity", slope <= 4.0,
         fmt::format("mean convex solves per RSMA run ({}), fitted exponent {:.2f}", table, slope),
         since(t0));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_results");
  fs::create_directories(out);
  fs::remove(out / "report.txt");

  criterion_surrogates();
  criteria_sweep(out);
  cold_start_note();
  criterion_dinkelbach();
  criterion_oracles();
  criterion_complexity();

  report(3, "feasibility at optimum", residuals.failed == 0,
         fmt::format("{} returned solutions, {} fail; max residual {:.2e}, max beampattern MSE {:.2e} "
                     "(delta 1e-2)",
                     residuals.solutions, residuals.failed, residuals.worst, residuals.worst_mse),
         0.0);

  int failures = 0;
  emit("\nsummary");
  for (const auto& [id, v] : verdicts) {
    failures += !v.first;
    emit(v.second);
  }
  emit(fmt::format("{} of {} criteria failed", failures, verdicts.size()));
  std::ofstream(out / "report.txt") << transcript;
  return failures == 0 && verdicts.size() == 8 ? 0 : 1;
}
