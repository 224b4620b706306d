#include <catch_amalgamated.hpp>

#include <cmath>

#include "uavrsma/harness.hpp"
#include "uavrsma/oracle.hpp"
#include "uavrsma/subproblems.hpp"

using namespace uavrsma;
using Catch::Approx;

namespace {

double max_constraint(const ConvexProgram& p, const Eigen::VectorXd& v) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& f : p.inequalities) worst = std::max(worst, f.evaluate(v));
  return worst;
}

int restricted_form_count(const ConvexProgram& p) {
  return p.count_label("private_signal") + p.count_label("private_interference") +
         p.count_label("common_signal") + p.count_label("common_interference") +
         p.count_label("beampattern");
}

// A feasible starting point of the default scenario.
struct Prepared {
  Scenario scenario;
  DecodingPlan plan;
  OperatingPoint point;
};

Prepared prepare(std::uint64_t seed, Scheme scheme = Scheme::kRsma,
                 const SystemConfig& cfg = default_config()) {
  Prepared p{generate_scenario(cfg, seed), {}, {}};
  p.plan = scenario_plan(p.scenario, scheme);
  p.point = initial_point(p.scenario, p.plan);
  SolveTrace t;
  REQUIRE(restore_feasibility(p.scenario, p.plan, p.point, SolverSettings{}, t));
  return p;
}

}  // namespace

TEST_CASE("settings validation") {
  SolverSettings s;
  CHECK_NOTHROW(s.validate());
  s.sca_tolerance = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SolverSettings{};
  s.max_outer_iterations = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("initial point plus restoration is feasible") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (Scheme s : {Scheme::kRsma, Scheme::kNoma, Scheme::kOma}) {
      const Prepared p = prepare(seed, s);
      const auto m = evaluate_plan(p.scenario.config,
                                   make_channels(p.scenario.config, p.point.uav, p.scenario.users),
                                   p.plan, p.point);
      CHECK(m.feasibility.max_residual() <= 1e-9);
    }
}

TEST_CASE("location program is tight at the reference and has 4K+1 restricted constraints") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Prepared p = prepare(seed);
    const LocationProgram lp = build_location_program(p.scenario, p.plan, p.point);
    const int K = p.scenario.config.num_users;
    CHECK(restricted_form_count(lp.program) == 4 * K + 1);
    CHECK_NOTHROW(lp.program.validate());
    // reference is feasible and the surrogate objective equals the true one
    CHECK(max_constraint(lp.program, lp.program.start) <= 1e-9);
    CHECK(-lp.program.objective.evaluate(lp.program.start) ==
          Approx(lp.reference_objective).epsilon(1e-12));

    const SolveResult r = solve_convex(lp.program, InteriorPointSettings{});
    REQUIRE(r.usable());
    CHECK(-r.objective >= lp.reference_objective - 1e-9);
    // restriction: at the solution the true SINRs cover the surrogate slacks
    OperatingPoint q = p.point;
    q.uav = r.x.segment(lp.z, 2);
    const auto m = evaluate_plan(p.scenario.config,
                                 make_channels(p.scenario.config, q.uav, p.scenario.users), p.plan, q);
    for (int j = 0; j < K; ++j) {
      double sinr = std::numeric_limits<double>::infinity();
      for (size_t l = 0; l < p.plan.links.size(); ++l)
        if (p.plan.links[l].slot == j) sinr = std::min(sinr, m.link_sinr(static_cast<Eigen::Index>(l)));
      CHECK(sinr >= lp.f_scale(j) * r.x(lp.f[j]) * (1 - 1e-6));
    }
    CHECK(-r.objective <= location_objective(m) + 1e-6);
  }
}

TEST_CASE("sca_location is monotone and feasible") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Prepared p = prepare(seed);
    const LocationResult r = sca_location(p.scenario, p.plan, p.point, SolverSettings{});
    CHECK(r.feasible);
    double last = -1.0;
    for (const auto& e : r.trace.entries) {
      CHECK(e.objective >= last - 1e-12);
      CHECK(e.residual <= 1e-9);
      last = e.objective;
    }
    for (int c = 0; c < 2; ++c) {
      CHECK(r.z(c) >= 0.0);
      CHECK(r.z(c) <= p.scenario.config.area_side);
    }
  }
}

TEST_CASE("single user below the UAV stays put") {
  SystemConfig cfg = parse_config("system: {num_users: 1}\nradar: {delta: 1.0e6}");
  Scenario sc = generate_scenario(cfg, 3);
  sc.users[0].position = {25.0, 25.0};
  const DecodingPlan plan = scenario_plan(sc, Scheme::kNoma);
  OperatingPoint p = initial_point(sc, plan);
  p.uav = {25.0, 25.0};
  const LocationResult r = sca_location(sc, plan, p, SolverSettings{});
  CHECK((r.z - Eigen::Vector2d(25.0, 25.0)).norm() <= 0.1);
  CHECK(r.trace.location_solves <= 2);

  // also from elsewhere it walks to the user
  p.uav = {5.0, 40.0};
  const LocationResult far = sca_location(sc, plan, p, SolverSettings{});
  CHECK((far.z - Eigen::Vector2d(25.0, 25.0)).norm() <= 1.0);
}

TEST_CASE("zero beamformers and zero thresholds leave the UAV at the start") {
  SystemConfig cfg = parse_config("system: {qos_bps_hz: 0}\nradar: {levels: [0]}");
  const Scenario sc = generate_scenario(cfg, 8);
  const DecodingPlan plan = scenario_plan(sc, Scheme::kRsma);
  OperatingPoint p;
  p.uav = {13.0, 31.0};
  p.beamformers = Eigen::MatrixXcd::Zero(cfg.num_antennas, cfg.num_users + 1);
  p.common_rates = Eigen::VectorXd::Zero(cfg.num_users);
  const LocationResult r = sca_location(sc, plan, p, SolverSettings{});
  CHECK(r.z == p.uav);
  CHECK(r.trace.stage(Stage::kLocation).empty());
}

TEST_CASE("beamforming program is tight at the rotated reference") {
  for (Scheme s : {Scheme::kRsma, Scheme::kNoma, Scheme::kOma})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Prepared p = prepare(seed, s);
      const ChannelSet ch = make_channels(p.scenario.config, p.point.uav, p.scenario.users);
      p.point.beamformers = rotate_beamformer(p.point.beamformers, ch);
      const BeamformingProgram bp = build_beamforming_program(p.scenario, ch, p.plan, p.point, {1.0, false});
      CHECK_NOTHROW(bp.program.validate());
      CHECK(max_constraint(bp.program, bp.program.start) <= 1e-9);
      const PlanMetrics m = evaluate_plan(p.scenario.config, ch, p.plan, p.point);
      CHECK(bp.numerator(bp.program.start, p.plan) == Approx(m.rate_sum).epsilon(1e-12));
      CHECK((bp.beamformers(bp.program.start) - p.point.beamformers).norm() == 0.0);
      if (s == Scheme::kRsma) {
        const int K = p.scenario.config.num_users;
        CHECK(bp.program.count_label("private_signal") == K);
        CHECK(bp.program.count_label("common_signal") == K);
        CHECK(bp.program.count_label("common_rate") == K);
        CHECK(bp.program.count_label("beampattern") == 1);
      }
    }
}

TEST_CASE("Dinkelbach loops are monotone and end at a fixed point") {
  for (Scheme s : {Scheme::kRsma, Scheme::kNoma, Scheme::kOma})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const Prepared p = prepare(seed, s);
      const ChannelSet ch = make_channels(p.scenario.config, p.point.uav, p.scenario.users);
      const SolverSettings settings;
      const BeamformingResult r = dinkelbach_beamforming(p.scenario, ch, p.plan, p.point, settings);
      REQUIRE(r.feasible);
      const auto entries = r.trace.stage(Stage::kDinkelbach);
      REQUIRE_FALSE(entries.empty());
      for (size_t i = 0; i < entries.size(); ++i) {
        const bool last_in_loop = i + 1 == entries.size() || entries[i + 1].loop != entries[i].loop;
        if (!last_in_loop) {
          CHECK(entries[i + 1].tau >= entries[i].tau * (1 - 1e-9));
          CHECK(std::abs(entries[i + 1].phi) <= std::abs(entries[i].phi) + 1e-9);
        } else {
          CHECK(std::abs(entries[i].phi) <= settings.dinkelbach_tolerance);
        }
      }
      CHECK(r.tau == Approx(r.energy_efficiency).epsilon(1e-4));
      double last = 0.0;
      for (const auto& e : r.trace.stage(Stage::kBeamforming)) {
        CHECK(e.ee > last);
        last = e.ee;
      }
    }
}

TEST_CASE("Dinkelbach restarted at a converged point keeps tau monotone") {
  // degenerate start: the interior-point solves come back inexact here
  for (std::uint64_t seed : {1, 6}) {
    const Scenario sc = generate_scenario(default_config(), seed);
    const SolverSettings settings;
    const AlternatingResult a = alternating_optimize(sc, Scheme::kRsma, settings);
    REQUIRE(a.feasible);
    const ChannelSet ch = make_channels(sc.config, a.point.uav, sc.users);
    const BeamformingResult r = dinkelbach_beamforming(sc, ch, a.plan, a.point, settings);
    REQUIRE(r.feasible);
    const auto entries = r.trace.stage(Stage::kDinkelbach);
    for (size_t i = 0; i < entries.size(); ++i) {
      if (i + 1 < entries.size() && entries[i + 1].iteration != 0)
        CHECK(entries[i + 1].tau >= entries[i].tau * (1 - 1e-12));
      else
        CHECK(std::abs(entries[i].phi) <= settings.dinkelbach_tolerance);
    }
    CHECK(r.energy_efficiency >= a.metrics.energy_efficiency - 1e-9);
  }
}

TEST_CASE("single user without radar goes maximum ratio") {
  const SystemConfig cfg = parse_config("system: {num_users: 1}\nradar: {delta: 1.0e6}");
  const Scenario sc = generate_scenario(cfg, 5);
  const DecodingPlan plan = scenario_plan(sc, Scheme::kNoma);
  OperatingPoint p = initial_point(sc, plan);
  p.beamformers.col(1) = Eigen::VectorXcd::Constant(cfg.num_antennas, cdouble(0.05, 0.0));
  const ChannelSet ch = make_channels(cfg, p.uav, sc.users);
  const BeamformingResult r = dinkelbach_beamforming(sc, ch, plan, p, SolverSettings{});
  const Eigen::VectorXcd x = r.point.beamformers.col(1);
  const Eigen::VectorXcd h = ch.h.col(0);
  const double cosine = std::abs(h.dot(x)) / (h.norm() * x.norm());
  CHECK(cosine == Approx(1.0).margin(1e-6));
}

TEST_CASE("alternating optimization is monotone, feasible and deterministic") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Scenario sc = generate_scenario(default_config(), seed);
    const AlternatingResult a = alternating_optimize(sc, Scheme::kRsma, SolverSettings{});
    const AlternatingResult b = alternating_optimize(sc, Scheme::kRsma, SolverSettings{});
    REQUIRE(a.feasible);
    CHECK(a.metrics.feasibility.max_residual() <= 1e-6);
    const auto outer = a.trace.stage(Stage::kOuter);
    for (size_t i = 1; i < outer.size(); ++i) CHECK(outer[i].ee >= outer[i - 1].ee - 1e-8);
    for (size_t i = 1; i < a.trace.entries.size(); ++i)
      CHECK(a.trace.entries[i].index > a.trace.entries[i - 1].index);
    CHECK(a.trace.converged);
    REQUIRE(a.trace.entries.size() == b.trace.entries.size());
    CHECK(a.metrics.energy_efficiency == b.metrics.energy_efficiency);
    CHECK(a.trace.convex_solves == b.trace.convex_solves);

    // feeding the converged point back moves EE by less than the tolerance
    const AlternatingResult again = alternating_optimize(sc, Scheme::kRsma, a.point, SolverSettings{});
    CHECK(again.metrics.energy_efficiency >= a.metrics.energy_efficiency - 1e-8);
    CHECK((again.metrics.energy_efficiency - a.metrics.energy_efficiency) /
              a.metrics.energy_efficiency <
          SolverSettings{}.outer_tolerance);
    // the independent oracle agrees with the model on the returned point
    CHECK(oracle_evaluate(sc, a.point.uav, a.point.beamformers, a.point.common_rates)
              .energy_efficiency == Approx(a.metrics.energy_efficiency).epsilon(1e-10));
  }
}
