#include <catch_amalgamated.hpp>

#include <random>

#include "uavrsma/harness.hpp"
#include "uavrsma/linearize.hpp"
#include "uavrsma/oracle.hpp"

using namespace uavrsma;
using Catch::Approx;

namespace {

Scenario single_user_at_center() {
  Scenario sc = generate_scenario(parse_config("system: {num_users: 1, qos_bps_hz: 0}"), 1);
  sc.users[0].position = {25.0, 25.0};
  return sc;
}

Eigen::MatrixXcd random_x(std::mt19937_64& rng, int M, int cols, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXcd x(M, cols);
  for (int j = 0; j < cols; ++j)
    for (int m = 0; m < M; ++m) x(m, j) = {n(rng), n(rng)};
  return x;
}

}  // namespace

TEST_CASE("oracle physics agrees with the model") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 50; ++t) {
    const Scenario sc = generate_scenario(default_config(), 300 + t);
    const int K = sc.config.num_users;
    OperatingPoint p;
    p.uav = {50.0 * (t % 7) / 6.0, 50.0 * (t % 5) / 4.0};
    p.beamformers = random_x(rng, sc.config.num_antennas, K + 1, 0.03);
    p.common_rates = Eigen::VectorXd::Constant(K, 0.05 * (t % 4));
    const ChannelSet ch = make_channels(sc.config, p.uav, sc.users);
    const Metrics m = evaluate_metrics(sc.config, ch, p);
    const FeasibilityReport f = check_feasibility(sc.config, ch, p);
    const OracleEvaluation o = oracle_evaluate(sc, p.uav, p.beamformers, p.common_rates);
    CHECK(o.energy_efficiency == Approx(m.energy_efficiency).epsilon(1e-12));
    CHECK(o.min_common_rate == Approx(m.rates.min_common).epsilon(1e-12));
    CHECK(o.private_sum_rate == Approx(m.rates.private_.sum()).epsilon(1e-12));
    CHECK(o.max_residual == Approx(f.max_residual()).epsilon(1e-10).margin(1e-12));
  }
}

TEST_CASE("grid search finds the single user and is exhaustive") {
  const Scenario sc = single_user_at_center();
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(sc.config.num_antennas, 2);
  x.col(1) = channel_vector(sc.config, {25.0, 25.0}, sc.users[0]).normalized() * 0.3;
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
  const auto fine = grid_search_location(sc, x, beta, 1.0, Execution::kSerial);
  REQUIRE(fine);
  CHECK((fine->z - Eigen::Vector2d(25.0, 25.0)).norm() <= 1.0);
  CHECK(fine->evaluated == 51 * 51);

  const auto par = grid_search_location(sc, x, beta, 1.0, Execution::kParallel);
  REQUIRE(par);
  CHECK(par->z == fine->z);
  CHECK(par->objective == fine->objective);
  CHECK(par->feasible == fine->feasible);

  // the 2 m lattice is a subset of the 1 m lattice
  const auto coarse = grid_search_location(sc, x, beta, 2.0);
  REQUIRE(coarse);
  CHECK(fine->objective >= coarse->objective);
  CHECK_THROWS_AS(grid_search_location(sc, x, beta, 0.0), std::invalid_argument);
}

TEST_CASE("grid search is symmetric for mirrored users") {
  Scenario sc = generate_scenario(parse_config("system: {num_users: 2, qos_bps_hz: 0}"), 4);
  sc.users[0].position = {15.0, 25.0};
  sc.users[1].position = {35.0, 25.0};
  sc.users[1].fading = sc.users[0].fading;
  sc.users[0].aod = sc.users[1].aod = 0.2;
  std::mt19937_64 rng(1);
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(sc.config.num_antennas, 3);
  x.col(1) = random_x(rng, sc.config.num_antennas, 1, 0.1);
  x.col(2) = x.col(1);
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(2);
  const auto best = grid_search_location(sc, x, beta, 1.0);
  REQUIRE(best);
  const Eigen::Vector2d mirror(50.0 - best->z.x(), best->z.y());
  CHECK(oracle_evaluate(sc, mirror, x, beta).private_sum_rate ==
        Approx(best->objective).epsilon(1e-12));
}

TEST_CASE("oracles report an empty result when nothing is feasible") {
  Scenario sc = generate_scenario(parse_config("system: {num_antennas: 2, num_users: 2, qos_bps_hz: 1000}"), 3);
  const Eigen::MatrixXcd x = Eigen::MatrixXcd::Constant(2, 3, cdouble(0.1, 0.0));
  CHECK_FALSE(grid_search_location(sc, x, Eigen::VectorXd::Zero(2), 5.0));
  CHECK_FALSE(random_feasible_sampler(sc, {25.0, 25.0}, 200, 1));
  CHECK_THROWS_AS(random_feasible_sampler(sc, {25.0, 25.0}, 0, 1), std::invalid_argument);
}

TEST_CASE("sampler is deterministic and its best sample checks out") {
  const Scenario sc = generate_scenario(oracle_config(), 2);
  const Eigen::Vector2d z = user_centroid(sc);
  const auto a = random_feasible_sampler(sc, z, 20000, 7, Execution::kSerial);
  const auto b = random_feasible_sampler(sc, z, 20000, 7, Execution::kParallel);
  const auto c = random_feasible_sampler(sc, z, 20000, 7);
  REQUIRE(a);
  REQUIRE(b);
  REQUIRE(c);
  CHECK(a->energy_efficiency == b->energy_efficiency);
  CHECK(a->sample_index == b->sample_index);
  CHECK(a->feasible == b->feasible);
  CHECK(b->energy_efficiency == c->energy_efficiency);

  const OracleEvaluation e = oracle_evaluate(sc, z, a->x, a->beta);
  CHECK(e.energy_efficiency == a->energy_efficiency);
  CHECK(e.max_residual <= 0.0);
  CHECK(a->x.squaredNorm() <= sc.config.power_budget * (1 + 1e-12));
  CHECK(a->beta.minCoeff() >= 0.0);
  CHECK(a->beta.sum() <= e.min_common_rate + 1e-12);
}

TEST_CASE("finite difference check") {
  SECTION("affine function matches exactly") {
    AffineSurrogate s;
    s.reference_point = Eigen::Vector3d(1.0, -2.0, 0.5);
    s.gradient = Eigen::Vector3d(3.0, 0.0, -1.0);
    s.value_at_ref = 2.0 + s.gradient.dot(s.reference_point);
    const auto r = finite_difference_check(
        [&](const Eigen::VectorXd& v) { return 2.0 + s.gradient.dot(v); }, s, 1e-5);
    CHECK(r.value_gap <= 1e-14);
    CHECK(r.max_grad_relerr <= 1e-10);
    CHECK(r.passed());
  }
  SECTION("quadratic and its tangent") {
    const Eigen::Vector2d v0(0.7, -1.3);
    auto f = [](const Eigen::VectorXd& v) { return v.squaredNorm() + v(0) * v(1); };
    AffineSurrogate s;
    s.reference_point = v0;
    s.value_at_ref = f(v0);
    s.gradient = Eigen::Vector2d(2 * v0(0) + v0(1), 2 * v0(1) + v0(0));
    const auto r = finite_difference_check(f, s, 1e-5);
    CHECK(r.value_gap == 0.0);
    CHECK(r.max_grad_relerr <= 1e-6);
  }
  SECTION("a wrong gradient fails") {
    AffineSurrogate s;
    s.reference_point = Eigen::Vector2d(1.0, 1.0);
    s.value_at_ref = 2.0;
    s.gradient = Eigen::Vector2d(2.0, 2.1);
    CHECK_FALSE(finite_difference_check([](const Eigen::VectorXd& v) { return v.squaredNorm(); }, s,
                                        1e-5)
                    .passed());
  }
  SECTION("beampattern MSE in x") {
    std::mt19937_64 rng(9);
    const SystemConfig cfg = default_config();
    for (int t = 0; t < 10; ++t) {
      const Eigen::MatrixXcd x = random_x(rng, cfg.num_antennas, cfg.num_users + 1, 0.05);
      const AffineSurrogate s = beampattern_surrogate_x(x, cfg.radar_targets, cfg.spacing_ratio);
      const auto r = finite_difference_check(
          [&](const Eigen::VectorXd& v) {
            return beampattern_mse(devectorize(v, x.rows(), x.cols()), cfg.radar_targets,
                                   cfg.spacing_ratio);
          },
          s, 1e-6);
      CHECK(r.passed());
    }
  }
  CHECK_THROWS_AS(finite_difference_check([](const Eigen::VectorXd&) { return 0.0; },
                                          AffineSurrogate{}, 0.0),
                  std::invalid_argument);
}
