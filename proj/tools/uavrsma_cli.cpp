// uavrsma: run experiment specs, budget sweeps and the oracle suite.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "uavrsma/harness.hpp"

namespace {

using namespace uavrsma;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> schemes;
  std::optional<int> max_iters;
  int seed_count = 0;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Run this single seed");
  cmd->add_option("--seeds", o.seed_count, "Run seeds 1..N");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--scheme", o.schemes, "RSMA, NOMA or OMA (repeatable)");
  cmd->add_option("--max-iters", o.max_iters, "Cap on outer iterations");
}

void apply(const Overrides& o, ExperimentSpec& spec) {
  if (o.seed) spec.seeds = {*o.seed};
  if (o.seed_count > 0) {
    spec.seeds.clear();
    for (int i = 1; i <= o.seed_count; ++i) spec.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  if (!o.out.empty()) spec.output_dir = o.out;
  if (!o.schemes.empty()) {
    spec.schemes.clear();
    for (const auto& s : o.schemes) {
      try {
        spec.schemes.push_back(parse_scheme(s));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("--scheme", e.what());
      }
    }
  }
  if (o.max_iters) {
    if (*o.max_iters < 1) throw ConfigError("--max-iters", "must be >= 1");
    spec.solver.max_outer_iterations = *o.max_iters;
  }
  spec.validate();
}

int report(const ExperimentReport& r) {
  fmt::print("{:>12} {:>6} {:>6} {:>12} {:>12} {:>9}\n", "sweep", "seed", "scheme", "ee",
             "power_w", "feasible");
  for (const auto& run : r.runs) {
    fmt::print("{:>12} {:>6} {:>6} {:>12.6f} {:>12.6f} {:>9}\n", format_number(run.sweep_value),
               run.seed, to_string(run.scheme), run.result.metrics.energy_efficiency,
               run.result.metrics.consumed_power,
               run.error.empty() ? (run.result.feasible ? "yes" : "no") : "error");
    if (!run.error.empty()) fmt::print(stderr, "  error: {}\n", run.error);
  }
  for (const auto& f : r.files) fmt::print("wrote {}\n", f);
  return r.any_infeasible() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV RSMA integrated sensing and communication optimizer"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o;
  std::string spec_path;
  auto* run = app.add_subcommand("run", "Run an experiment spec (YAML)");
  run->add_option("spec", spec_path, "Experiment file")->required();
  add_common(run, run_o);

  std::string config_path;
  double from = 23.0, to = 32.0, step = 3.0;
  bool no_continuation = false;
  auto* sweep = app.add_subcommand("sweep", "Sweep the power budget in dBm");
  sweep->add_option("--config", config_path, "Scenario file (YAML)");
  sweep->add_option("--from", from, "First budget, dBm");
  sweep->add_option("--to", to, "Last budget, dBm");
  sweep->add_option("--step", step, "Budget step, dB");
  sweep->add_flag("--no-continuation", no_continuation, "Start every budget from scratch");
  add_common(sweep, sweep_o);

  std::vector<std::uint64_t> val_seeds{1, 2, 3, 4, 5};
  long samples = 100000;
  double grid_step = 1.0;
  auto* validate = app.add_subcommand("validate", "Compare the solvers with brute-force oracles");
  validate->add_option("--seed", val_seeds, "Seeds (repeatable)");
  validate->add_option("--samples", samples, "Random samples per instance");
  validate->add_option("--grid-step", grid_step, "Lattice step in meters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      ExperimentSpec spec = load_experiment(spec_path);
      apply(run_o, spec);
      return report(run_experiment(spec));
    }
    if (*sweep) {
      if (!(step > 0.0) || to < from) throw ConfigError("--step", "need step > 0 and from <= to");
      ExperimentSpec spec;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError(config_path, "cannot open file");
        spec = parse_experiment(std::string(std::istreambuf_iterator<char>(in), {}));
      }
      spec.sweep_key = "system.p_max_dbm";
      spec.sweep_values.clear();
      for (double v = from; v <= to + 1e-9; v += step) spec.sweep_values.push_back(v);
      spec.continuation = !no_continuation;
      apply(sweep_o, spec);
      return report(run_experiment(spec));
    }
    if (*validate) {
      if (!(grid_step > 0.0) || samples < 1) throw ConfigError("--grid-step", "need step > 0, samples >= 1");
      bool ok = true;
      for (std::uint64_t seed : val_seeds) {
        const OracleCase c = run_oracle_case(seed, samples, grid_step, SolverSettings{});
        const bool pass = c.location_ok() && c.beamforming_ok();
        ok = ok && pass;
        fmt::print("seed {}: location {:.6f} vs grid {:.6f}; ee {:.6f} vs sampled {:.6f}  {}\n",
                   seed, c.sca_objective, c.grid_objective, c.dinkelbach_ee, c.sampler_ee,
                   pass ? "PASS" : "FAIL");
      }
      return ok ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
