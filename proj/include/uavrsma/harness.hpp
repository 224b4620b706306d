#pragma once

// Configuration loading, seeded scenarios and budget sweeps with CSV export.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavrsma/baselines.hpp"
#include "uavrsma/model.hpp"
#include "uavrsma/subproblems.hpp"

namespace uavrsma {

/// Bad or missing configuration value. `key()` is the dotted path, e.g.
/// "system.noise_dbm".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message);
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// YAML documents with the sections `system`, `radar`, `solver` and
/// `experiment`; every key is optional. Power keys take a `_dbm` or `_w`
/// suffix, the radar tolerance `delta_db` or `delta`. See README.md.
SystemConfig parse_config(const std::string& text);
SystemConfig load_config(const std::string& path);
SolverSettings parse_solver_settings(const std::string& text);

/// Canonical text form (every field at 12 significant digits) and its
/// 64-bit FNV-1a hash, rendered as 16 hex digits.
std::string canonical_config(const SystemConfig& cfg);
std::string config_hash(const SystemConfig& cfg);

/// Users uniform in the square, alpha_k ~ CN(0,1), AoDs from the geometry
/// seen from the user centroid. Deterministic in (cfg, seed).
Scenario generate_scenario(const SystemConfig& cfg, std::uint64_t seed);

struct ExperimentSpec {
  std::string config_text;                 // YAML the per-run configs derive from
  std::string sweep_key = "system.p_max_dbm";
  std::vector<double> sweep_values{26.0};
  std::vector<Scheme> schemes{Scheme::kRsma, Scheme::kNoma, Scheme::kOma};
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "results";
  bool continuation = true;  // warm-start each run from the previous sweep value
  SolverSettings solver;

  /// Throws ConfigError on an empty sweep, duplicate seeds or no schemes.
  void validate() const;
  /// The configuration with `sweep_key` set to `value`.
  [[nodiscard]] SystemConfig config_for(double value) const;
};

ExperimentSpec parse_experiment(const std::string& text);
ExperimentSpec load_experiment(const std::string& path);

struct RunRecord {
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::kRsma;
  std::string config_hash;
  SchemeResult result;
  std::string error;  // non-empty when the run threw
};

struct ExperimentReport {
  std::vector<RunRecord> runs;  // sorted by sweep value, seed, scheme
  std::vector<std::string> files;
  [[nodiscard]] bool any_infeasible() const;
};

/// Runs every (sweep value, seed, scheme) combination. With continuation,
/// each (seed, scheme) chain walks the sorted sweep values and reuses the
/// previous optimum when it is still feasible. Independent chains run on
/// the OpenMP pool. Writes nothing when `write_files` is false.
ExperimentReport run_experiment(const ExperimentSpec& spec, bool write_files = true);

/// Small-instance comparison of the solvers against the brute-force oracles.
struct OracleCase {
  std::uint64_t seed = 0;
  bool ready = false;              // a feasible starting point was found
  double sca_objective = 0.0;      // sca_location true objective
  double grid_objective = 0.0;     // best lattice objective, same x and beta
  bool grid_found = false;
  double dinkelbach_ee = 0.0;      // dinkelbach_beamforming at the centroid
  double dinkelbach_oracle_ee = 0.0;  // same point, independent evaluation
  double sampler_ee = 0.0;
  bool sampler_found = false;
  [[nodiscard]] bool location_ok() const;     // >= 95% of the grid optimum
  [[nodiscard]] bool beamforming_ok() const;  // >= best sample minus 5%
};

/// K = 2, M = 2 instances of the default scenario, one per seed.
SystemConfig oracle_config();
OracleCase run_oracle_case(std::uint64_t seed, long samples, double grid_step,
                           const SolverSettings& settings);

/// printf-style "%.12g".
std::string format_number(double v);

}  // namespace uavrsma
