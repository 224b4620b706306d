#include "uavrsma/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "uavrsma/oracle.hpp"
#include <json.hpp>
#include <omp.h>
#include <yaml-cpp/yaml.h>

namespace uavrsma {

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::runtime_error(key + ": " + message), key_(std::move(key)) {}

std::string format_number(double v) { return fmt::format("{:.12g}", v); }

namespace {

YAML::Node load_yaml(const std::string& text) {
  try {
    YAML::Node root = YAML::Load(text);
    if (!root.IsNull() && !root.IsMap()) throw ConfigError("<document>", "expected a mapping");
    return root;
  } catch (const YAML::Exception& e) {
    throw ConfigError("<document>", e.what());
  }
}

// One section of the document. Every key read is recorded; finish() rejects
// the rest.
class Section {
 public:
  Section(const YAML::Node& root, std::string name) : name_(std::move(name)) {
    if (root.IsMap() && root[name_]) {
      node_ = root[name_];
      if (!node_.IsMap() && !node_.IsNull()) throw ConfigError(name_, "expected a mapping");
    }
  }

  [[nodiscard]] std::string path(const std::string& key) const { return name_ + "." + key; }
  bool has(const std::string& key) {
    used_.insert(key);
    return node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return as_number(node_[key], path(key));
  }

  int integer(const std::string& key, int fallback) {
    const double v = number(key, fallback);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(path(key), "expected an integer");
    return static_cast<int>(v);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    try {
      return node_[key].as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path(key), "expected true or false");
    }
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    if (!node_[key].IsScalar()) throw ConfigError(path(key), "expected a string");
    return node_[key].as<std::string>();
  }

  // Scalar or sequence of numbers.
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const YAML::Node n = node_[key];
    std::vector<double> out;
    if (n.IsScalar()) {
      out.push_back(as_number(n, path(key)));
    } else if (n.IsSequence()) {
      for (size_t i = 0; i < n.size(); ++i)
        out.push_back(as_number(n[i], path(key) + "[" + std::to_string(i) + "]"));
    } else {
      throw ConfigError(path(key), "expected a number or a list of numbers");
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
    if (!has(key)) return fallback;
    const YAML::Node n = node_[key];
    std::vector<std::string> out;
    if (n.IsScalar()) {
      out.push_back(n.as<std::string>());
    } else if (n.IsSequence()) {
      for (size_t i = 0; i < n.size(); ++i) {
        if (!n[i].IsScalar())
          throw ConfigError(path(key) + "[" + std::to_string(i) + "]", "expected a string");
        out.push_back(n[i].as<std::string>());
      }
    } else {
      throw ConfigError(path(key), "expected a string or a list of strings");
    }
    return out;
  }

  // A power given as <base>_dbm or <base>_w.
  double power(const std::string& base, double fallback_w) {
    const bool dbm = has(base + "_dbm");
    const bool w = has(base + "_w");
    if (dbm && w) throw ConfigError(path(base + "_dbm"), "conflicts with " + path(base + "_w"));
    if (dbm) return dbm_to_watts(number(base + "_dbm", 0.0));
    if (w) {
      const double v = number(base + "_w", 0.0);
      if (!(v > 0.0)) throw ConfigError(path(base + "_w"), "must be > 0");
      return v;
    }
    return fallback_w;
  }

  void finish() const {
    if (!node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError(path(key), "unknown key");
    }
  }

 private:
  static double as_number(const YAML::Node& n, const std::string& where) {
    if (!n.IsScalar()) throw ConfigError(where, "expected a number");
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where, "expected a number, got '" + n.Scalar() + "'");
    }
  }

  YAML::Node node_;
  std::string name_;
  std::set<std::string> used_;
};

void check_sections(const YAML::Node& root) {
  if (!root.IsMap()) return;
  static const std::set<std::string> known{"system", "radar", "solver", "experiment"};
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (!known.count(key)) throw ConfigError(key, "unknown section");
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SystemConfig parse_config(const std::string& text) {
  const YAML::Node root = load_yaml(text);
  check_sections(root);
  SystemConfig cfg = default_config();

  Section sys(root, "system");
  cfg.num_antennas = sys.integer("num_antennas", cfg.num_antennas);
  cfg.num_users = sys.integer("num_users", cfg.num_users);
  cfg.spacing_ratio = sys.number("spacing_ratio", cfg.spacing_ratio);
  cfg.uav_height = sys.number("uav_height_m", cfg.uav_height);
  cfg.pathloss_exponent = sys.number("pathloss_exponent", cfg.pathloss_exponent);
  cfg.noise_power = sys.power("noise", cfg.noise_power);
  cfg.power_budget = sys.power("p_max", cfg.power_budget);
  cfg.dynamic_power = sys.number("dynamic_power_w", cfg.dynamic_power);
  cfg.static_power = sys.number("static_power_w", cfg.static_power);
  const double fixed = sys.power("fixed_power", dbm_to_watts(30.0));
  cfg.hover_power = fixed - cfg.circuit_power();
  if (sys.has("hover_power_w")) {
    if (sys.has("fixed_power_dbm") || sys.has("fixed_power_w"))
      throw ConfigError(sys.path("hover_power_w"), "conflicts with fixed_power_*");
    cfg.hover_power = sys.number("hover_power_w", cfg.hover_power);
  }
  if (!(cfg.hover_power > 0.0))
    throw ConfigError(sys.path("fixed_power_dbm"), "must exceed the circuit power M*P_dyn + P_sta");
  cfg.area_side = sys.number("area_side_m", cfg.area_side);
  const std::vector<double> qos = sys.numbers("qos_bps_hz", {1.0});
  if (qos.size() == 1) {
    cfg.qos_thresholds.assign(std::max(cfg.num_users, 0), qos[0]);
  } else if (static_cast<int>(qos.size()) == cfg.num_users) {
    cfg.qos_thresholds = qos;
  } else {
    throw ConfigError(sys.path("qos_bps_hz"), "needs 1 or num_users entries");
  }
  cfg.rng_seed = static_cast<std::uint64_t>(sys.integer("seed", static_cast<int>(cfg.rng_seed)));
  sys.finish();

  Section radar(root, "radar");
  const bool has_db = radar.has("delta_db");
  if (has_db && radar.has("delta")) throw ConfigError(radar.path("delta_db"), "conflicts with radar.delta");
  cfg.beampattern_tolerance = has_db ? db_to_linear(radar.number("delta_db", 0.0))
                                     : radar.number("delta", cfg.beampattern_tolerance);
  const std::vector<double> angles = radar.numbers("targets_deg", {40.0});
  const double ratio = radar.number("level_ratio", 0.5);
  const double ref = radar.power("reference_power", dbm_to_watts(20.0));
  const double auto_level = radar_level(std::max(cfg.num_antennas, 1), ratio, ref);
  const std::vector<double> levels = radar.numbers("levels", {});
  if (!levels.empty() && levels.size() != angles.size())
    throw ConfigError(radar.path("levels"), "needs one entry per target");
  cfg.radar_targets.clear();
  for (size_t i = 0; i < angles.size(); ++i)
    cfg.radar_targets.push_back(
        {angles[i] * std::numbers::pi / 180.0, levels.empty() ? auto_level : levels[i]});
  radar.finish();

  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("system", e.what());
  }
  return cfg;
}

SystemConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

SolverSettings parse_solver_settings(const std::string& text) {
  const YAML::Node root = load_yaml(text);
  check_sections(root);
  SolverSettings s;
  Section sec(root, "solver");
  s.sca_tolerance = sec.number("sca_tolerance", s.sca_tolerance);
  s.dinkelbach_tolerance = sec.number("dinkelbach_tolerance", s.dinkelbach_tolerance);
  s.outer_tolerance = sec.number("outer_tolerance", s.outer_tolerance);
  s.max_sca_iterations = sec.integer("max_sca_iterations", s.max_sca_iterations);
  s.max_dinkelbach_iterations = sec.integer("max_dinkelbach_iterations", s.max_dinkelbach_iterations);
  s.max_outer_iterations = sec.integer("max_outer_iterations", s.max_outer_iterations);
  s.damping_limit = sec.integer("damping_limit", s.damping_limit);
  s.feasibility_tol = sec.number("feasibility_tol", s.feasibility_tol);
  sec.finish();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("solver", e.what());
  }
  return s;
}

std::string canonical_config(const SystemConfig& c) {
  std::string out;
  auto put = [&](const char* k, double v) { out += fmt::format("{}={:.12g}\n", k, v); };
  put("num_antennas", c.num_antennas);
  put("num_users", c.num_users);
  put("spacing_ratio", c.spacing_ratio);
  put("uav_height", c.uav_height);
  put("pathloss_exponent", c.pathloss_exponent);
  put("noise_power", c.noise_power);
  put("power_budget", c.power_budget);
  put("hover_power", c.hover_power);
  put("dynamic_power", c.dynamic_power);
  put("static_power", c.static_power);
  put("beampattern_tolerance", c.beampattern_tolerance);
  put("area_side", c.area_side);
  for (double q : c.qos_thresholds) put("qos", q);
  for (const auto& t : c.radar_targets) {
    put("target_angle", t.angle);
    put("target_level", t.level);
  }
  return out;
}

std::string config_hash(const SystemConfig& cfg) {
  return fmt::format("{:016x}", fnv1a(canonical_config(cfg)));
}

Scenario generate_scenario(const SystemConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, cfg.area_side);
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  Scenario sc;
  sc.config = cfg;
  for (int k = 0; k < cfg.num_users; ++k) {
    UserTerminal u;
    const double x = pos(rng);
    const double y = pos(rng);
    u.position = {x, y};
    const double re = gauss(rng);
    const double im = gauss(rng);
    u.fading = {re, im};
    sc.users.push_back(u);
  }
  const Eigen::Vector2d c = user_centroid(sc);
  for (auto& u : sc.users) {
    const Eigen::Vector2d d = u.position - c;
    const double dist = std::sqrt(d.squaredNorm() + cfg.uav_height * cfg.uav_height);
    u.aod = std::asin(d.x() / dist);
  }
  return sc;
}

// --- experiments ------------------------------------------------------------------

void ExperimentSpec::validate() const {
  if (sweep_values.empty()) throw ConfigError("experiment.sweep_values", "must not be empty");
  if (schemes.empty()) throw ConfigError("experiment.schemes", "must not be empty");
  if (seeds.empty()) throw ConfigError("experiment.seeds", "must not be empty");
  std::set<std::uint64_t> s(seeds.begin(), seeds.end());
  if (s.size() != seeds.size()) throw ConfigError("experiment.seeds", "seeds must be distinct");
  std::set<double> v(sweep_values.begin(), sweep_values.end());
  if (v.size() != sweep_values.size())
    throw ConfigError("experiment.sweep_values", "values must be distinct");
  std::set<Scheme> sc(schemes.begin(), schemes.end());
  if (sc.size() != schemes.size()) throw ConfigError("experiment.schemes", "schemes must be distinct");
  const auto dot = sweep_key.find('.');
  if (dot == std::string::npos) throw ConfigError("experiment.sweep_key", "expected section.key");
  solver.validate();
}

SystemConfig ExperimentSpec::config_for(double value) const {
  YAML::Node root = load_yaml(config_text);
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  const auto dot = sweep_key.find('.');
  const std::string section = sweep_key.substr(0, dot);
  const std::string key = sweep_key.substr(dot + 1);
  if (!root[section] || root[section].IsNull()) root[section] = YAML::Node(YAML::NodeType::Map);
  YAML::Node sec = root[section];
  // Drop the other unit spelling of the swept quantity.
  auto drop = [&](const std::string& suffix, const std::string& other) {
    if (key.size() > suffix.size() && key.ends_with(suffix))
      sec.remove(key.substr(0, key.size() - suffix.size()) + other);
  };
  drop("_dbm", "_w");
  drop("_w", "_dbm");
  if (key == "delta") sec.remove("delta_db");
  if (key == "delta_db") sec.remove("delta");
  sec[key] = value;
  YAML::Emitter em;
  em.SetDoublePrecision(17);
  em << root;
  try {
    return parse_config(em.c_str());
  } catch (const ConfigError& e) {
    throw ConfigError(sweep_key, e.what());
  }
}

ExperimentSpec parse_experiment(const std::string& text) {
  const YAML::Node root = load_yaml(text);
  check_sections(root);
  ExperimentSpec spec;
  spec.config_text = text;
  spec.solver = parse_solver_settings(text);
  Section ex(root, "experiment");
  spec.sweep_key = ex.text("sweep_key", spec.sweep_key);
  spec.sweep_values = ex.numbers("sweep_values", spec.sweep_values);
  spec.schemes.clear();
  for (const std::string& s : ex.strings("schemes", {"RSMA", "NOMA", "OMA"})) {
    try {
      spec.schemes.push_back(parse_scheme(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(ex.path("schemes"), e.what());
    }
  }
  const bool has_list = ex.has("seeds");
  const bool has_count = ex.has("seed_count");
  if (has_list && has_count) throw ConfigError(ex.path("seeds"), "conflicts with experiment.seed_count");
  if (has_count) {
    const int n = ex.integer("seed_count", 1);
    if (n < 1) throw ConfigError(ex.path("seed_count"), "must be >= 1");
    spec.seeds.clear();
    for (int i = 1; i <= n; ++i) spec.seeds.push_back(static_cast<std::uint64_t>(i));
  } else if (has_list) {
    spec.seeds.clear();
    for (double s : ex.numbers("seeds", {})) {
      if (s < 0 || s != std::floor(s)) throw ConfigError(ex.path("seeds"), "seeds must be nonnegative integers");
      spec.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  spec.output_dir = ex.text("output_dir", spec.output_dir);
  spec.continuation = ex.boolean("continuation", spec.continuation);
  ex.finish();
  spec.validate();
  (void)spec.config_for(spec.sweep_values.front());  // surface config errors early
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) { return parse_experiment(read_file(path)); }

bool ExperimentReport::any_infeasible() const {
  return std::any_of(runs.begin(), runs.end(),
                     [](const RunRecord& r) { return !r.error.empty() || !r.result.feasible; });
}

namespace {

bool warm_start_usable(const Scenario& sc, const SchemeResult& prev) {
  if (prev.point.beamformers.rows() != sc.config.num_antennas ||
      prev.point.beamformers.cols() != sc.config.num_users + 1)
    return false;
  const DecodingPlan plan = scenario_plan(sc, prev.scheme);
  const PlanMetrics m = evaluate_plan(sc.config, make_channels(sc.config, prev.point.uav, sc.users),
                                      plan, prev.point);
  return m.feasibility.max_residual() <= 0.0;
}

void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << body;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec, bool write_files) {
  spec.validate();
  std::vector<double> values = spec.sweep_values;
  std::sort(values.begin(), values.end());
  std::vector<std::uint64_t> seeds = spec.seeds;
  std::sort(seeds.begin(), seeds.end());
  std::vector<Scheme> schemes = spec.schemes;
  std::sort(schemes.begin(), schemes.end());

  std::vector<SystemConfig> configs;
  std::vector<std::string> hashes;
  for (double v : values) {
    configs.push_back(spec.config_for(v));
    hashes.push_back(config_hash(configs.back()));
  }

  const int V = static_cast<int>(values.size());
  const int S = static_cast<int>(seeds.size());
  const int C = static_cast<int>(schemes.size());
  ExperimentReport report;
  report.runs.resize(static_cast<size_t>(V) * S * C);
  auto slot = [&](int vi, int si, int ci) -> RunRecord& {
    return report.runs[(static_cast<size_t>(vi) * S + si) * C + ci];
  };

  // One chain per (seed, scheme); the sweep inside a chain is sequential.
#pragma omp parallel for schedule(dynamic, 1)
  for (int chain = 0; chain < S * C; ++chain) {
    const int si = chain / C;
    const int ci = chain % C;
    const SchemeResult* prev = nullptr;
    for (int vi = 0; vi < V; ++vi) {
      RunRecord& r = slot(vi, si, ci);
      r.sweep_value = values[vi];
      r.seed = seeds[si];
      r.scheme = schemes[ci];
      r.config_hash = hashes[vi];
      r.result.scheme = schemes[ci];
      try {
        const Scenario sc = generate_scenario(configs[vi], seeds[si]);
        const bool warm = spec.continuation && prev && warm_start_usable(sc, *prev);
        r.result = solve_scheme(schemes[ci], sc, spec.solver, warm ? &prev->point : nullptr);
        if (r.result.feasible) prev = &r.result;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  }

  if (!write_files) return report;

  namespace fs = std::filesystem;
  const fs::path dir(spec.output_dir);
  fs::create_directories(dir);

  std::string trace =
      "sweep_value,seed,scheme,iteration,objective,tau,power_w,ee,feasible,stage,outer,loop,"
      "step,residual,damping,config_hash\n";
  std::string summary =
      "sweep_value,seed,scheme,ee,power_w,rate_sum,common_rate_sum,feasible,max_residual,"
      "outer_iterations,convex_solves,location_solves,beamforming_solves,converged,uav_x,uav_y,"
      "config_hash,error\n";
  for (const RunRecord& r : report.runs) {
    const SchemeResult& res = r.result;
    const std::string head =
        fmt::format("{},{},{}", format_number(r.sweep_value), r.seed, to_string(r.scheme));
    const int feasible = r.error.empty() && res.feasible ? 1 : 0;
    for (const TraceEntry& e : res.trace.entries)
      trace += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", head, e.index,
                           format_number(e.objective), format_number(e.tau),
                           format_number(e.power), format_number(e.ee), feasible,
                           to_string(e.stage), e.outer, e.loop, e.iteration,
                           format_number(e.residual), e.damping, r.config_hash);
    const double common = res.point.common_rates.size() ? res.point.common_rates.sum() : 0.0;
    const double residual = r.error.empty() && res.metrics.feasibility.qos.size()
                                ? res.metrics.feasibility.max_residual()
                                : 0.0;
    const int outer = static_cast<int>(res.trace.stage(Stage::kOuter).size()) - 1;
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    summary += fmt::format(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", head,
        format_number(res.metrics.energy_efficiency), format_number(res.metrics.consumed_power),
        format_number(res.metrics.rate_sum), format_number(common), feasible,
        format_number(residual), std::max(outer, 0), res.trace.convex_solves,
        res.trace.location_solves, res.trace.beamforming_solves, res.trace.converged ? 1 : 0,
        format_number(res.point.uav.x()), format_number(res.point.uav.y()), r.config_hash, error);
  }

  std::string aggregate =
      "sweep_value,scheme,runs,feasible_runs,ee_mean,ee_std,power_mean,power_std,config_hash\n";
  for (int vi = 0; vi < V; ++vi)
    for (int ci = 0; ci < C; ++ci) {
      std::vector<double> ee, pw;
      int feasible = 0;
      for (int si = 0; si < S; ++si) {
        const RunRecord& r = slot(vi, si, ci);
        if (!r.error.empty()) continue;
        ee.push_back(r.result.metrics.energy_efficiency);
        pw.push_back(r.result.metrics.consumed_power);
        feasible += r.result.feasible ? 1 : 0;
      }
      auto stats = [](const std::vector<double>& v) {
        if (v.empty()) return std::pair<double, double>{0.0, 0.0};
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
        return std::pair<double, double>{mean, std::sqrt(var)};
      };
      const auto [em, es] = stats(ee);
      const auto [pm, ps] = stats(pw);
      aggregate += fmt::format("{},{},{},{},{},{},{},{},{}\n", format_number(values[vi]),
                               to_string(schemes[ci]), ee.size(), feasible, format_number(em),
                               format_number(es), format_number(pm), format_number(ps),
                               hashes[vi]);
    }

  write_text(dir / "trace.csv", trace);
  write_text(dir / "summary.csv", summary);
  write_text(dir / "aggregate.csv", aggregate);

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["sweep_key"] = spec.sweep_key;
  manifest["sweep_values"] = values;
  std::vector<std::string> scheme_names;
  for (Scheme s : schemes) scheme_names.emplace_back(to_string(s));
  manifest["schemes"] = scheme_names;
  manifest["seeds"] = seeds;
  manifest["continuation"] = spec.continuation;
  manifest["solver"] = {{"sca_tolerance", spec.solver.sca_tolerance},
                        {"dinkelbach_tolerance", spec.solver.dinkelbach_tolerance},
                        {"outer_tolerance", spec.solver.outer_tolerance},
                        {"max_sca_iterations", spec.solver.max_sca_iterations},
                        {"max_dinkelbach_iterations", spec.solver.max_dinkelbach_iterations},
                        {"max_outer_iterations", spec.solver.max_outer_iterations},
                        {"damping_limit", spec.solver.damping_limit},
                        {"feasibility_tol", spec.solver.feasibility_tol}};
  nlohmann::ordered_json cfgs = nlohmann::ordered_json::array();
  for (int vi = 0; vi < V; ++vi)
    cfgs.push_back({{"sweep_value", format_number(values[vi])},
                    {"config_hash", hashes[vi]},
                    {"canonical", canonical_config(configs[vi])}});
  manifest["configs"] = cfgs;
  manifest["files"] = {{"trace.csv", "one row per trace entry"},
                       {"summary.csv", "one row per run"},
                       {"aggregate.csv", "mean and sample std across seeds"}};
  manifest["runs"] = report.runs.size();
  manifest["infeasible_runs"] =
      std::count_if(report.runs.begin(), report.runs.end(),
                    [](const RunRecord& r) { return !r.error.empty() || !r.result.feasible; });
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  for (const char* f : {"trace.csv", "summary.csv", "aggregate.csv", "manifest.json"})
    report.files.push_back((dir / f).string());
  return report;
}

// --- oracle suite -----------------------------------------------------------------

bool OracleCase::location_ok() const {
  return ready && grid_found && sca_objective >= 0.95 * grid_objective;
}

bool OracleCase::beamforming_ok() const {
  return ready && (!sampler_found || dinkelbach_ee >= 0.95 * sampler_ee);
}

SystemConfig oracle_config() {
  return parse_config("system: {num_antennas: 2, num_users: 2}\n");
}

OracleCase run_oracle_case(std::uint64_t seed, long samples, double grid_step,
                           const SolverSettings& settings) {
  OracleCase c;
  c.seed = seed;
  const Scenario sc = generate_scenario(oracle_config(), seed);
  const DecodingPlan plan = scenario_plan(sc, Scheme::kRsma);
  OperatingPoint p = initial_point(sc, plan);
  SolveTrace trace;
  c.ready = restore_feasibility(sc, plan, p, settings, trace);
  if (!c.ready) return c;

  const LocationResult loc = sca_location(sc, plan, p, settings);
  c.sca_objective = loc.objective;
  if (auto g = grid_search_location(sc, p.beamformers, p.common_rates, grid_step)) {
    c.grid_found = true;
    c.grid_objective = g->objective;
  }

  const ChannelSet ch = make_channels(sc.config, p.uav, sc.users);
  const BeamformingResult bf = dinkelbach_beamforming(sc, ch, plan, p, settings);
  c.dinkelbach_ee = bf.energy_efficiency;
  c.dinkelbach_oracle_ee =
      oracle_evaluate(sc, bf.point.uav, bf.point.beamformers, bf.point.common_rates)
          .energy_efficiency;
  if (auto r = random_feasible_sampler(sc, p.uav, samples, seed)) {
    c.sampler_found = true;
    c.sampler_ee = r->energy_efficiency;
  }
  return c;
}

}  // namespace uavrsma
