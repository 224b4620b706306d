#pragma once

// The two convex subproblems (UAV placement with beamformers fixed, and
// beamforming with the UAV fixed), the loops that drive them, and the
// alternating outer algorithm.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavrsma/convex_program.hpp"
#include "uavrsma/decoding_plan.hpp"
#include "uavrsma/linearize.hpp"
#include "uavrsma/model.hpp"

namespace uavrsma {

struct SolverSettings {
  double sca_tolerance = 1e-4;          // relative objective change, location and beamforming SCA
  double dinkelbach_tolerance = 1e-4;   // |phi| at which the inner loop stops
  double outer_tolerance = 1e-4;        // relative EE change between outer iterations
  int max_sca_iterations = 50;
  int max_dinkelbach_iterations = 30;
  int max_outer_iterations = 30;
  int damping_limit = 20;               // halvings toward the reference before giving up
  double feasibility_tol = 1e-9;        // true-constraint residual accepted for a step
  InteriorPointSettings interior_point;

  /// Throws std::invalid_argument on a nonpositive tolerance or cap.
  void validate() const;
};

enum class Stage { kInit, kRestore, kLocation, kBeamforming, kDinkelbach, kOuter };

const char* to_string(Stage s);

struct TraceEntry {
  int index = 0;          // strictly increasing over the whole trace
  Stage stage = Stage::kInit;
  int outer = 0;          // outer (alternating) iteration
  int loop = 0;           // identifies one Dinkelbach inner loop
  int iteration = 0;      // iteration within the stage/loop
  double objective = 0.0; // stage objective (true sum rate for location, true EE otherwise)
  double tau = 0.0;
  double phi = 0.0;
  double residual = 0.0;  // max true-constraint residual
  int damping = 0;        // halvings applied before acceptance
  double wall_time = 0.0; // seconds since the start of the run
  double ee = 0.0;
  double power = 0.0;     // consumed transmit power
};

struct SolveTrace {
  std::vector<TraceEntry> entries;
  int convex_solves = 0;
  int location_solves = 0;
  int beamforming_solves = 0;
  bool converged = false;
  bool restoration_failed = false;
  std::vector<std::string> diagnostics;

  void add(TraceEntry e);
  void merge(const SolveTrace& other);
  [[nodiscard]] std::vector<TraceEntry> stage(Stage s) const;
};

// --- location subproblem -----------------------------------------------------

struct LocationProgram {
  ConvexProgram program;
  int z = 0;                         // offset of the 2-vector z
  std::vector<int> f;                // per slot
  std::vector<int> link_slack;       // per link: gamma (private) or eps (common)
  Eigen::VectorXd f_scale;           // f = f_scale * u
  Eigen::VectorXd link_scale;
  double reference_objective = 0.0;  // true objective at z^r
};

/// Objective of the placement problem: the weighted private sum rate.
double location_objective(const PlanMetrics& m);

/// Convex restriction of the placement problem around point.uav with the
/// beamformers and common rates of `point` held fixed. Requires exponent 2.
LocationProgram build_location_program(const Scenario& scenario, const DecodingPlan& plan,
                                       const OperatingPoint& point);

struct LocationResult {
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  double objective = 0.0;
  bool feasible = false;
  SolveTrace trace;
};

LocationResult sca_location(const Scenario& scenario, const DecodingPlan& plan,
                            const OperatingPoint& start, const SolverSettings& settings);

// --- beamforming subproblem --------------------------------------------------

struct BeamformingOptions {
  double tau = 0.0;
  bool restoration = false;  // minimize a QoS shortfall s instead of the Dinkelbach objective
};

struct BeamformingProgram {
  ConvexProgram program;
  std::vector<int> column_offset;  // per column of x, -1 when inactive
  int beta = -1;                   // offset of beta (RSMA only)
  std::vector<int> f;
  std::vector<int> link_slack;
  std::vector<int> link_theta;     // common links: scaled common SINR slack
  std::vector<int> target_error;
  int shortfall = -1;              // restoration only
  Eigen::VectorXd f_scale, link_scale, theta_scale;
  int num_antennas = 0;
  int num_users = 0;

  [[nodiscard]] Eigen::MatrixXcd beamformers(const Eigen::VectorXd& v) const;
  [[nodiscard]] Eigen::VectorXd common_rates(const Eigen::VectorXd& v) const;
  /// Surrogate numerator: sum(beta) + sum_j w_j log2(1 + f_j).
  [[nodiscard]] double numerator(const Eigen::VectorXd& v, const DecodingPlan& plan) const;
};

/// Convex restriction of the beamforming problem around `point` (which should
/// already be rotated). The objective is tau * consumed power minus the
/// surrogate rate sum.
BeamformingProgram build_beamforming_program(const Scenario& scenario, const ChannelSet& channels,
                                             const DecodingPlan& plan,
                                             const OperatingPoint& point,
                                             const BeamformingOptions& options);

struct BeamformingResult {
  OperatingPoint point;
  double energy_efficiency = 0.0;
  double tau = 0.0;          // final Dinkelbach ratio
  double phi = 0.0;          // final Dinkelbach residual
  bool feasible = false;
  SolveTrace trace;
};

BeamformingResult dinkelbach_beamforming(const Scenario& scenario, const ChannelSet& channels,
                                         const DecodingPlan& plan, const OperatingPoint& start,
                                         const SolverSettings& settings);

// --- initialization and the outer loop ----------------------------------------

Eigen::Vector2d user_centroid(const Scenario& scenario);

/// Plan from the channels seen at the user centroid; fixes the NOMA order
/// for the whole run.
DecodingPlan scenario_plan(const Scenario& scenario, Scheme scheme);

/// Centroid placement, equal-power private directions (regularized zero
/// forcing for RSMA, maximum ratio otherwise), radar-matching remainder and
/// an equal common-rate split.
OperatingPoint initial_point(const Scenario& scenario, const DecodingPlan& plan);

/// Repairs power and beampattern by rescaling, then QoS by SCA on the
/// shortfall. Returns false when QoS stays unattainable.
bool restore_feasibility(const Scenario& scenario, const DecodingPlan& plan,
                         OperatingPoint& point, const SolverSettings& settings,
                         SolveTrace& trace);

struct AlternatingResult {
  OperatingPoint point;
  DecodingPlan plan;
  PlanMetrics metrics;
  SolveTrace trace;
  bool feasible = false;
};

/// Uses scenario_plan() regardless of init.uav.
AlternatingResult alternating_optimize(const Scenario& scenario, Scheme scheme,
                                       const OperatingPoint& init, const SolverSettings& settings);
/// Same, starting from initial_point().
AlternatingResult alternating_optimize(const Scenario& scenario, Scheme scheme,
                                       const SolverSettings& settings);

}  // namespace uavrsma
