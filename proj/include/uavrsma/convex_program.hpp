#pragma once

// Solver-agnostic description of a smooth convex program and a primal-dual
// interior-point method that solves it.
//
// Every scalar function is an affine part plus a sum of convex atoms:
//   square      w * (a'v + b)^2            (second-order-cone representable)
//   exp2        w * 2^(a'v + b)            (exponential-cone representable)
//   neglog2    -w * log2(a'v + b)          (exponential-cone representable)
//   reciprocal  w / (a'v + b)              (rotated second-order cone)
// with w >= 0. Inequalities read f(v) <= 0, equalities a'v + b = 0.

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace uavrsma {

struct LinearExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinearExpr() = default;
  explicit LinearExpr(double c) : constant(c) {}

  LinearExpr& add(int index, double coeff) {
    if (coeff != 0.0) terms.emplace_back(index, coeff);
    return *this;
  }
  LinearExpr& add(const LinearExpr& other, double scale = 1.0);
  [[nodiscard]] double evaluate(const Eigen::VectorXd& v) const;
  [[nodiscard]] bool is_constant() const { return terms.empty(); }
};

enum class AtomKind { kSquare, kExp2, kNegLog2, kReciprocal };

struct Atom {
  AtomKind kind = AtomKind::kSquare;
  double weight = 1.0;
  LinearExpr arg;
};

struct ConvexFunction {
  LinearExpr linear;
  std::vector<Atom> atoms;
  std::string label;

  ConvexFunction& add_square(const LinearExpr& arg, double weight = 1.0);
  ConvexFunction& add_exp2(const LinearExpr& arg, double weight = 1.0);
  ConvexFunction& add_neglog2(const LinearExpr& arg, double weight = 1.0);
  ConvexFunction& add_reciprocal(const LinearExpr& arg, double weight = 1.0);

  /// Value, or +inf outside the domain of a log/reciprocal atom.
  [[nodiscard]] double evaluate(const Eigen::VectorXd& v) const;
  [[nodiscard]] bool in_domain(const Eigen::VectorXd& v) const;
  /// Adds weight * gradient into `grad` and hess_weight * Hessian into
  /// `hess` (hess_weight defaults to weight).
  void accumulate(const Eigen::VectorXd& v, double weight, Eigen::VectorXd& grad,
                  Eigen::MatrixXd* hess, double hess_weight = kSameWeight) const;

  static constexpr double kSameWeight = -1.0;
  [[nodiscard]] bool is_constant() const;
};

struct VariableBlock {
  std::string name;
  int offset = 0;
  int rows = 1;
  int cols = 1;
  bool complex = false;  // complex blocks hold interleaved (re, im) pairs

  [[nodiscard]] int size() const { return rows * cols * (complex ? 2 : 1); }
};

struct ConvexProgram {
  std::vector<VariableBlock> blocks;
  ConvexFunction objective;
  std::vector<ConvexFunction> inequalities;
  std::vector<LinearExpr> equalities;
  Eigen::VectorXd start;          // optional starting point (must lie in atom domains)
  std::string objective_model;    // how the objective was modeled

  int add_block(const std::string& name, int rows, int cols = 1, bool complex = false);
  [[nodiscard]] const VariableBlock& block(const std::string& name) const;
  [[nodiscard]] int num_variables() const;
  /// Number of inequalities whose label equals `label`.
  [[nodiscard]] int count_label(const std::string& label) const;
  /// Throws std::invalid_argument if any expression references an undeclared
  /// variable or an atom weight is negative.
  void validate() const;
};

enum class SolveStatus { kOptimal, kInaccurate, kInfeasible, kUnbounded, kNumericalFailure };

const char* to_string(SolveStatus s);

struct InteriorPointSettings {
  double feasibility_tol = 1e-8;
  double gap_tol = 1e-6;         // relative surrogate duality gap
  double abs_gap_tol = 1e-10;
  int max_iterations = 120;
  double mu = 10.0;
  double unbounded_threshold = 1e12;
};

struct SolveResult {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  double max_violation = 0.0;   // max_i f_i(x) in original units
  int iterations = 0;           // Newton steps including phase I

  [[nodiscard]] bool usable() const {
    return status == SolveStatus::kOptimal || status == SolveStatus::kInaccurate;
  }
};

/// Primal-dual interior-point method with a phase-I feasibility search.
/// Deterministic for identical inputs.
SolveResult solve_convex(const ConvexProgram& program,
                         const InteriorPointSettings& settings = InteriorPointSettings());

}  // namespace uavrsma
