#include "uavrsma/convex_program.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace uavrsma {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = std::numbers::ln2;

void accumulate_outer(const LinearExpr& a, double w, Eigen::MatrixXd& hess) {
  for (const auto& [i, ci] : a.terms)
    for (const auto& [j, cj] : a.terms) hess(i, j) += w * ci * cj;
}

void accumulate_linear(const LinearExpr& a, double w, Eigen::VectorXd& grad) {
  for (const auto& [i, c] : a.terms) grad(i) += w * c;
}

}  // namespace

// --- expressions ------------------------------------------------------------

LinearExpr& LinearExpr::add(const LinearExpr& other, double scale) {
  for (const auto& [i, c] : other.terms) add(i, scale * c);
  constant += scale * other.constant;
  return *this;
}

double LinearExpr::evaluate(const Eigen::VectorXd& v) const {
  double s = constant;
  for (const auto& [i, c] : terms) s += c * v(i);
  return s;
}

ConvexFunction& ConvexFunction::add_square(const LinearExpr& arg, double weight) {
  atoms.push_back({AtomKind::kSquare, weight, arg});
  return *this;
}
ConvexFunction& ConvexFunction::add_exp2(const LinearExpr& arg, double weight) {
  atoms.push_back({AtomKind::kExp2, weight, arg});
  return *this;
}
ConvexFunction& ConvexFunction::add_neglog2(const LinearExpr& arg, double weight) {
  atoms.push_back({AtomKind::kNegLog2, weight, arg});
  return *this;
}
ConvexFunction& ConvexFunction::add_reciprocal(const LinearExpr& arg, double weight) {
  atoms.push_back({AtomKind::kReciprocal, weight, arg});
  return *this;
}

bool ConvexFunction::is_constant() const {
  if (!linear.is_constant()) return false;
  return std::all_of(atoms.begin(), atoms.end(),
                     [](const Atom& a) { return a.arg.is_constant() || a.weight == 0.0; });
}

bool ConvexFunction::in_domain(const Eigen::VectorXd& v) const {
  for (const auto& a : atoms) {
    if (a.kind == AtomKind::kNegLog2 || a.kind == AtomKind::kReciprocal) {
      if (!(a.arg.evaluate(v) > 0.0)) return false;
    }
  }
  return true;
}

double ConvexFunction::evaluate(const Eigen::VectorXd& v) const {
  double f = linear.evaluate(v);
  for (const auto& a : atoms) {
    const double s = a.arg.evaluate(v);
    switch (a.kind) {
      case AtomKind::kSquare: f += a.weight * s * s; break;
      case AtomKind::kExp2: f += a.weight * std::exp2(s); break;
      case AtomKind::kNegLog2:
        if (!(s > 0.0)) return kInf;
        f -= a.weight * std::log2(s);
        break;
      case AtomKind::kReciprocal:
        if (!(s > 0.0)) return kInf;
        f += a.weight / s;
        break;
    }
  }
  return f;
}

void ConvexFunction::accumulate(const Eigen::VectorXd& v, double weight, Eigen::VectorXd& grad,
                                Eigen::MatrixXd* hess, double hess_weight) const {
  if (hess_weight == kSameWeight) hess_weight = weight;
  accumulate_linear(linear, weight, grad);
  for (const auto& a : atoms) {
    const double s = a.arg.evaluate(v);
    const double w = weight * a.weight;
    double d1 = 0.0;
    double d2 = 0.0;
    switch (a.kind) {
      case AtomKind::kSquare: d1 = 2.0 * s; d2 = 2.0; break;
      case AtomKind::kExp2: {
        const double e = std::exp2(s);
        d1 = kLn2 * e;
        d2 = kLn2 * kLn2 * e;
        break;
      }
      case AtomKind::kNegLog2:
        d1 = -1.0 / (s * kLn2);
        d2 = 1.0 / (s * s * kLn2);
        break;
      case AtomKind::kReciprocal:
        d1 = -1.0 / (s * s);
        d2 = 2.0 / (s * s * s);
        break;
    }
    accumulate_linear(a.arg, w * d1, grad);
    if (hess != nullptr) accumulate_outer(a.arg, hess_weight * a.weight * d2, *hess);
  }
}

// --- program ----------------------------------------------------------------

int ConvexProgram::add_block(const std::string& name, int rows, int cols, bool complex) {
  VariableBlock b;
  b.name = name;
  b.offset = num_variables();
  b.rows = rows;
  b.cols = cols;
  b.complex = complex;
  blocks.push_back(b);
  return b.offset;
}

const VariableBlock& ConvexProgram::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw std::out_of_range("ConvexProgram: no variable block named " + name);
}

int ConvexProgram::num_variables() const {
  int n = 0;
  for (const auto& b : blocks) n += b.size();
  return n;
}

int ConvexProgram::count_label(const std::string& label) const {
  return static_cast<int>(std::count_if(inequalities.begin(), inequalities.end(),
                                        [&](const ConvexFunction& f) { return f.label == label; }));
}

void ConvexProgram::validate() const {
  const int n = num_variables();
  auto check_expr = [n](const LinearExpr& e) {
    for (const auto& [i, c] : e.terms)
      if (i < 0 || i >= n)
        throw std::invalid_argument("ConvexProgram: expression references undeclared variable");
  };
  auto check_fn = [&](const ConvexFunction& f) {
    check_expr(f.linear);
    for (const auto& a : f.atoms) {
      if (a.weight < 0.0) throw std::invalid_argument("ConvexProgram: negative atom weight");
      check_expr(a.arg);
    }
  };
  check_fn(objective);
  for (const auto& f : inequalities) check_fn(f);
  for (const auto& e : equalities) check_expr(e);
  if (start.size() != 0 && start.size() != n)
    throw std::invalid_argument("ConvexProgram: start point has wrong dimension");
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInaccurate: return "inaccurate";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

// --- primal-dual interior point ---------------------------------------------

namespace {

/// Normalized problem seen by the Newton iterations.
struct Problem {
  int n = 0;
  ConvexFunction objective;
  double objective_scale = 1.0;
  std::vector<ConvexFunction> ineq;
  std::vector<double> ineq_scale;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  [[nodiscard]] int m() const { return static_cast<int>(ineq.size()); }
  [[nodiscard]] int p() const { return static_cast<int>(A.rows()); }

  [[nodiscard]] bool values(const Eigen::VectorXd& v, Eigen::VectorXd& f) const {
    f.resize(m());
    for (int i = 0; i < m(); ++i) {
      const double fi = ineq[i].evaluate(v);
      if (!std::isfinite(fi)) return false;
      f(i) = ineq_scale[i] * fi;
    }
    return true;
  }
};

struct PdOutcome {
  Eigen::VectorXd v;
  Eigen::VectorXd lambda;
  int iterations = 0;
  bool converged = false;
  bool stopped_early = false;
  bool unbounded = false;
  bool failed = false;
  double residual_pri = 0.0;
};

struct PdState {
  Eigen::VectorXd v, lambda, nu;
};

double residual_norm(const Problem& pb, const PdState& s, double t, Eigen::VectorXd* fvals,
                     Eigen::VectorXd* r_dual_out, Eigen::VectorXd* r_pri_out) {
  Eigen::VectorXd f;
  if (!pb.values(s.v, f)) return kInf;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(pb.n);
  pb.objective.accumulate(s.v, pb.objective_scale, grad, nullptr);
  for (int i = 0; i < pb.m(); ++i)
    pb.ineq[i].accumulate(s.v, pb.ineq_scale[i] * s.lambda(i), grad, nullptr);
  if (pb.p() > 0) grad += pb.A.transpose() * s.nu;
  Eigen::VectorXd r_cent = -s.lambda.cwiseProduct(f).array() - 1.0 / t;
  Eigen::VectorXd r_pri = pb.p() > 0 ? Eigen::VectorXd(pb.A * s.v - pb.b) : Eigen::VectorXd();
  if (fvals) *fvals = f;
  if (r_dual_out) *r_dual_out = grad;
  if (r_pri_out) *r_pri_out = r_pri;
  double sq = grad.squaredNorm() + r_cent.squaredNorm();
  if (pb.p() > 0) sq += r_pri.squaredNorm();
  return std::sqrt(sq);
}

PdOutcome primal_dual(const Problem& pb, const Eigen::VectorXd& v0,
                      const InteriorPointSettings& st,
                      const std::function<bool(const Eigen::VectorXd&)>& stop_early) {
  const int n = pb.n;
  const int m = pb.m();
  const int p = pb.p();
  PdState s;
  s.v = v0;
  s.nu = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd f;
  PdOutcome out;
  if (!pb.values(s.v, f) || (m > 0 && f.maxCoeff() >= 0.0)) {
    out.failed = true;
    out.v = v0;
    return out;
  }
  s.lambda = (-f).cwiseInverse();

  const double alpha = 0.01;
  const double beta = 0.5;
  Eigen::MatrixXd H(n, n);
  Eigen::MatrixXd Df(m, n);
  Eigen::VectorXd grad0(n);

  for (int it = 0; it < st.max_iterations; ++it) {
    out.iterations = it + 1;
    if (!pb.values(s.v, f)) {
      out.failed = true;
      break;
    }
    const double gap = m > 0 ? -f.dot(s.lambda) : 0.0;
    const double t = m > 0 ? st.mu * m / gap : 1.0;

    // Derivatives.
    H.setZero();
    grad0.setZero();
    pb.objective.accumulate(s.v, pb.objective_scale, grad0, &H);
    const double f0 = pb.objective_scale * pb.objective.evaluate(s.v);
    Eigen::VectorXd r_dual = grad0;
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd gi = Eigen::VectorXd::Zero(n);
      pb.ineq[i].accumulate(s.v, pb.ineq_scale[i], gi, &H, pb.ineq_scale[i] * s.lambda(i));
      Df.row(i) = gi.transpose();
    }
    if (m > 0) r_dual += Df.transpose() * s.lambda;
    if (p > 0) r_dual += pb.A.transpose() * s.nu;
    Eigen::VectorXd r_pri = p > 0 ? Eigen::VectorXd(pb.A * s.v - pb.b) : Eigen::VectorXd();
    const double pri_norm = p > 0 ? r_pri.norm() : 0.0;
    out.residual_pri = pri_norm;

    if (!std::isfinite(f0) || s.v.cwiseAbs().maxCoeff() > st.unbounded_threshold ||
        f0 < -st.unbounded_threshold) {
      out.unbounded = true;
      break;
    }
    if (stop_early && pri_norm <= st.feasibility_tol && stop_early(s.v)) {
      out.stopped_early = true;
      break;
    }
    const double gap_target = std::max(st.abs_gap_tol, st.gap_tol * std::max(1.0, std::abs(f0)));
    if (pri_norm <= st.feasibility_tol && r_dual.norm() <= st.feasibility_tol * std::max(1.0, std::abs(f0)) &&
        gap <= gap_target) {
      out.converged = true;
      break;
    }

    Eigen::VectorXd r_cent = -s.lambda.cwiseProduct(f).array() - 1.0 / t;
    Eigen::VectorXd rhs = -r_dual;
    if (m > 0) {
      const Eigen::VectorXd d = s.lambda.cwiseQuotient(-f);
      H.noalias() += Df.transpose() * d.asDiagonal() * Df;
      rhs -= Df.transpose() * r_cent.cwiseQuotient(f);
    }
    const double reg = 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    Eigen::VectorXd dv(n);
    Eigen::VectorXd dnu = Eigen::VectorXd::Zero(p);
    if (p == 0) {
      H.diagonal().array() += reg;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      dv = ldlt.solve(rhs);
    } else {
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + p, n + p);
      K.topLeftCorner(n, n) = H;
      K.topLeftCorner(n, n).diagonal().array() += reg;
      K.topRightCorner(n, p) = pb.A.transpose();
      K.bottomLeftCorner(p, n) = pb.A;
      K.bottomRightCorner(p, p).diagonal().array() -= reg;
      Eigen::VectorXd full(n + p);
      full << rhs, -r_pri;
      Eigen::VectorXd sol = K.partialPivLu().solve(full);
      dv = sol.head(n);
      dnu = sol.tail(p);
    }
    if (!dv.allFinite()) {
      out.failed = true;
      break;
    }
    Eigen::VectorXd dlambda(m);
    if (m > 0) dlambda = (r_cent - s.lambda.cwiseProduct(Df * dv)).cwiseQuotient(f);

    // Step length: keep lambda positive, f negative, then sufficient decrease.
    double step = 1.0;
    for (int i = 0; i < m; ++i)
      if (dlambda(i) < 0.0) step = std::min(step, -s.lambda(i) / dlambda(i));
    step *= 0.99;
    const double r0 = residual_norm(pb, s, t, nullptr, nullptr, nullptr);
    PdState trial;
    Eigen::VectorXd ftrial;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial.v = s.v + step * dv;
      trial.lambda = s.lambda + step * dlambda;
      trial.nu = s.nu + step * dnu;
      if (pb.objective.in_domain(trial.v) && pb.values(trial.v, ftrial) &&
          (m == 0 || ftrial.maxCoeff() < 0.0)) {
        const double r1 = residual_norm(pb, trial, t, nullptr, nullptr, nullptr);
        if (r1 <= (1.0 - alpha * step) * r0) {
          accepted = true;
          break;
        }
      }
      step *= beta;
    }
    if (!accepted) {
      out.failed = true;
      break;
    }
    s = trial;
  }
  out.v = s.v;
  out.lambda = s.lambda;
  return out;
}

// Certificate for slow divergence: the progress direction is a feasible ray
// along which the objective falls below -threshold.
bool improving_ray(const Problem& pb, const Eigen::VectorXd& from, const Eigen::VectorXd& to,
                   const InteriorPointSettings& st) {
  const Eigen::VectorXd d = to - from;
  if (d.norm() == 0.0) return false;
  const Eigen::VectorXd far = to + (st.unbounded_threshold / d.norm()) * d;
  Eigen::VectorXd f;
  if (!pb.values(far, f) || (pb.m() > 0 && f.maxCoeff() > 0.0)) return false;
  if (pb.p() > 0 && (pb.A * far - pb.b).norm() > st.feasibility_tol * st.unbounded_threshold)
    return false;
  const double obj = pb.objective.evaluate(far);
  return std::isfinite(obj) && obj < -st.unbounded_threshold * 1e-3;
}

}  // namespace

SolveResult solve_convex(const ConvexProgram& program, const InteriorPointSettings& settings) {
  program.validate();
  const int n = program.num_variables();
  SolveResult result;
  Eigen::VectorXd v0 = program.start.size() == n ? program.start : Eigen::VectorXd::Zero(n);
  result.x = v0;

  if (!program.objective.in_domain(v0)) throw std::invalid_argument("solve_convex: start outside objective domain");

  Problem pb;
  pb.n = n;
  pb.objective = program.objective;
  {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    pb.objective.accumulate(v0, 1.0, g, nullptr);
    pb.objective_scale = 1.0 / std::max(1.0, g.norm());
  }
  for (const auto& fn : program.inequalities) {
    if (!fn.in_domain(v0)) throw std::invalid_argument("solve_convex: start outside constraint domain");
    if (fn.is_constant()) {
      if (fn.evaluate(v0) > settings.feasibility_tol) {
        result.status = SolveStatus::kInfeasible;
        result.max_violation = fn.evaluate(v0);
        return result;
      }
      continue;
    }
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    fn.accumulate(v0, 1.0, g, nullptr);
    pb.ineq.push_back(fn);
    pb.ineq_scale.push_back(1.0 / std::max(1.0, g.norm()));
  }
  const int p = static_cast<int>(program.equalities.size());
  pb.A = Eigen::MatrixXd::Zero(p, n);
  pb.b = Eigen::VectorXd::Zero(p);
  for (int r = 0; r < p; ++r) {
    const auto& e = program.equalities[r];
    for (const auto& [i, c] : e.terms) pb.A(r, i) += c;
    pb.b(r) = -e.constant;
    const double nr = std::max(1.0, pb.A.row(r).norm());
    pb.A.row(r) /= nr;
    pb.b(r) /= nr;
  }

  const int m = pb.m();
  Eigen::VectorXd f;
  if (!pb.values(v0, f)) throw std::invalid_argument("solve_convex: start outside constraint domain");
  int iterations = 0;
  Eigen::VectorXd start = v0;

  // Phase I: minimize s subject to f_i(v) <= s, s >= -1.
  if (m > 0 && f.maxCoeff() >= -1e-9) {
    Problem ph;
    ph.n = n + 1;
    ph.objective.linear.add(n, 1.0);
    ph.objective_scale = 1.0;
    for (int i = 0; i < m; ++i) {
      ConvexFunction g = pb.ineq[i];
      g.linear.add(n, -1.0 / pb.ineq_scale[i]);
      ph.ineq.push_back(std::move(g));
      ph.ineq_scale.push_back(pb.ineq_scale[i]);
    }
    ConvexFunction floor_fn;
    floor_fn.linear.add(n, -1.0);
    floor_fn.linear.constant = -1.0;
    ph.ineq.push_back(floor_fn);
    ph.ineq_scale.push_back(1.0);
    ph.A = Eigen::MatrixXd::Zero(p, n + 1);
    if (p > 0) ph.A.leftCols(n) = pb.A;
    ph.b = pb.b;
    Eigen::VectorXd w0(n + 1);
    w0 << v0, std::max(f.maxCoeff(), -0.5) + 1.0;
    InteriorPointSettings st1 = settings;
    st1.gap_tol = 1e-9;
    st1.abs_gap_tol = 1e-11;
    auto early = [n](const Eigen::VectorXd& w) { return w(n) <= -1e-3; };
    PdOutcome ph1 = primal_dual(ph, w0, st1, early);
    iterations += ph1.iterations;
    const double s_star = ph1.v(n);
    if (ph1.unbounded) {
      result.status = SolveStatus::kNumericalFailure;
      result.iterations = iterations;
      return result;
    }
    if (s_star > settings.feasibility_tol || ph1.residual_pri > 1e-6) {
      result.status = SolveStatus::kInfeasible;
      result.iterations = iterations;
      result.x = ph1.v.head(n);
      result.max_violation = s_star;
      return result;
    }
    start = ph1.v.head(n);
    if (s_star > -1e-9) {
      // Feasible set is (nearly) without interior: relax by a hair.
      const double relax = std::max(s_star, 0.0) + 1e-9;
      for (int i = 0; i < m; ++i) pb.ineq[i].linear.constant -= relax / pb.ineq_scale[i];
    }
  }

  PdOutcome ph2 = primal_dual(pb, start, settings, nullptr);
  iterations += ph2.iterations;
  result.iterations = iterations;
  result.x = ph2.v;
  result.objective = program.objective.evaluate(ph2.v);
  double viol = -kInf;
  for (const auto& fn : program.inequalities) viol = std::max(viol, fn.evaluate(ph2.v));
  result.max_violation = program.inequalities.empty() ? 0.0 : viol;
  if (ph2.unbounded || (!ph2.converged && improving_ray(pb, start, ph2.v, settings))) {
    result.status = SolveStatus::kUnbounded;
  } else if (ph2.converged) {
    result.status = SolveStatus::kOptimal;
  } else if (ph2.residual_pri <= 1e-6 && std::isfinite(result.objective)) {
    result.status = SolveStatus::kInaccurate;
  } else {
    result.status = SolveStatus::kNumericalFailure;
  }
  return result;
}

}  // namespace uavrsma
