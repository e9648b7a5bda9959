#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fracprodi/error.hpp"
#include "fracprodi/fraclap.hpp"
#include "fracprodi/grid.hpp"
#include "fracprodi/linear.hpp"
#include "fracprodi/spectral.hpp"

namespace fracprodi {

/// f(x, q) with f(x, 0) = 0.
class Nonlinearity {
 public:
  struct JumpingLinear {
    double mu_minus = 0.0;
    double mu_plus = 0.0;
  };
  /// a0(x) q^p for q >= 0, slope_neg * q for q < 0.
  struct PowerAP {
    double a0 = 1.0;
    std::optional<GridFn> a0_field;
    double p = 2.0;
    double slope_neg = 0.0;
  };
  /// Piecewise linear through (q_k, f_k), extended linearly beyond the table.
  struct Tabulated {
    std::vector<double> q;
    std::vector<double> f;
  };
  using Family = std::variant<JumpingLinear, PowerAP, Tabulated>;

  static Nonlinearity jumping_linear(double mu_minus, double mu_plus) {
    return Nonlinearity(JumpingLinear{mu_minus, mu_plus});
  }

  static Nonlinearity power_ap(double a0, double p, double slope_neg) {
    if (!(a0 > 0.0)) throw Error(ErrorCode::out_of_range, "a0 must be positive");
    if (!(p > 1.0)) throw Error(ErrorCode::out_of_range, "power exponent must exceed 1");
    return Nonlinearity(PowerAP{a0, std::nullopt, p, slope_neg});
  }

  static Nonlinearity power_ap(GridFn a0, double p, double slope_neg) {
    if (!(a0.min() > 0.0)) throw Error(ErrorCode::out_of_range, "a0 must be positive at every node");
    if (!(p > 1.0)) throw Error(ErrorCode::out_of_range, "power exponent must exceed 1");
    const double top = a0.max();
    return Nonlinearity(PowerAP{top, std::move(a0), p, slope_neg});
  }

  static Nonlinearity tabulated(std::vector<double> q, std::vector<double> f) {
    if (q.size() < 2 || q.size() != f.size()) throw Error(ErrorCode::out_of_range, "table needs >= 2 matching samples");
    for (std::size_t k = 1; k < q.size(); ++k) {
      if (!(q[k] > q[k - 1])) throw Error(ErrorCode::out_of_range, "table abscissae must increase strictly");
    }
    Nonlinearity out(Tabulated{std::move(q), std::move(f)});
    if (std::abs(out(0, 0.0)) > 1e-14) throw Error(ErrorCode::out_of_range, "tabulated nonlinearity must vanish at 0");
    return out;
  }

  const Family& family() const { return family_; }
  bool is_power() const { return std::holds_alternative<PowerAP>(family_); }

  std::string name() const {
    switch (family_.index()) {
      case 0: return "jumping_linear";
      case 1: return "power_ap";
      default: return "tabulated";
    }
  }

  double operator()(std::size_t node, double q) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, JumpingLinear>) {
            return q >= 0.0 ? fam.mu_plus * q : fam.mu_minus * q;
          } else if constexpr (std::is_same_v<T, PowerAP>) {
            return q >= 0.0 ? a0_at(fam, node) * std::pow(q, fam.p) : fam.slope_neg * q;
          } else {
            const auto k = segment(fam, q);
            return fam.f[k] + slope(fam, k) * (q - fam.q[k]);
          }
        },
        family_);
  }

  /// d f / d q; at kinks the right-hand branch is used.
  double derivative(std::size_t node, double q) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, JumpingLinear>) {
            return q >= 0.0 ? fam.mu_plus : fam.mu_minus;
          } else if constexpr (std::is_same_v<T, PowerAP>) {
            return q >= 0.0 ? fam.p * a0_at(fam, node) * std::pow(q, fam.p - 1.0) : fam.slope_neg;
          } else {
            auto k = segment(fam, q);
            if (k + 2 < fam.q.size() && q >= fam.q[k + 1]) ++k;
            return slope(fam, k);
          }
        },
        family_);
  }

  /// C1 with f(x, q) <= C1 (1 + q^p) for q >= 0 (p = 1 for the linear families).
  double growth_constant() const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, JumpingLinear>) {
            return std::max(fam.mu_plus, 1.0);
          } else if constexpr (std::is_same_v<T, PowerAP>) {
            return std::max(fam.a0, 1.0);
          } else {
            // Linear extension beyond the last sample keeps f(q)/(1+q) below max(sample ratio, end slope).
            double c = std::max(1.0, slope(fam, fam.q.size() - 2));
            for (std::size_t k = 0; k < fam.q.size(); ++k) {
              if (fam.q[k] >= 0.0) c = std::max(c, fam.f[k] / (1.0 + fam.q[k]));
            }
            return c;
          }
        },
        family_);
  }

  /// Exponent p of the growth bound: 1 for the linear families.
  double growth_exponent() const { return is_power() ? std::get<PowerAP>(family_).p : 1.0; }

 private:
  explicit Nonlinearity(Family f) : family_(std::move(f)) {}

  static double a0_at(const PowerAP& fam, std::size_t node) { return fam.a0_field ? (*fam.a0_field)[node] : fam.a0; }

  static std::size_t segment(const Tabulated& t, double q) {
    const auto it = std::upper_bound(t.q.begin(), t.q.end(), q);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - t.q.begin()) - 1));
    return std::min(k, t.q.size() - 2);
  }

  static double slope(const Tabulated& t, std::size_t k) { return (t.f[k + 1] - t.f[k]) / (t.q[k + 1] - t.q[k]); }

  Family family_;
};

inline double eval_nonlinearity(const Nonlinearity& f, std::size_t node, double q) { return f(node, q); }

/// A Lipschitz constant of q -> f(x, q) on [m, M], uniform in x.
inline double lipschitz_constant(const Nonlinearity& f, double m, double M) {
  if (m > M) throw Error(ErrorCode::empty_interval, "lipschitz interval is empty");
  return std::visit(
      [&](const auto& fam) -> double {
        using T = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<T, Nonlinearity::JumpingLinear>) {
          return std::max(std::abs(fam.mu_minus), std::abs(fam.mu_plus));
        } else if constexpr (std::is_same_v<T, Nonlinearity::PowerAP>) {
          const double top = std::max(std::abs(m), std::abs(M));
          return std::max(std::abs(fam.slope_neg), fam.p * fam.a0 * std::pow(top, fam.p - 1.0));
        } else {
          double theta = 0.0;
          const std::size_t last = fam.q.size() - 2;
          for (std::size_t k = 0; k <= last; ++k) {
            // Segment k governs [q_k, q_{k+1}], the end segments also the linear extensions.
            const double lo = k == 0 ? -std::numeric_limits<double>::infinity() : fam.q[k];
            const double hi = k == last ? std::numeric_limits<double>::infinity() : fam.q[k + 1];
            if (hi < m || lo > M) continue;
            theta = std::max(theta, std::abs((fam.f[k + 1] - fam.f[k]) / (fam.q[k + 1] - fam.q[k])));
          }
          return theta;
        }
      },
      f.family());
}

/// Data of (-Delta)^s u = f(x, u) + rho Phi1 + h in D, u = 0 outside.
struct APProblem {
  std::shared_ptr<const DiscreteOp> op;
  Nonlinearity f = Nonlinearity::jumping_linear(0.0, 0.0);
  GridFn h;
  double rho = 0.0;
  GridFn phi1;  ///< principal Dirichlet eigenfunction, sup-norm 1
  double lambda0 = 0.0;
  PotentialFn V1;
  PotentialFn V2;
  double C_ap = 0.0;

  const GridPtr& grid() const { return op->grid; }
  APProblem with_rho(double r) const {
    APProblem p = *this;
    p.rho = r;
    return p;
  }
  APProblem with_h(GridFn new_h) const {
    new_h.check_same(h);
    APProblem p = *this;
    p.h = std::move(new_h);
    return p;
  }
  /// rho Phi1 + h.
  GridFn forcing() const { return rho * phi1 + h; }
};

inline APProblem make_problem(std::shared_ptr<const DiscreteOp> op, Nonlinearity f, GridFn h, double rho, PotentialFn V1,
                              PotentialFn V2, double C_ap) {
  if (!(C_ap >= 0.0)) throw Error(ErrorCode::out_of_range, "C_ap must be non-negative");
  h.check_same(V1);
  h.check_same(V2);
  if (h.size() != op->size()) throw Error(ErrorCode::grid_mismatch, "problem data do not live on the operator grid");
  if (const auto* pw = std::get_if<Nonlinearity::PowerAP>(&f.family()); pw && pw->a0_field) {
    if (pw->a0_field->size() != op->size()) throw Error(ErrorCode::grid_mismatch, "a0 field does not match the grid");
  }
  const auto pair = principal_eigenpair(*op);
  return APProblem{std::move(op), std::move(f), std::move(h), rho, pair.psi, pair.lambda_star,
                   std::move(V1), std::move(V2), C_ap};
}

inline GridFn eval_nonlinearity(const Nonlinearity& f, const GridFn& u) {
  GridFn out(u.grid());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = f(i, u[i]);
  return out;
}

/// A u - f(x, u) - rho Phi1 - h at every node.
inline GridFn residual(const APProblem& p, const GridFn& u) {
  return apply(*p.op, u) - eval_nonlinearity(p.f, u) - p.forcing();
}

struct APCheck {
  std::string name;
  bool passed = false;
  double margin = 0.0;  ///< positive when the check passes with room
};

struct APReport {
  std::vector<APCheck> checks;
  double lambda_minus_V1 = 0.0;
  double lambda_minus_V2 = 0.0;
  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const APCheck& c) { return c.passed; });
  }
  const APCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

inline APReport check_ap_assumptions(const APProblem& p, double Q = 100.0, int q_points = 201) {
  APReport r;
  const auto& op = *p.op;
  r.lambda_minus_V1 = principal_eigenpair(op, -1.0 * p.V1).lambda_star;
  r.lambda_minus_V2 = principal_eigenpair(op, -1.0 * p.V2).lambda_star;
  r.checks.push_back({"eigen_minus_V1_positive", r.lambda_minus_V1 > 0.0, r.lambda_minus_V1});
  r.checks.push_back({"eigen_minus_V2_negative", r.lambda_minus_V2 < 0.0, -r.lambda_minus_V2});

  double lower_neg = std::numeric_limits<double>::infinity();
  double lower_pos = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < op.size(); ++i) {
    for (int k = 0; k < q_points; ++k) {
      const double q = Q * k / (q_points - 1);
      lower_pos = std::min(lower_pos, p.f(i, q) - p.V2[i] * q + p.C_ap);
      lower_neg = std::min(lower_neg, p.f(i, -q) + p.V1[i] * q + p.C_ap);
    }
  }
  // Rounding of f - V q at large |q| must not flip an exact equality.
  const double slack = 1e-12 * Q * (1.0 + std::max(p.V1.sup_norm(), p.V2.sup_norm()));
  r.checks.push_back({"lower_bound_nonpositive_q", lower_neg >= -slack, lower_neg});
  r.checks.push_back({"lower_bound_nonnegative_q", lower_pos >= -slack, lower_pos});

  if (const auto* pw = std::get_if<Nonlinearity::PowerAP>(&p.f.family())) {
    const double d = p.grid()->dim();
    const double s = op.s;
    r.checks.push_back({"dimension_above_one_plus_2s", d > 1.0 + 2.0 * s, d - 1.0 - 2.0 * s});
    const double upper = d > 2.0 * s ? (d + 2.0 * s) / (d - 2.0 * s) : std::numeric_limits<double>::infinity();
    const double margin = std::min(pw->p - 1.0, upper - pw->p);
    r.checks.push_back({"exponent_window", margin > 0.0, margin});
  } else {
    // Measured C in |f(q)| <= C (1 + |q|) over the q-grid; piecewise linear families always pass.
    double c = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i) {
      for (int k = 0; k < q_points; ++k) {
        const double q = Q * k / (q_points - 1);
        c = std::max({c, std::abs(p.f(i, q)) / (1.0 + q), std::abs(p.f(i, -q)) / (1.0 + q)});
      }
    }
    r.checks.push_back({"linear_growth", std::isfinite(c), c});
  }
  return r;
}

/// 2 sup|h| + 2|rho| + C_ap.
inline double subsolution_constant(const APProblem& p) { return 2.0 * p.h.sup_norm() + 2.0 * std::abs(p.rho) + p.C_ap; }

/// Solves (A - V1) u = -C2 + h + rho Phi1; the result is <= 0 and a subsolution.
inline GridFn build_subsolution(const APProblem& p) {
  const double C2 = subsolution_constant(p);
  const auto u = solve_dirichlet(*p.op, -1.0 * p.V1, GridFn::constant(p.grid(), -C2) + p.forcing());
  if (u.max() > 1e-10) {
    throw Error(ErrorCode::subsolution_inequality_violated, "subsolution has positive values; refine the grid");
  }
  const auto r = residual(p, u);
  Eigen::Index worst = 0;
  if (r.values().maxCoeff(&worst) > 1e-8) {
    throw Error(ErrorCode::subsolution_inequality_violated,
                "subsolution inequality fails at node " + std::to_string(worst) + "; refine the grid");
  }
  return u;
}

struct Supersolution {
  GridFn u_bar;
  bool feasible = false;
  double margin = 0.0;  ///< min over nodes of A u_bar - f(u_bar) - rho Phi1 - h
};

/// Solves A u = h^+ + C1 and checks the supersolution inequality at the problem's rho.
inline Supersolution build_supersolution(const APProblem& p) {
  GridFn rhs(p.grid());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = std::max(p.h[i], 0.0);
  rhs += GridFn::constant(p.grid(), p.f.growth_constant());
  Supersolution out;
  out.u_bar = solve_dirichlet(*p.op, PotentialFn(p.grid()), rhs);
  out.margin = residual(p, out.u_bar).min();
  out.feasible = out.margin >= -1e-8;
  return out;
}

struct IterationLogEntry {
  int n = 0;
  double residual = 0.0;
  double sup_increment = 0.0;
};

struct IterationOptions {
  double tol = 1e-10;
  int max_iter = 10'000;
};

enum class IterationStatus { converged, guard_exceeded, max_iter_exceeded };

struct IterationResult {
  GridFn solution;
  int iters = 0;
  double theta = 0.0;
  double residual = 0.0;  ///< sup-norm of the full equation residual at the returned iterate
  IterationStatus status = IterationStatus::converged;
  bool monotone_certificate = true;
  std::vector<IterationLogEntry> log;
  bool converged() const { return status == IterationStatus::converged; }
};

namespace detail {

/// Solves (A + theta) u_{n+1} = F(u_n) + theta u_n from u_lower. With an upper bound each step is
/// checked against it; without one the run aborts once sup|u_n| exceeds `guard`.
inline IterationResult monotone_run(const APProblem& p, const GridFn& u_lower, const std::optional<GridFn>& u_upper,
                                    double guard, const IterationOptions& opts) {
  const double top = u_upper ? u_upper->max() : guard;
  IterationResult out;
  out.theta = std::max(lipschitz_constant(p.f, std::min(u_lower.min(), 0.0), std::max(top, 0.0)), 1e-12);
  const DirichletSolver solver(*p.op, PotentialFn::constant(p.grid(), out.theta));
  const GridFn forcing = p.forcing();

  GridFn u = u_lower;
  for (int n = 1; n <= opts.max_iter; ++n) {
    const GridFn next = solver.solve(eval_nonlinearity(p.f, u) + forcing + out.theta * u);
    const double increment = (next - u).sup_norm();
    const double scale = 1e-10 * std::max(1.0, next.sup_norm());
    out.iters = n;
    out.log.push_back({n, residual(p, next).sup_norm(), increment});
    if (!u_upper && next.sup_norm() > guard) {
      out.solution = next;
      out.residual = out.log.back().residual;
      out.status = IterationStatus::guard_exceeded;
      return out;
    }
    if ((u - next).max() > scale) {
      throw Error(ErrorCode::monotonicity_violated, "iterate decreased at step " + std::to_string(n));
    }
    if (u_upper && (next - *u_upper).max() > scale) {
      throw Error(ErrorCode::monotonicity_violated, "iterate exceeded the supersolution at step " + std::to_string(n));
    }
    u = next;
    // The residual after a step is bounded by 2 theta times the increment; stop once both are small
    // or the increment has reached rounding level.
    if (increment <= opts.tol && (out.log.back().residual <= 10.0 * opts.tol || increment <= 1e-3 * opts.tol)) {
      out.solution = u;
      out.residual = out.log.back().residual;
      out.status = IterationStatus::converged;
      return out;
    }
  }
  out.solution = u;
  out.residual = out.log.back().residual;
  out.status = IterationStatus::max_iter_exceeded;
  return out;
}

}  // namespace detail

/// Monotone iteration between a verified subsolution and supersolution; the limit is the minimal solution.
inline IterationResult monotone_iteration(const APProblem& p, const GridFn& u_lower, const GridFn& u_upper,
                                          const IterationOptions& opts = {}) {
  u_lower.check_same(u_upper);
  if ((u_lower - u_upper).max() > 1e-10) {
    throw Error(ErrorCode::ordering_precondition_failed, "subsolution exceeds supersolution");
  }
  if (residual(p, u_lower).max() > 1e-8) throw Error(ErrorCode::precondition_not_met, "lower bound is not a subsolution");
  if (residual(p, u_upper).min() < -1e-8) throw Error(ErrorCode::precondition_not_met, "upper bound is not a supersolution");
  auto out = detail::monotone_run(p, u_lower, u_upper, 0.0, opts);
  if (out.status == IterationStatus::max_iter_exceeded) {
    throw Error(ErrorCode::max_iter_exceeded, "monotone iteration did not converge");
  }
  return out;
}

/// Monotone iteration from a subsolution without a supersolution: aborts when sup|u_n| passes `guard`.
/// Statuses are returned, not thrown.
inline IterationResult guarded_iteration(const APProblem& p, const GridFn& u_lower, double guard,
                                         const IterationOptions& opts = {}) {
  if (!(guard > 0.0)) throw Error(ErrorCode::out_of_range, "guard must be positive");
  if (residual(p, u_lower).max() > 1e-8) throw Error(ErrorCode::precondition_not_met, "lower bound is not a subsolution");
  return detail::monotone_run(p, u_lower, std::nullopt, guard, opts);
}

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 25;
  std::vector<double> ladder{0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, -0.5};  ///< c in u_base + c Phi1
  int n_random = 2;
  std::uint64_t seed = 1;
  std::optional<GridFn> base;  ///< default: first known solution, else zero
};

namespace detail {

inline double weighted_sq_norm(const GridFn& e) {
  const double w = std::pow(e.grid()->spacing(), e.grid()->dim());
  return w * e.values().squaredNorm();
}

/// Deflated semismooth Newton from one start; returns a root of G not within `known`.
inline std::optional<GridFn> deflated_newton(const APProblem& p, GridFn u, const std::vector<GridFn>& known,
                                             const NewtonOptions& opts) {
  const auto n = static_cast<Eigen::Index>(u.size());
  const auto deflation = [&](const GridFn& v) {
    double m = 1.0;
    for (const auto& k : known) m *= 1.0 / weighted_sq_norm(v - k) + 1.0;
    return m;
  };
  const auto distinct = [&](const GridFn& v) {
    return std::all_of(known.begin(), known.end(), [&](const GridFn& k) { return (v - k).sup_norm() > 100.0 * opts.tol; });
  };
  for (const auto& k : known) {
    if (weighted_sq_norm(u - k) < 1e-24) return std::nullopt;
  }
  GridFn g = residual(p, u);
  for (int it = 0; it <= opts.max_iter; ++it) {
    if (!g.values().allFinite()) return std::nullopt;
    if (g.sup_norm() <= opts.tol) return distinct(u) ? std::optional<GridFn>(u) : std::nullopt;
    if (it == opts.max_iter) break;
    Eigen::MatrixXd J = p.op->matrix;
    for (Eigen::Index i = 0; i < n; ++i) J(i, i) -= p.f.derivative(static_cast<std::size_t>(i), u[static_cast<std::size_t>(i)]);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    Eigen::VectorXd delta = -lu.solve(g.values());
    // Deflated step delta / (1 - grad(log M) . delta).
    double directional = 0.0;
    const double w = std::pow(p.grid()->spacing(), p.grid()->dim());
    for (const auto& k : known) {
      const GridFn e = u - k;
      const double r2 = weighted_sq_norm(e);
      directional += (-2.0 * w / (r2 * r2)) / (1.0 / r2 + 1.0) * e.values().dot(delta);
    }
    const double denom = 1.0 - directional;
    if (std::abs(denom) > 1e-12) delta /= denom;

    const double merit = deflation(u) * g.sup_norm();
    double step = 1.0;
    GridFn trial = u;
    GridFn trial_g = g;
    for (int b = 0; b < 12; ++b, step *= 0.5) {
      trial = GridFn(u.grid(), u.values() + step * delta);
      trial_g = residual(p, trial);
      if (deflation(trial) * trial_g.sup_norm() < merit) break;
    }
    u = trial;
    g = trial_g;
  }
  return std::nullopt;
}

}  // namespace detail

/// Solutions of G(u) = A u - f(u) - rho Phi1 - h = 0 found from a ladder of starts u_base + c Phi1 and
/// random perturbations, each run deflated against `known` and everything found so far. Returns only
/// new solutions, pairwise and from `known` separated by more than 100 tol in sup-norm.
inline std::vector<GridFn> newton_deflated(const APProblem& p, const std::vector<GridFn>& known,
                                           const NewtonOptions& opts = {}) {
  const GridFn base = opts.base ? *opts.base : (known.empty() ? GridFn(p.grid()) : known.front());
  std::vector<GridFn> starts;
  for (double c : opts.ladder) starts.push_back(base + c * p.phi1);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double amplitude = 1.0 + base.sup_norm();
  for (int k = 0; k < opts.n_random; ++k) {
    starts.push_back(base + GridFn::from_function(p.grid(), [&](const Point&) { return amplitude * unif(rng); }));
  }
  std::vector<GridFn> all = known;
  std::vector<GridFn> found;
  for (const auto& start : starts) {
    if (auto sol = detail::deflated_newton(p, start, all, opts)) {
      all.push_back(*sol);
      found.push_back(std::move(*sol));
    }
  }
  return found;
}

}  // namespace fracprodi
