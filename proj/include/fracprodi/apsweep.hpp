#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fracprodi/error.hpp"
#include "fracprodi/linear.hpp"
#include "fracprodi/semilinear.hpp"

namespace fracprodi {

enum class SweepStatus { solved_minimal, solved_multiple, nonconvergent, supersolution_infeasible };

constexpr std::string_view to_string(SweepStatus s) {
  switch (s) {
    case SweepStatus::solved_minimal: return "solved_minimal";
    case SweepStatus::solved_multiple: return "solved_multiple";
    case SweepStatus::nonconvergent: return "nonconvergent";
    case SweepStatus::supersolution_infeasible: return "supersolution_infeasible";
  }
  return "unknown";
}

struct SweepRecord {
  double rho = 0.0;
  SweepStatus status = SweepStatus::nonconvergent;
  double minimal_sup_norm = 0.0;
  int n_solutions_found = 0;
  double sup_u_minus = 0.0;  ///< of the minimal solution
  int iters = 0;
  bool bounded_by_supersolution = false;
  std::map<std::string, double> diagnostics;
  std::vector<GridFn> solutions;  ///< minimal solution first when solved
  bool solved() const { return status == SweepStatus::solved_minimal || status == SweepStatus::solved_multiple; }
};

/// Constants entering the a priori bounds and the divergence guards.
struct FamilyConstants {
  double kappa_hat = 0.0;  ///< abp_bound(op, -V1)
  double rho_hat = 1.0;    ///< negative-part bound applies for rho >= -rho_hat
  double C4 = 0.0;
  double C5 = 0.0;  ///< abp_bound(op, 0)
  double C3_hat = 0.0;
  std::optional<double> C0_hat;  ///< superlinear families: sup|u_min| at rho = -1
};

struct SweepBudget {
  IterationOptions iteration{1e-10, 10'000};
  NewtonOptions newton;
  bool count_solutions = true;
};

/// A problem with fixed operator, f, h, V1, V2 and C_ap; rho varies.
struct Family {
  APProblem base;
  APReport report;
  FamilyConstants constants;
  SweepBudget budget;
  APProblem at(double rho) const { return base.with_rho(rho); }
};

namespace detail {

inline double sup_negative_part(const GridFn& u) { return std::max(0.0, -u.min()); }
inline double sup_positive_part(const GridFn& u) { return std::max(0.0, u.max()); }

inline double guard_for(const Family& fam, double rho) {
  const auto& c = fam.constants;
  if (c.C0_hat) {
    const double p = fam.base.f.growth_exponent();
    return 10.0 * *c.C0_hat * std::max(1.0, std::pow(std::abs(rho), 1.0 / p));
  }
  return 10.0 * c.kappa_hat * (fam.base.C_ap + std::abs(rho) + fam.base.h.sup_norm() + 1.0);
}

/// Monotone iteration from the subsolution: bounded by the supersolution where that is feasible,
/// otherwise guarded by the a priori cap.
struct MinimalRun {
  IterationResult iteration;
  bool bounded = false;
};

inline MinimalRun minimal_solution(const Family& fam, const APProblem& p) {
  const GridFn lower = build_subsolution(p);
  const auto upper = build_supersolution(p);
  if (upper.feasible && (lower - upper.u_bar).max() <= 1e-10) {
    return {detail::monotone_run(p, lower, upper.u_bar, 0.0, fam.budget.iteration), true};
  }
  return {guarded_iteration(p, lower, guard_for(fam, p.rho), fam.budget.iteration), false};
}

}  // namespace detail

/// Negative-part, growth and (superlinear) sup-norm bounds on every solution of the record.
inline std::map<std::string, double> apriori_check(const SweepRecord& rec, const Family& fam) {
  std::map<std::string, double> out;
  if (rec.solutions.empty()) return out;
  const auto& c = fam.constants;
  const double h_sup = fam.base.h.sup_norm();
  double neg = std::numeric_limits<double>::infinity();
  double growth = std::numeric_limits<double>::infinity();
  double sup_u = 0.0;
  for (const auto& u : rec.solutions) {
    neg = std::min(neg, c.kappa_hat * (fam.base.C_ap + c.rho_hat + h_sup) - detail::sup_negative_part(u));
    growth = std::min(growth, c.C3_hat * (1.0 + detail::sup_positive_part(u)) - std::max(rec.rho, 0.0));
    sup_u = std::max(sup_u, u.sup_norm());
  }
  if (rec.rho >= -c.rho_hat) out["negative_part"] = neg;
  out["growth"] = growth;
  if (c.C0_hat) {
    const double p = fam.base.f.growth_exponent();
    const double scale = *c.C0_hat * std::max(1.0, std::pow(std::abs(rec.rho), 1.0 / p));
    out["superlinear_sup"] = scale - rec.minimal_sup_norm;
    out["superlinear_ratio"] = rec.minimal_sup_norm / scale;
  }
  return out;
}

/// Runs the minimal-solution pipeline at rho and, when the budget asks for it, counts further
/// solutions by deflated Newton. Without a converged minimal run, Newton from scratch decides.
inline SweepRecord solvable(const Family& fam, double rho) {
  const APProblem p = fam.at(rho);
  SweepRecord rec;
  rec.rho = rho;
  const auto run = detail::minimal_solution(fam, p);
  rec.iters = run.iteration.iters;
  rec.bounded_by_supersolution = run.bounded;
  std::optional<GridFn> lowest;
  if (run.iteration.converged()) lowest = run.iteration.solution;

  if (!lowest) {
    // Any solution is a supersolution above the subsolution, so a found one bounds a restarted iteration.
    auto found = newton_deflated(p, {}, fam.budget.newton);
    if (found.empty()) {
      rec.status = run.iteration.status == IterationStatus::max_iter_exceeded ? SweepStatus::supersolution_infeasible
                                                                              : SweepStatus::nonconvergent;
      return rec;
    }
    std::sort(found.begin(), found.end(), [](const GridFn& a, const GridFn& b) { return a.min() < b.min(); });
    try {
      lowest = monotone_iteration(p, build_subsolution(p), found.front(), fam.budget.iteration).solution;
    } catch (const Error&) {
      lowest = found.front();
    }
  }

  rec.solutions.push_back(*lowest);
  if (fam.budget.count_solutions) {
    auto more = newton_deflated(p, rec.solutions, fam.budget.newton);
    for (auto& u : more) rec.solutions.push_back(std::move(u));
  }
  const GridFn& minimal = rec.solutions.front();
  rec.n_solutions_found = static_cast<int>(rec.solutions.size());
  rec.status = rec.n_solutions_found >= 2 ? SweepStatus::solved_multiple : SweepStatus::solved_minimal;
  rec.minimal_sup_norm = minimal.sup_norm();
  rec.sup_u_minus = detail::sup_negative_part(minimal);
  rec.diagnostics = apriori_check(rec, fam);
  rec.diagnostics["minimal_residual"] = residual(p, minimal).sup_norm();
  if (rec.solutions.size() > 1) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < rec.solutions.size(); ++k) gap = std::min(gap, (rec.solutions[k] - minimal).min());
    rec.diagnostics["minimality"] = gap;
  }
  return rec;
}

/// Checks the assumptions, measures the family constants and, for superlinear f, calibrates the
/// sup-norm scale at rho = -1. With `enforce` false violated assumptions are kept in the report only.
inline Family make_family(APProblem base, double rho_hat, SweepBudget budget = {}, bool enforce = true) {
  if (!(rho_hat > 0.0)) throw Error(ErrorCode::out_of_range, "rho_hat must be positive");
  Family fam{std::move(base), {}, {}, std::move(budget)};
  fam.report = check_ap_assumptions(fam.base);
  if (enforce && !fam.report.all_passed()) {
    std::string failed;
    for (const auto& c : fam.report.checks) {
      if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
    }
    throw Error(ErrorCode::precondition_not_met, "assumption checks failed: " + failed);
  }
  const auto& p = fam.base;
  auto& c = fam.constants;
  const double C = p.C_ap;
  const double h_sup = p.h.sup_norm();
  c.rho_hat = rho_hat;
  c.kappa_hat = abp_bound(*p.op, -1.0 * p.V1);
  c.C5 = abp_bound(*p.op, PotentialFn(p.grid()));
  c.C4 = std::max(2.0 * C + h_sup + p.V1.sup_positive_part() * c.kappa_hat * (C + rho_hat + h_sup),
                  p.V2.sup_negative_part());
  c.C3_hat = p.lambda0 * (1.0 + c.C4 * c.C5);
  if (p.f.is_power()) {
    SweepBudget calib = fam.budget;
    calib.count_solutions = false;
    Family linear_guard{fam.base, fam.report, c, calib};
    const auto rec = solvable(linear_guard, -1.0);
    if (!rec.solved()) throw Error(ErrorCode::no_convergence, "superlinear calibration at rho = -1 failed");
    c.C0_hat = std::max(rec.minimal_sup_norm, 1e-300);
  }
  return fam;
}

struct SweepResult {
  std::vector<SweepRecord> records;
  std::vector<std::string> warnings;
};

/// Records sorted by rho; departures from the expected count pattern are warnings.
inline SweepResult sweep(const Family& fam, std::vector<double> rhos) {
  std::stable_sort(rhos.begin(), rhos.end());
  SweepResult out;
  for (double rho : rhos) out.records.push_back(solvable(fam, rho));
  for (std::size_t k = 1; k < out.records.size(); ++k) {
    const auto& prev = out.records[k - 1];
    const auto& cur = out.records[k];
    if (cur.solved() && !prev.solved()) {
      out.warnings.push_back("solvable at rho = " + std::to_string(cur.rho) + " above unsolvable rho = " +
                             std::to_string(prev.rho));
    }
    if (cur.n_solutions_found > prev.n_solutions_found) {
      out.warnings.push_back("solution count increases from rho = " + std::to_string(prev.rho) + " to " +
                             std::to_string(cur.rho));
    }
  }
  return out;
}

struct RhoStarResult {
  double rho_star = 0.0;
  double lo = 0.0;  ///< solvable end of the final bracket
  double hi = 0.0;  ///< unsolvable end
  std::vector<std::pair<double, bool>> history;
  int bracket_evals() const { return static_cast<int>(history.size()); }
};

/// Bisection on the solvable predicate; counting is switched off inside the predicate.
inline RhoStarResult find_rho_star(const Family& fam, double rho_lo, double rho_hi, double tol_rho) {
  if (!(rho_lo < rho_hi) || !(tol_rho > 0.0)) throw Error(ErrorCode::bracket_invalid, "need rho_lo < rho_hi, tol > 0");
  Family f = fam;
  f.budget.count_solutions = false;
  RhoStarResult out;
  const auto eval = [&](double rho) {
    const bool ok = solvable(f, rho).solved();
    for (const auto& [r, s] : out.history) {
      if ((ok && !s && rho > r) || (!ok && s && rho < r)) {
        throw Error(ErrorCode::predicate_inconsistent,
                    "solvable rho above an unsolvable one near " + std::to_string(rho) + "; refine the grid");
      }
    }
    out.history.emplace_back(rho, ok);
    return ok;
  };
  if (!eval(rho_lo)) throw Error(ErrorCode::bracket_invalid, "lower end of the bracket is not solvable");
  if (eval(rho_hi)) throw Error(ErrorCode::bracket_invalid, "upper end of the bracket is solvable");
  double lo = rho_lo;
  double hi = rho_hi;
  while (hi - lo > tol_rho) {
    const double mid = 0.5 * (lo + hi);
    (eval(mid) ? lo : hi) = mid;
  }
  out.lo = lo;
  out.hi = hi;
  out.rho_star = 0.5 * (lo + hi);
  return out;
}

}  // namespace fracprodi
