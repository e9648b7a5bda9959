#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fracprodi/apsweep.hpp"
#include "fracprodi/config.hpp"
#include "fracprodi/fraclap.hpp"
#include "fracprodi/grid.hpp"
#include "fracprodi/linear.hpp"
#include "fracprodi/semilinear.hpp"
#include "fracprodi/spectral.hpp"
#include "fracprodi/stochastic.hpp"

namespace fracprodi {

/// 0 success, 1 numerical status failure, 2 usage or configuration error.
enum ExitCode : int { exit_ok = 0, exit_numerical = 1, exit_usage = 2 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::no_convergence:
    case ErrorCode::singular_system:
    case ErrorCode::positivity_violation:
    case ErrorCode::insufficient_survivors:
    case ErrorCode::subsolution_inequality_violated:
    case ErrorCode::monotonicity_violated:
    case ErrorCode::max_iter_exceeded:
    case ErrorCode::predicate_inconsistent:
      return exit_numerical;
    default:
      return exit_usage;
  }
}

/// Everything a subcommand needs, materialized on the grid.
struct Setup {
  Config config;
  std::uint64_t seed = 1;
  GridPtr grid;
  std::shared_ptr<const DiscreteOp> op;
};

inline Domain make_domain(const DomainSpec& d) {
  if (d.kind == "interval") return Domain::interval(d.bounds[0], d.bounds[1]);
  return Domain::ball({d.center[0], d.center[1]}, d.radius);
}

inline Setup make_setup(const Config& c) {
  Setup s;
  s.config = c;
  s.seed = c.mc.seed.value_or(1);
  s.grid = make_grid(make_domain(c.domain), c.n);
  s.op = std::make_shared<const DiscreteOp>(assemble(s.grid, c.s));
  return s;
}

/// Constant, table or multiple of phi1 (computed on demand).
inline GridFn materialize(const FieldSpec& f, const Setup& s, const std::string& key) {
  if (const auto* c = std::get_if<ConstantField>(&f)) return GridFn::constant(s.grid, c->value);
  if (const auto* t = std::get_if<TableField>(&f)) {
    const std::filesystem::path p = std::filesystem::path(t->path).is_absolute() ? std::filesystem::path(t->path)
                                                                                : s.config.base_dir / t->path;
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::io_error, "cannot open table for '" + key + "': " + p.string());
    return read_csv(in, s.grid);
  }
  return std::get<Phi1Field>(f).multiple * principal_eigenpair(*s.op).psi;
}

inline Nonlinearity make_nonlinearity(const NonlinearitySpec& nl, const Setup& s) {
  if (nl.family == "jumping_linear") return Nonlinearity::jumping_linear(nl.mu_minus, nl.mu_plus);
  if (nl.family == "power_ap") {
    if (const auto* c = std::get_if<ConstantField>(&nl.a0)) return Nonlinearity::power_ap(c->value, nl.p, nl.slope_neg);
    return Nonlinearity::power_ap(materialize(nl.a0, s, "nonlinearity.a0"), nl.p, nl.slope_neg);
  }
  return Nonlinearity::tabulated(nl.q, nl.f);
}

inline APProblem make_ap_problem(const Setup& s) {
  const auto& c = s.config;
  const auto& nl = c.nonlinearity;
  const auto default_potential = [&](bool lower) -> FieldSpec {
    if (nl.family == "jumping_linear") return ConstantField{lower ? nl.mu_minus : nl.mu_plus};
    if (nl.family == "power_ap" && lower) return ConstantField{nl.slope_neg};
    throw Error(ErrorCode::schema_error, std::string("'") + (lower ? "V1" : "V2") + "' is required for " + nl.family);
  };
  const GridFn V1 = materialize(c.V1.value_or(default_potential(true)), s, "V1");
  const GridFn V2 = materialize(c.V2.value_or(default_potential(false)), s, "V2");
  const GridFn h = materialize(c.h, s, "h");
  return make_problem(s.op, make_nonlinearity(nl, s), h, c.rho, V1, V2, c.C_ap);
}

inline SweepBudget make_budget(const Setup& s) {
  SweepBudget b;
  b.iteration = {s.config.tolerances.iteration, s.config.tolerances.max_iter};
  b.newton.tol = s.config.tolerances.newton;
  b.newton.seed = s.seed;
  return b;
}

inline std::vector<std::string> preamble(const Setup& s) {
  return {"config_hash=" + config_hash(s.config), "seed=" + std::to_string(s.seed)};
}

inline json json_header(const Setup& s) { return {{"config_hash", config_hash(s.config)}, {"seed", s.seed}}; }

inline std::filesystem::path out_dir(const Setup& s) {
  const std::filesystem::path dir = s.config.output;
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << content;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void write_field(const std::filesystem::path& path, const GridFn& u, const Setup& s) {
  std::ostringstream os;
  write_csv(os, u, preamble(s));
  write_text(path, os.str());
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline int run_eigen(const Setup& s, std::ostream& log) {
  SpectralOptions opts;
  opts.tol = s.config.tolerances.eigen;
  const auto pair = principal_eigenpair(*s.op, materialize(s.config.potential, s, "potential"), opts);
  const auto dir = out_dir(s);
  json j = json_header(s);
  j["lambda_star"] = pair.lambda_star;
  j["n"] = s.config.n;
  j["nodes"] = s.grid->size();
  j["s"] = s.config.s;
  j["residual"] = pair.residual;
  j["iterations"] = pair.iterations;
  write_json(dir / "eigen.json", j);
  write_field(dir / "eigenfunction.csv", pair.psi, s);
  log << "lambda_star " << fmt(pair.lambda_star) << "\n";
  return exit_ok;
}

inline int run_solve(const Setup& s, std::ostream& log) {
  const GridFn V = materialize(s.config.potential, s, "potential");
  const GridFn g = materialize(s.config.source, s, "source");
  const GridFn u = solve_dirichlet(*s.op, V, g);
  const GridFn r = GridFn(s.grid, (with_potential(*s.op, V) * u.values()).eval()) - g;
  const auto dir = out_dir(s);
  json j = json_header(s);
  j["lambda_star"] = principal_eigenpair(*s.op, V).lambda_star;
  j["kappa_hat"] = abp_bound(*s.op, V);
  j["residual"] = r.sup_norm();
  j["sup_norm"] = u.sup_norm();
  write_json(dir / "solve.json", j);
  write_field(dir / "solution.csv", u, s);
  log << "sup_norm " << fmt(u.sup_norm()) << "\n";
  return exit_ok;
}

inline json report_json(const APReport& r) {
  json j = json::object();
  for (const auto& c : r.checks) j[c.name] = {{"passed", c.passed}, {"margin", c.margin}};
  return j;
}

inline int run_solve_semilinear(const Setup& s, std::ostream& log) {
  const auto fam = make_family(make_ap_problem(s), s.config.rho_hat, make_budget(s), s.config.enforce_assumptions);
  const auto p = fam.at(s.config.rho);
  const auto run = detail::minimal_solution(fam, p);
  const auto& it = run.iteration;
  const auto dir = out_dir(s);

  std::ostringstream csv;
  for (const auto& line : preamble(s)) csv << "# " << line << '\n';
  csv << "n,residual,sup_increment\n";
  for (const auto& e : it.log) csv << e.n << ',' << fmt(e.residual) << ',' << fmt(e.sup_increment) << '\n';
  write_text(dir / "iteration_log.csv", csv.str());

  json j = json_header(s);
  j["converged"] = it.converged();
  j["status"] = it.converged() ? "converged"
                : it.status == IterationStatus::guard_exceeded ? "guard_exceeded"
                                                               : "max_iter_exceeded";
  j["iters"] = it.iters;
  j["theta"] = it.theta;
  j["residual"] = it.residual;
  j["rho"] = s.config.rho;
  j["bounded_by_supersolution"] = run.bounded;
  j["monotone_certificate"] = it.monotone_certificate;
  j["bounds_checked"] = report_json(fam.report);
  if (it.converged()) {
    j["minimal_sup_norm"] = it.solution.sup_norm();
    write_field(dir / "minimal_solution.csv", it.solution, s);
  }
  write_json(dir / "solve_semilinear.json", j);
  log << "converged " << (it.converged() ? "true" : "false") << " iters " << it.iters << "\n";
  return it.converged() ? exit_ok : exit_numerical;
}

inline McOptions mc_options(const Setup& s) {
  const auto& m = s.config.mc;
  McOptions o;
  o.n_paths = m.paths;
  o.dt = m.dt;
  o.t_max = m.tmax;
  o.seed = s.seed;
  o.workers = m.workers;
  if (m.sampler == "cms") o.sampler = Sampler::chambers_mallows_stuck;
  if (m.sampler == "subordination") o.sampler = Sampler::subordination;
  return o;
}

inline json estimate_json(const MCEstimate& e) {
  return {{"mean", e.mean}, {"stderr", e.std_error}, {"n_paths", e.n_paths}, {"seed", e.seed}, {"censored", e.censored}};
}

inline int run_mc(const Setup& s, std::ostream& log) {
  if (!s.config.mc.seed) throw Error(ErrorCode::schema_error, "'mc.seed' (or --seed) is required for mc");
  const auto& m = s.config.mc;
  const auto opts = mc_options(s);
  const GridFn V = materialize(s.config.potential, s, "potential");
  json estimates = json::array();
  for (const auto& probe : m.probes) {
    const Point x0{probe[0], probe[1]};
    MCEstimate e;
    if (m.task == "exit_time") {
      e = mc_exit_time(x0, s.grid->domain(), s.config.s, opts);
    } else if (m.task == "eigenvalue") {
      e = mc_principal_eigenvalue(x0, V, s.config.s, m.t1, m.t2, opts);
    } else {
      e = mc_duhamel_solution(x0, V, materialize(s.config.source, s, "source"), s.config.s, opts);
    }
    json ej = estimate_json(e);
    ej["probe"] = probe;
    estimates.push_back(ej);
    log << m.task << " at (" << fmt(probe[0]) << ", " << fmt(probe[1]) << "): " << fmt(e.mean) << " +- "
        << fmt(e.std_error) << "\n";
  }
  json j = json_header(s);
  j["task"] = m.task;
  for (const char* key : {"mean", "stderr", "n_paths", "seed"}) j[key] = estimates.front()[key];
  j["estimates"] = estimates;
  write_json(out_dir(s) / "mc.json", j);
  return exit_ok;
}

inline int run_sweep(const Setup& s, std::ostream& log) {
  const auto& c = s.config;
  const auto fam = make_family(make_ap_problem(s), c.rho_hat, make_budget(s), c.enforce_assumptions);
  const auto star = find_rho_star(fam, c.bracket[0], c.bracket[1], c.tol_rho);
  const auto result = sweep(fam, c.rho_list);

  std::ostringstream csv;
  for (const auto& line : preamble(s)) csv << "# " << line << '\n';
  csv << "# no-solution status is guard-triggered nonconvergence plus failed Newton starts\n";
  csv << "rho,status,n_solutions,minimal_sup_norm,sup_u_minus,bound_margin_L35,bound_margin_L36\n";
  const auto cell = [](const SweepRecord& r, const char* key) {
    const auto it = r.diagnostics.find(key);
    return it == r.diagnostics.end() ? std::string() : fmt(it->second);
  };
  for (const auto& r : result.records) {
    csv << fmt(r.rho) << ',' << to_string(r.status) << ',' << r.n_solutions_found << ',' << fmt(r.minimal_sup_norm)
        << ',' << fmt(r.sup_u_minus) << ',' << cell(r, "negative_part") << ',' << cell(r, "growth") << '\n';
  }
  const auto dir = out_dir(s);
  write_text(dir / "sweep.csv", csv.str());

  json history = json::array();
  for (const auto& [rho, ok] : star.history) history.push_back({{"rho", rho}, {"solvable", ok}});
  json j = json_header(s);
  j["rho_star"] = star.rho_star;
  j["tol_rho"] = c.tol_rho;
  j["bracket_evals"] = star.bracket_evals();
  j["bracket_final"] = {star.lo, star.hi};
  j["history"] = history;
  j["warnings"] = result.warnings;
  j["constants"] = {{"kappa_hat", fam.constants.kappa_hat}, {"rho_hat", fam.constants.rho_hat},
                    {"C3_hat", fam.constants.C3_hat}};
  if (fam.constants.C0_hat) j["constants"]["C0_hat"] = *fam.constants.C0_hat;
  write_json(dir / "sweep.json", j);
  log << "rho_star " << fmt(star.rho_star) << " (" << star.bracket_evals() << " evaluations)\n";
  return exit_ok;
}

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

/// Deterministic property suite at moderate resolution; randomness comes from `seed` only.
inline std::vector<ValidationCheck> validation_suite(std::uint64_t seed) {
  std::vector<ValidationCheck> out;
  const auto add = [&](std::string name, double value, double threshold, bool passed) {
    out.push_back({std::move(name), passed, value, threshold});
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto unit = make_interval_grid(-1.0, 1.0, 400);
  const auto op = assemble_1d(unit, 0.5);

  {
    // Exit-time profile of the half-Laplacian on (-1, 1): sqrt(1 - x^2).
    const auto u = solve_dirichlet(op, PotentialFn(unit), GridFn::constant(unit, 1.0));
    const auto exact = GridFn::from_function(unit, [](const Point& p) { return std::sqrt(1.0 - p[0] * p[0]); });
    const double err = (u - exact).sup_norm() / exact.sup_norm();
    add("torsion_sup_error", err, 0.02, err <= 0.02);
  }
  {
    const auto small = make_interval_grid(-1.0, 1.0, 200);
    const auto large = make_interval_grid(-2.0, 2.0, 200);
    double worst = 0.0;
    for (double s : {0.3, 0.5, 0.7}) {
      const double l1 = principal_eigenpair(assemble_1d(small, s)).lambda_star;
      const double l2 = principal_eigenpair(assemble_1d(large, s)).lambda_star;
      worst = std::max(worst, std::abs(l2 / (l1 * std::pow(2.0, -2.0 * s)) - 1.0));
    }
    add("eigenvalue_scaling", worst, 0.005, worst <= 0.005);
  }
  const auto g40 = make_interval_grid(-1.0, 1.0, 40);
  const auto op40 = assemble_1d(g40, 0.5);
  const auto random_field = [&](double lo, double hi) {
    return GridFn::from_function(g40, [&](const Point&) { return lo + (hi - lo) * unif(rng); });
  };
  {
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const auto V = random_field(-0.5, 2.0);
      const auto g = random_field(0.0, 1.0);
      worst = std::min(worst, solve_dirichlet(op40, V, g).min());
    }
    add("maximum_principle_min", worst, -1e-10, worst >= -1e-10);
  }
  {
    int failures = 0;
    for (int k = 0; k < 50; ++k) {
      const auto V = random_field(-0.5, 1.0);
      auto bump = random_field(0.0, 0.5);
      bump[static_cast<std::size_t>(k % 40)] += 0.1;
      if (!eigen_monotonicity_report(op40, V, V + bump).strict) ++failures;
    }
    const auto seq = domain_sequence_report(0.5, Domain::interval(-1.0, 1.0),
                                            {Domain::interval(-4.0, 4.0), Domain::interval(-2.0, 2.0),
                                             Domain::interval(-1.5, 1.5)},
                                            100);
    if (!seq.increasing_below_inner) ++failures;
    add("monotonicity_failures", failures, 0.0, failures == 0);
  }
  {
    int failures = 0;
    for (int k = 0; k < 50; ++k) {
      const auto V = random_field(0.0, 1.0);
      const auto sub = solve_dirichlet(op40, V, -1.0 * random_field(0.0, 1.0));
      const auto super = solve_dirichlet(op40, V, random_field(0.0, 1.0));
      if (!check_comparison(op40, V, sub, super).holds) ++failures;
    }
    add("comparison_failures", failures, 0.0, failures == 0);
  }
  const auto g200 = make_interval_grid(-1.0, 1.0, 200);
  const auto jumping = make_problem(std::make_shared<const DiscreteOp>(assemble_1d(g200, 0.5)),
                                    Nonlinearity::jumping_linear(0.5, 2.5), GridFn(g200), 0.0,
                                    PotentialFn::constant(g200, 0.5), PotentialFn::constant(g200, 2.5), 0.0);
  SweepBudget budget;
  budget.newton.seed = seed;
  const auto fam = make_family(jumping, 1.0, budget);
  {
    const auto rec = solvable(fam, -1.0);
    const auto p = fam.at(-1.0);
    const double res = rec.diagnostics.at("minimal_residual");
    add("minimal_residual", res, 1e-8, rec.solved() && res <= 1e-8);
    const double exact = (rec.solutions.front() - (-1.0 / (p.lambda0 - 0.5)) * p.phi1).sup_norm();
    add("minimal_matches_phi1_multiple", exact, 1e-8, exact <= 1e-8);
    const double gap = rec.solutions.size() > 1 ? rec.diagnostics.at("minimality") : -1.0;
    add("minimality_gap", gap, -1e-8, gap >= -1e-8);
  }
  {
    const auto star = find_rho_star(fam, -10.0, 10.0, 1e-2);
    add("rho_star_abs", std::abs(star.rho_star), 1e-2, std::abs(star.rho_star) <= 1e-2);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& rec : sweep(fam, {-1.0, -0.5, 0.0}).records) {
      worst = std::min({worst, rec.diagnostics.at("negative_part"), rec.diagnostics.at("growth")});
    }
    add("apriori_min_margin", worst, 0.0, worst >= 0.0);
  }
  {
    McOptions opts;
    opts.n_paths = 2000;
    opts.dt = 1e-3;
    opts.seed = seed;
    const auto e = mc_exit_time({0.0, 0.0}, Domain::interval(-1.0, 1.0), 0.5, opts);
    const double tol = std::max(3.0 * e.std_error, 0.05);
    add("mc_exit_time_error", std::abs(e.mean - 1.0), tol, std::abs(e.mean - 1.0) <= tol);
  }
  return out;
}

inline int run_validate(const Setup& s, std::ostream& log) {
  const auto checks = validation_suite(s.seed);
  json arr = json::array();
  bool all = true;
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"threshold", c.threshold}});
    all = all && c.passed;
    log << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << fmt(c.value) << " threshold=" << fmt(c.threshold)
        << "\n";
  }
  json j = json_header(s);
  j["checks"] = arr;
  j["all_passed"] = all;
  write_json(out_dir(s) / "validate.json", j);
  return all ? exit_ok : exit_numerical;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"eigen", "solve", "solve-semilinear", "mc", "sweep", "validate"};
  return names;
}

/// Dispatches a subcommand; library errors become exit codes with a message on `err`.
inline int run_command(const std::string& sub, const Config& config, std::ostream& log, std::ostream& err) {
  try {
    const Setup s = make_setup(config);
    if (sub == "eigen") return run_eigen(s, log);
    if (sub == "solve") return run_solve(s, log);
    if (sub == "solve-semilinear") return run_solve_semilinear(s, log);
    if (sub == "mc") return run_mc(s, log);
    if (sub == "sweep") return run_sweep(s, log);
    if (sub == "validate") return run_validate(s, log);
    err << "unknown subcommand '" << sub << "'\n";
    return exit_usage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }
}

}  // namespace fracprodi
