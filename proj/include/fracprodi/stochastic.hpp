#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "fracprodi/error.hpp"
#include "fracprodi/grid.hpp"

namespace fracprodi {

// Monte Carlo for the isotropic 2s-stable process X_t with E exp(i xi.X_t) = exp(-t |xi|^{2s}),
// whose killed generator is -(-Delta)^s on D.

enum class Sampler { chambers_mallows_stuck, subordination };

struct PathSummary {
  double exit_time = 0.0;  ///< first monitored exit, or t_max when censored
  bool censored = false;
  double fk_integral = 0.0;  ///< int_0^{tau ^ t_max} V(X_r) dr, left-endpoint rule
  double survived_to = 0.0;
  Point final_position{0.0, 0.0};
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  std::size_t censored = 0;
};

struct McOptions {
  std::size_t n_paths = 10'000;
  double dt = 1e-3;
  double t_max = 10.0;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::optional<Sampler> sampler;  ///< default: CMS in 1D, subordination in 2D
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of path `index` under master seed `seed`; independent of scheduling.
inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

/// Uniform on the open interval (0, 1).
inline double open_uniform(Rng& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

inline double standard_exponential(Rng& rng) { return -std::log(open_uniform(rng)); }

inline double standard_normal(Rng& rng) {
  // Box-Muller; one draw per call keeps the per-path stream simple.
  const double r = std::sqrt(-2.0 * std::log(open_uniform(rng)));
  return r * std::cos(2.0 * std::numbers::pi * open_uniform(rng));
}

/// Symmetric alpha-stable variable with E exp(i xi X) = exp(-|xi|^alpha).
inline double symmetric_stable(double alpha, Rng& rng) {
  const double v = std::numbers::pi * (open_uniform(rng) - 0.5);
  if (alpha == 1.0) return std::tan(v);
  const double w = standard_exponential(rng);
  return std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
}

/// One-sided s-stable variable with E exp(-lambda S) = exp(-lambda^s) (Kanter).
inline double positive_stable(double s, Rng& rng) {
  const double u = std::numbers::pi * open_uniform(rng);
  const double e = standard_exponential(rng);
  return std::sin(s * u) / std::pow(std::sin(u), 1.0 / s) * std::pow(std::sin((1.0 - s) * u) / e, (1.0 - s) / s);
}

inline Sampler default_sampler(int d) { return d == 1 ? Sampler::chambers_mallows_stuck : Sampler::subordination; }

/// Increment over time dt with characteristic function exp(-dt |xi|^{2s}).
inline Point sample_stable_increment(double s, int d, double dt, Rng& rng, Sampler sampler) {
  if (sampler == Sampler::chambers_mallows_stuck) {
    if (d != 1) throw Error(ErrorCode::out_of_range, "Chambers-Mallows-Stuck sampler is one-dimensional");
    const double alpha = 2.0 * s;
    return {std::pow(dt, 1.0 / alpha) * symmetric_stable(alpha, rng), 0.0};
  }
  // X = sqrt(2 S) N with S = dt^{1/s} S_1 subordinates Brownian motion.
  const double scale = std::sqrt(2.0 * std::pow(dt, 1.0 / s) * positive_stable(s, rng));
  if (d == 1) return {scale * standard_normal(rng), 0.0};
  return {scale * standard_normal(rng), scale * standard_normal(rng)};
}

namespace detail {

/// Exit-monitored walk. `on_step(k, x, integral)` is called at t = k dt for every k at which
/// the path is still alive, with integral = int_0^{k dt} V(X_r) dr.
template <class OnStep>
PathSummary walk(const Point& x0, const Domain& domain, double s, double dt, double t_max, const GridFn* V, Rng& rng,
                 Sampler sampler, OnStep&& on_step) {
  const int d = domain.dim();
  const auto steps = static_cast<long>(std::llround(t_max / dt));
  PathSummary out;
  Point x = x0;
  double integral = 0.0;
  for (long k = 0; k < steps; ++k) {
    on_step(k, x, integral);
    if (V) integral += V->nearest(x) * dt;
    const Point dx = sample_stable_increment(s, d, dt, rng, sampler);
    x[0] += dx[0];
    x[1] += dx[1];
    if (!domain.contains(x)) {
      out.exit_time = static_cast<double>(k + 1) * dt;
      out.survived_to = out.exit_time;
      out.fk_integral = integral;
      out.final_position = x;
      return out;
    }
  }
  on_step(steps, x, integral);
  out.exit_time = static_cast<double>(steps) * dt;
  out.survived_to = out.exit_time;
  out.censored = true;
  out.fk_integral = integral;
  out.final_position = x;
  return out;
}

inline void check_options(const McOptions& opts) {
  if (opts.n_paths < 2) throw Error(ErrorCode::out_of_range, "need at least two paths");
  if (!(opts.dt > 0.0) || !(opts.t_max > opts.dt)) throw Error(ErrorCode::out_of_range, "need 0 < dt < t_max");
}

/// Runs `per_path(index, rng)` for every path, storing results by index. Work is split into
/// contiguous blocks per worker; the output does not depend on the worker count.
template <class T, class PerPath>
std::vector<T> run_paths(std::size_t n_paths, std::uint64_t seed, unsigned workers, PerPath&& per_path) {
  std::vector<T> out(n_paths);
  const auto block = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Rng rng(path_seed(seed, i));
      out[i] = per_path(i, rng);
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1 || n_paths < 2 * workers) {
    block(0, n_paths);
    return out;
  }
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n_paths + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n_paths, lo + chunk);
      if (lo < hi) pool.emplace_back(block, lo, hi);
    }
  }
  return out;
}

}  // namespace detail

/// Sum in a fixed binary tree over the index range.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

inline MCEstimate summarize(const std::vector<double>& values, std::uint64_t seed) {
  MCEstimate est;
  est.n_paths = values.size();
  est.seed = seed;
  const double n = static_cast<double>(values.size());
  est.mean = pairwise_sum(values) / n;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - est.mean) * (values[i] - est.mean);
  est.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  return est;
}

inline PathSummary simulate_exit(const Point& x0, const Domain& domain, double s, double dt, double t_max,
                                 const GridFn* V, Rng& rng, std::optional<Sampler> sampler = {}) {
  if (!domain.contains(x0)) throw Error(ErrorCode::out_of_range, "start point must be interior");
  if (!(dt > 0.0) || !(dt <= t_max)) throw Error(ErrorCode::out_of_range, "need 0 < dt <= t_max");
  return detail::walk(x0, domain, s, dt, t_max, V, rng, sampler.value_or(default_sampler(domain.dim())),
                      [](long, const Point&, double) {});
}

/// Mean of min(tau, t_max); `censored` counts paths alive at t_max.
inline MCEstimate mc_exit_time(const Point& x0, const Domain& domain, double s, const McOptions& opts) {
  detail::check_options(opts);
  const auto paths = detail::run_paths<PathSummary>(opts.n_paths, opts.seed, opts.workers, [&](std::size_t, Rng& rng) {
    return simulate_exit(x0, domain, s, opts.dt, opts.t_max, nullptr, rng, opts.sampler);
  });
  std::vector<double> values(paths.size());
  std::size_t censored = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    values[i] = paths[i].exit_time;
    censored += paths[i].censored ? 1 : 0;
  }
  auto est = summarize(values, opts.seed);
  est.censored = censored;
  return est;
}

/// Feynman-Kac semigroup E^x[exp(-int_0^t V(X)) f(X_t) 1{tau > t}]; f is interpolated, V looked up at the nearest node.
inline MCEstimate fk_semigroup(const Point& x0, const GridFn& V, const GridFn& f, double s, double t, McOptions opts) {
  V.check_same(f);
  if (!(t > 0.0)) throw Error(ErrorCode::out_of_range, "time must be positive");
  opts.t_max = t;
  if (!(opts.dt > 0.0) || opts.dt > t) throw Error(ErrorCode::out_of_range, "need 0 < dt <= t");
  const auto& domain = V.grid()->domain();
  const bool killed = V.sup_norm() > 0.0;
  const auto values = detail::run_paths<double>(opts.n_paths, opts.seed, opts.workers, [&](std::size_t, Rng& rng) {
    const auto p = simulate_exit(x0, domain, s, opts.dt, t, killed ? &V : nullptr, rng, opts.sampler);
    return p.censored ? std::exp(-p.fk_integral) * f.interpolate(p.final_position) : 0.0;
  });
  return summarize(values, opts.seed);
}

/// E^x[exp(-int_0^t V) 1{tau > t}] at each requested time (times must be multiples of dt, up to rounding).
/// Returns per-path weights, row-major [path][time].
inline std::vector<std::vector<double>> survival_weights(const Point& x0, const GridFn& V, double s,
                                                         const std::vector<double>& times, const McOptions& opts) {
  if (times.empty()) return {};
  std::vector<long> ticks;
  for (double t : times) ticks.push_back(std::llround(t / opts.dt));
  const auto& domain = V.grid()->domain();
  const bool killed = V.sup_norm() > 0.0;
  const double t_end = static_cast<double>(ticks.back()) * opts.dt;
  return detail::run_paths<std::vector<double>>(opts.n_paths, opts.seed, opts.workers, [&](std::size_t, Rng& rng) {
    std::vector<double> w(ticks.size(), 0.0);
    std::size_t next = 0;
    detail::walk(x0, domain, s, opts.dt, t_end, killed ? &V : nullptr, rng,
                 opts.sampler.value_or(default_sampler(domain.dim())), [&](long k, const Point&, double integral) {
                   while (next < ticks.size() && ticks[next] == k) w[next++] = std::exp(-integral);
                 });
    return w;
  });
}

/// Survival probability curve (weights averaged over paths) at the given times.
inline std::vector<double> survival_curve(const Point& x0, const GridFn& V, double s, const std::vector<double>& times,
                                          const McOptions& opts) {
  const auto w = survival_weights(x0, V, s, times, opts);
  std::vector<double> out(times.size());
  std::vector<double> column(w.size());
  for (std::size_t j = 0; j < times.size(); ++j) {
    for (std::size_t i = 0; i < w.size(); ++i) column[i] = w[i][j];
    out[j] = pairwise_sum(column) / static_cast<double>(w.size());
  }
  return out;
}

/// Least-squares decay rate of the killed semigroup over [t1, t2]; error bar from 10 batch means.
inline MCEstimate mc_principal_eigenvalue(const Point& x0, const GridFn& V, double s, double t1, double t2,
                                          McOptions opts, int n_times = 11) {
  if (!(t1 > 0.0) || !(t2 > t1)) throw Error(ErrorCode::out_of_range, "need 0 < t1 < t2");
  if (n_times < 2) throw Error(ErrorCode::out_of_range, "need at least two sample times");
  constexpr std::size_t batches = 10;
  if (opts.n_paths < 10 * batches) throw Error(ErrorCode::out_of_range, "need at least 100 paths");
  opts.t_max = t2;
  std::vector<double> times(static_cast<std::size_t>(n_times));
  for (int k = 0; k < n_times; ++k) times[k] = t1 + (t2 - t1) * k / (n_times - 1);
  const auto w = survival_weights(x0, V, s, times, opts);

  std::size_t survivors = 0;
  for (const auto& row : w) survivors += row.back() > 0.0 ? 1 : 0;
  if (survivors < 100) {
    throw Error(ErrorCode::insufficient_survivors,
                std::to_string(survivors) + " paths alive at t2; need 100 (reduce t2 or add paths)");
  }

  const auto slope_of = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> y(times.size());
    std::vector<double> column(hi - lo);
    for (std::size_t j = 0; j < times.size(); ++j) {
      for (std::size_t i = lo; i < hi; ++i) column[i - lo] = w[i][j];
      const double m = pairwise_sum(column) / static_cast<double>(hi - lo);
      if (!(m > 0.0)) throw Error(ErrorCode::insufficient_survivors, "a batch has no survivors at some time");
      y[j] = -std::log(m);
    }
    double tm = 0.0;
    double ym = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      tm += times[j];
      ym += y[j];
    }
    tm /= static_cast<double>(times.size());
    ym /= static_cast<double>(times.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < times.size(); ++j) {
      num += (times[j] - tm) * (y[j] - ym);
      den += (times[j] - tm) * (times[j] - tm);
    }
    return num / den;
  };

  MCEstimate est;
  est.n_paths = opts.n_paths;
  est.seed = opts.seed;
  est.censored = survivors;
  est.mean = slope_of(0, w.size());
  const std::size_t per = w.size() / batches;
  std::vector<double> b(batches);
  for (std::size_t k = 0; k < batches; ++k) b[k] = slope_of(k * per, (k + 1) * per);
  const double bm = pairwise_sum(b) / batches;
  double var = 0.0;
  for (double v : b) var += (v - bm) * (v - bm);
  est.std_error = std::sqrt(var / (batches - 1) / batches);
  return est;
}

/// E^x[int_0^{tau ^ t_max} exp(-int_0^r V) g(X_r) dr], the probabilistic solution of (A + V) u = g.
/// Both V and g are looked up at the nearest node, matching the grid solver's data.
inline MCEstimate mc_duhamel_solution(const Point& x0, const GridFn& V, const GridFn& g, double s,
                                      const McOptions& opts) {
  V.check_same(g);
  detail::check_options(opts);
  const auto& domain = V.grid()->domain();
  if (!domain.contains(x0)) throw Error(ErrorCode::out_of_range, "start point must be interior");
  const bool killed = V.sup_norm() > 0.0;
  const Sampler sampler = opts.sampler.value_or(default_sampler(domain.dim()));
  const auto values = detail::run_paths<double>(opts.n_paths, opts.seed, opts.workers, [&](std::size_t, Rng& rng) {
    double acc = 0.0;
    const long steps = std::llround(opts.t_max / opts.dt);
    detail::walk(x0, domain, s, opts.dt, opts.t_max, killed ? &V : nullptr, rng, sampler,
                 [&](long k, const Point& x, double integral) {
                   if (k < steps) acc += std::exp(-integral) * g.nearest(x) * opts.dt;
                 });
    return acc;
  });
  return summarize(values, opts.seed);
}

}  // namespace fracprodi
