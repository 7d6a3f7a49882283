#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "nlsr/cache.hpp"
#include "nlsr/initial_data.hpp"
#include "nlsr/relaxation.hpp"
#include "nlsr/version.hpp"

namespace nlsr {

enum class Study { Convergence, GammaStats, LongtimeMass, Efficiency };

inline std::string_view study_name(Study s) {
  switch (s) {
  case Study::Convergence: return "convergence";
  case Study::GammaStats: return "gamma_stats";
  case Study::LongtimeMass: return "longtime_mass";
  case Study::Efficiency: return "efficiency";
  }
  return "?";
}

inline std::optional<Study> parse_study(std::string_view s) {
  for (auto st : {Study::Convergence, Study::GammaStats, Study::LongtimeMass, Study::Efficiency})
    if (s == study_name(st)) return st;
  return std::nullopt;
}

/// Reference solutions always come from unrelaxed LRI1.
struct ReferenceSettings {
  double tau_ref = 5e-5;
  std::size_t K_ref = 4096;
};

struct ExperimentConfig {
  std::string name; // file prefix; empty means the study name
  Study study = Study::Convergence;
  std::vector<std::string> methods;
  std::size_t K = 1024;
  InitialDataSpec data;
  NonlinearityParams params;
  SolverOptions solver;
  double T = 1.0;
  std::vector<double> tau_list;
  double error_norm_s = 1.0;
  ReferenceSettings reference;
  double gamma_series_tau = 0.01;
  EndpointPolicy endpoint = EndpointPolicy::RelaxedMatched;

  std::string label() const { return name.empty() ? std::string(study_name(study)) : name; }

  std::vector<MethodSpec> method_specs() const {
    std::vector<MethodSpec> out;
    for (const auto& m : methods) {
      auto spec = lookup_method(m, params, solver);
      if (!spec) throw ConfigError("unknown method '" + m + "' (see list-methods)");
      out.push_back(*spec);
    }
    return out;
  }

  void validate() const {
    params.validate();
    data.validate();
    make_grid(K);
    if (methods.empty()) throw ConfigError(label() + ": no methods given");
    for (const auto& m : method_specs()) {
      m.validate();
      if (study == Study::GammaStats && m.relax == RelaxMode::NONE)
        throw ConfigError(label() + ": gamma statistics need relaxed methods, got " + m.name);
    }
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError(label() + ": T must be finite and > 0");
    if (tau_list.empty()) throw ConfigError(label() + ": tau_list is empty");
    for (std::size_t i = 0; i < tau_list.size(); ++i) {
      const double tau = tau_list[i];
      if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError(label() + ": tau values must be finite and > 0");
      if (tau > T) throw ConfigError(label() + ": tau " + std::to_string(tau) + " exceeds T");
      if (i > 0 && !(tau < tau_list[i - 1])) throw ConfigError(label() + ": tau_list must be strictly descending");
    }
    if (!(error_norm_s >= 0.0)) throw ConfigError(label() + ": error_norm_s must be >= 0");
    if (study == Study::Convergence || study == Study::Efficiency) {
      make_grid(reference.K_ref);
      if (reference.K_ref < K) throw ConfigError(label() + ": reference K_ref must be >= K");
      if (!(reference.tau_ref > 0.0 && reference.tau_ref < tau_list.back()))
        throw ConfigError(label() + ": reference tau_ref must be positive and below min(tau_list)");
    }
    if (study == Study::GammaStats && !(gamma_series_tau > 0.0 && gamma_series_tau <= T))
      throw ConfigError(label() + ": gamma_series_tau must lie in (0, T]");
  }
};

struct RunContext {
  std::filesystem::path cache_dir = ".nlsr_cache";
  unsigned threads = 1;
  std::ostream* log = &std::cerr;
};

// ---------------------------------------------------------------------------
// Work pool

/// Runs body(i) for i in [0, n) on up to `threads` workers. Cells own their
/// results, so output order never depends on scheduling.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Reference solutions

struct Reference {
  SpectralState state; // on the K_ref grid
  double floor = 0.0;  // estimated error of `state` in the study norm
  bool cache_hit = false;
};

inline std::string reference_key(const SpectralState& u0_fine, double T, double tau_ref, const NonlinearityParams& params) {
  Hasher h;
  h.bytes("LRI1", 4);
  const std::uint64_t K = u0_fine.size();
  h.value(K).value(T).value(tau_ref).value(params.lambda).value(params.p);
  h.bytes(u0_fine.coeffs().data(), u0_fine.size() * sizeof(cplx));
  return hex64(h.digest());
}

/// LRI1 solution at T with step tau_ref on the K_ref grid, read from or
/// written to the snapshot cache. A corrupt cache file is recomputed.
inline SpectralState reference_solution(const SpectralState& u0, double T, double tau_ref, std::size_t K_ref,
                                        const NonlinearityParams& params, const RunContext& ctx,
                                        bool* cache_hit = nullptr) {
  const GridPtr fine = make_grid(K_ref);
  SpectralState u0f = embed(u0, fine);
  if (cache_hit) *cache_hit = false;
  if (T == 0.0) return u0f;

  const auto path = ctx.cache_dir / ("ref-" + reference_key(u0f, T, tau_ref, params) + ".nlsr");
  try {
    if (auto hit = read_snapshot(path, fine)) {
      if (cache_hit) *cache_hit = true;
      return *hit;
    }
  } catch (const CacheError& e) {
    if (ctx.log) *ctx.log << "warning: " << e.what() << "; recomputing reference\n";
  }

  const MethodSpec lri1{"LRI1", StepKernel{KernelId::LRI1, params, {}}, RelaxMode::NONE};
  SpectralState ref = integrate(lri1, u0f, T, tau_ref).final_state;
  try {
    write_snapshot(path, ref);
  } catch (const CacheError& e) {
    if (ctx.log) *ctx.log << "warning: " << e.what() << "; reference not cached\n";
  } catch (const std::filesystem::filesystem_error& e) {
    if (ctx.log) *ctx.log << "warning: " << e.what() << "; reference not cached\n";
  }
  return ref;
}

/// Reference plus a Richardson estimate of its own error: for a second-order
/// scheme, ||ref(tau) - ref(2 tau)|| / 3.
inline Reference make_reference(const SpectralState& u0, double T, const ReferenceSettings& settings,
                                const NonlinearityParams& params, double norm_s, const RunContext& ctx) {
  Reference r;
  r.state = reference_solution(u0, T, settings.tau_ref, settings.K_ref, params, ctx, &r.cache_hit);
  if (T == 0.0) return r;
  const double coarse_tau = 2.0 * settings.tau_ref;
  if (coarse_tau <= T) {
    const SpectralState coarse = reference_solution(u0, T, coarse_tau, settings.K_ref, params, ctx);
    r.floor = hs_norm(r.state - coarse, norm_s) / 3.0;
  }
  return r;
}

/// Error of a coarse-grid state against a (finer) reference in H^s.
inline double reference_error(const SpectralState& u, const SpectralState& ref, double s) {
  return hs_norm(embed(u, ref.grid()) - ref, s);
}

// ---------------------------------------------------------------------------
// Slope fitting

struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  std::size_t points = 0;
  double tau_min = std::numeric_limits<double>::quiet_NaN();
  double tau_max = std::numeric_limits<double>::quiet_NaN();
  bool ok() const { return points >= 2 && std::isfinite(slope); }
};

/// Ordinary least squares of log(y) on log(x) over the positive, finite pairs.
inline SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  SlopeFit fit;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
    fit.tau_min = fit.points ? std::min(fit.tau_min, x[i]) : x[i];
    fit.tau_max = fit.points ? std::max(fit.tau_max, x[i]) : x[i];
    ++fit.points;
  }
  if (fit.points < 2) return fit;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
  mx /= lx.size();
  my /= ly.size();
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

/// Points closer than this factor to the reference error floor are left out of fits.
inline constexpr double floor_factor = 10.0;

// ---------------------------------------------------------------------------
// Records

struct ConvergenceRow {
  std::string study, method, relax_mode, theta;
  std::uint64_t seed = 0;
  std::size_t K = 0;
  double T = 0.0, tau = 0.0, error = 0.0, wall_time = 0.0;
  std::string status = "ok";
};

struct SlopeRow {
  std::string study, method, theta;
  std::uint64_t seed = 0;
  std::size_t K = 0;
  SlopeFit fit;
  double floor = 0.0;
};

struct GammaSeriesRow {
  std::string study, method, theta;
  std::uint64_t seed = 0;
  std::size_t K = 0;
  double tau = 0.0;
  std::size_t n = 0;
  double t_tilde = 0.0, gamma = 1.0;
};

struct DGammaRow {
  std::string study, method, theta;
  std::uint64_t seed = 0;
  std::size_t K = 0;
  double T = 0.0, tau = 0.0, d_gamma = 0.0, gamma_min = 0.0, gamma_max = 0.0;
  std::size_t steps = 0;
  std::string status = "ok";
};

struct LongtimeRow {
  std::string study, method, theta;
  std::uint64_t seed = 0;
  std::size_t K = 0;
  double tau = 0.0, t_tilde = 0.0, mass_rel_err = 0.0;
};

struct LongtimeSummaryRow {
  std::string study, method, theta;
  std::uint64_t seed = 0;
  std::size_t K = 0;
  double T = 0.0, tau = 0.0, max_err = 0.0, min_err = 0.0;
  std::size_t steps = 0;
  std::string status = "ok";
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::vector<SlopeRow> slopes;
  double reference_floor = 0.0;
  bool reference_cache_hit = false;
};

struct GammaStatsResult {
  std::vector<GammaSeriesRow> series;
  std::vector<DGammaRow> table;
  std::vector<SlopeRow> slopes;
};

struct LongtimeResult {
  std::vector<LongtimeRow> rows;
  std::vector<LongtimeSummaryRow> summary;
};

namespace detail {

inline std::string failure_status(const std::exception& e) {
  std::string s = std::string("failed: ") + e.what();
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline IntegrateOptions integrate_options(const ExperimentConfig& cfg) {
  IntegrateOptions o;
  o.endpoint = cfg.endpoint;
  return o;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Studies

/// H^s error at T against the LRI1 reference for every (method, tau) cell,
/// plus one log-log slope per method fitted above the reference floor.
/// `timed` runs cells one at a time so wall times are not contended.
inline ConvergenceResult run_convergence(const ExperimentConfig& cfg, const RunContext& ctx, bool timed = false) {
  cfg.validate();
  const auto methods = cfg.method_specs();
  const GridPtr grid = make_grid(cfg.K);
  const SpectralState u0 = make_initial_data(cfg.data, grid);
  const Reference ref = make_reference(u0, cfg.T, cfg.reference, cfg.params, cfg.error_norm_s, ctx);

  ConvergenceResult out;
  out.reference_floor = ref.floor;
  out.reference_cache_hit = ref.cache_hit;
  const std::string study(timed ? study_name(Study::Efficiency) : study_name(Study::Convergence));
  const std::size_t ntau = cfg.tau_list.size();
  out.rows.resize(methods.size() * ntau);

  parallel_for(out.rows.size(), timed ? 1u : ctx.threads, [&](std::size_t cell) {
    const auto& m = methods[cell / ntau];
    const double tau = cfg.tau_list[cell % ntau];
    ConvergenceRow& row = out.rows[cell];
    row = {study, m.name, std::string(relax_mode_name(m.relax)), cfg.data.label(), cfg.data.seed, cfg.K, cfg.T, tau,
           std::numeric_limits<double>::quiet_NaN(), 0.0, "ok"};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Trajectory traj = integrate(m, u0, cfg.T, tau, detail::integrate_options(cfg));
      row.wall_time = detail::seconds_since(t0);
      row.error = reference_error(traj.final_state, ref.state, cfg.error_norm_s);
    } catch (const NumericError& e) {
      row.wall_time = detail::seconds_since(t0);
      row.status = detail::failure_status(e);
    }
  });

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::vector<double> x, y;
    for (std::size_t j = 0; j < ntau; ++j) {
      const auto& row = out.rows[mi * ntau + j];
      if (row.status == "ok" && row.error > floor_factor * ref.floor) {
        x.push_back(row.tau);
        y.push_back(row.error);
      }
    }
    out.slopes.push_back({study, methods[mi].name, cfg.data.label(), cfg.data.seed, cfg.K, fit_loglog(x, y), ref.floor});
  }
  return out;
}

inline ConvergenceResult run_efficiency(const ExperimentConfig& cfg, const RunContext& ctx) {
  return run_convergence(cfg, ctx, true);
}

/// Per-step gamma series at gamma_series_tau, and d(gamma) = mean |gamma_n - 1|
/// over [0, T] for each tau with its log-log slope.
inline GammaStatsResult run_gamma_stats(const ExperimentConfig& cfg, const RunContext& ctx) {
  cfg.validate();
  const auto methods = cfg.method_specs();
  const GridPtr grid = make_grid(cfg.K);
  const SpectralState u0 = make_initial_data(cfg.data, grid);
  const std::string study(study_name(Study::GammaStats));
  const std::string theta = cfg.data.label();

  // cell layout per method: one series run, then one run per tau
  const std::size_t per = cfg.tau_list.size() + 1;
  std::vector<std::vector<GammaSeriesRow>> series(methods.size());
  std::vector<DGammaRow> table(methods.size() * cfg.tau_list.size());

  parallel_for(methods.size() * per, ctx.threads, [&](std::size_t cell) {
    const auto& m = methods[cell / per];
    const std::size_t j = cell % per;
    if (j == 0) {
      try {
        const Trajectory traj = integrate(m, u0, cfg.T, cfg.gamma_series_tau, detail::integrate_options(cfg));
        auto& rows = series[cell / per];
        for (const auto& s : traj.steps)
          rows.push_back({study, m.name, theta, cfg.data.seed, cfg.K, cfg.gamma_series_tau, s.n, s.t_start, s.gamma});
      } catch (const NumericError& e) {
        if (ctx.log) *ctx.log << "warning: " << m.name << " gamma series failed: " << e.what() << "\n";
      }
      return;
    }
    const double tau = cfg.tau_list[j - 1];
    DGammaRow& row = table[(cell / per) * cfg.tau_list.size() + (j - 1)];
    row = {study, m.name, theta, cfg.data.seed, cfg.K, cfg.T, tau, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, 0, "ok"};
    try {
      const Trajectory traj = integrate(m, u0, cfg.T, tau, detail::integrate_options(cfg));
      row.d_gamma = traj.d_gamma();
      row.steps = traj.steps.size();
      row.gamma_min = row.gamma_max = traj.steps.front().gamma;
      for (const auto& s : traj.steps) {
        row.gamma_min = std::min(row.gamma_min, s.gamma);
        row.gamma_max = std::max(row.gamma_max, s.gamma);
      }
    } catch (const NumericError& e) {
      row.status = detail::failure_status(e);
    }
  });

  GammaStatsResult out;
  for (auto& s : series) out.series.insert(out.series.end(), s.begin(), s.end());
  out.table = std::move(table);
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::vector<double> x, y;
    for (std::size_t j = 0; j < cfg.tau_list.size(); ++j) {
      const auto& row = out.table[mi * cfg.tau_list.size() + j];
      if (row.status == "ok") {
        x.push_back(row.tau);
        y.push_back(row.d_gamma);
      }
    }
    out.slopes.push_back({study, methods[mi].name, theta, cfg.data.seed, cfg.K, fit_loglog(x, y), 0.0});
  }
  return out;
}

/// Stepwise relative mass error | ||u_n|| - ||u_0|| | / ||u_0|| over [0, T]
/// for each (method, tau), with max/min summary rows.
inline LongtimeResult run_longtime_mass(const ExperimentConfig& cfg, const RunContext& ctx) {
  cfg.validate();
  const auto methods = cfg.method_specs();
  const GridPtr grid = make_grid(cfg.K);
  const SpectralState u0 = make_initial_data(cfg.data, grid);
  const std::string study(study_name(Study::LongtimeMass));
  const std::string theta = cfg.data.label();
  const std::size_t ntau = cfg.tau_list.size();

  std::vector<std::vector<LongtimeRow>> rows(methods.size() * ntau);
  std::vector<LongtimeSummaryRow> summary(methods.size() * ntau);
  parallel_for(rows.size(), ctx.threads, [&](std::size_t cell) {
    const auto& m = methods[cell / ntau];
    const double tau = cfg.tau_list[cell % ntau];
    auto& sum = summary[cell];
    sum = {study, m.name, theta, cfg.data.seed, cfg.K, cfg.T, tau, std::numeric_limits<double>::quiet_NaN(),
           std::numeric_limits<double>::quiet_NaN(), 0, "ok"};
    try {
      const Trajectory traj = integrate(m, u0, cfg.T, tau, detail::integrate_options(cfg));
      for (const auto& s : traj.steps)
        rows[cell].push_back({study, m.name, theta, cfg.data.seed, cfg.K, tau, s.t_end, s.mass_rel_err});
      sum.max_err = traj.max_mass_rel_err();
      sum.min_err = traj.min_mass_rel_err();
      sum.steps = traj.steps.size();
    } catch (const NumericError& e) {
      sum.status = detail::failure_status(e);
    }
  });

  LongtimeResult out;
  for (auto& r : rows) out.rows.insert(out.rows.end(), r.begin(), r.end());
  out.summary = std::move(summary);
  return out;
}

// ---------------------------------------------------------------------------
// CSV output (%.17g so reruns reproduce files byte for byte)

namespace csv {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Writer {
public:
  explicit Writer(const std::filesystem::path& path) : path_(path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    out_.open(path, std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  template <class... Cells>
  void row(const Cells&... cells) {
    std::lock_guard lock(mutex_);
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return num(v); }
  static std::string cell(unsigned long v) { return std::to_string(v); }
  static std::string cell(unsigned long long v) { return std::to_string(v); }

  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

} // namespace csv

inline void write_convergence_csv(const std::filesystem::path& path, const std::vector<ConvergenceRow>& rows) {
  csv::Writer w(path);
  w.row("study", "method", "relax_mode", "theta", "seed", "K", "T", "tau", "h1_error", "wall_time_s", "status");
  for (const auto& r : rows)
    w.row(r.study, r.method, r.relax_mode, r.theta, r.seed, r.K, r.T, r.tau, r.error, r.wall_time, r.status);
}

inline void write_slopes_csv(const std::filesystem::path& path, const std::vector<SlopeRow>& rows) {
  csv::Writer w(path);
  w.row("study", "method", "theta", "seed", "K", "slope", "points", "tau_min", "tau_max", "reference_floor");
  for (const auto& r : rows)
    w.row(r.study, r.method, r.theta, r.seed, r.K, r.fit.slope, r.fit.points, r.fit.tau_min, r.fit.tau_max, r.floor);
}

inline void write_gamma_series_csv(const std::filesystem::path& path, const std::vector<GammaSeriesRow>& rows) {
  csv::Writer w(path);
  w.row("study", "method", "theta", "seed", "K", "tau", "n", "t_tilde", "gamma");
  for (const auto& r : rows) w.row(r.study, r.method, r.theta, r.seed, r.K, r.tau, r.n, r.t_tilde, r.gamma);
}

inline void write_dgamma_csv(const std::filesystem::path& path, const std::vector<DGammaRow>& rows) {
  csv::Writer w(path);
  w.row("study", "method", "theta", "seed", "K", "T", "tau", "d_gamma", "gamma_min", "gamma_max", "steps", "status");
  for (const auto& r : rows)
    w.row(r.study, r.method, r.theta, r.seed, r.K, r.T, r.tau, r.d_gamma, r.gamma_min, r.gamma_max, r.steps, r.status);
}

inline void write_longtime_csv(const std::filesystem::path& path, const std::vector<LongtimeRow>& rows) {
  csv::Writer w(path);
  w.row("study", "method", "theta", "seed", "K", "tau", "t_tilde", "mass_rel_err");
  for (const auto& r : rows) w.row(r.study, r.method, r.theta, r.seed, r.K, r.tau, r.t_tilde, r.mass_rel_err);
}

inline void write_longtime_summary_csv(const std::filesystem::path& path, const std::vector<LongtimeSummaryRow>& rows) {
  csv::Writer w(path);
  w.row("study", "method", "theta", "seed", "K", "T", "tau", "mass_rel_err_max", "mass_rel_err_min", "steps", "status");
  for (const auto& r : rows)
    w.row(r.study, r.method, r.theta, r.seed, r.K, r.T, r.tau, r.max_err, r.min_err, r.steps, r.status);
}

} // namespace nlsr
