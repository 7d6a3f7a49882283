#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "nlsr/config.hpp"
#include "nlsr/experiments.hpp"

namespace nlsr {

/// What a finished study left behind.
struct StudyReport {
  std::string label;
  std::vector<std::filesystem::path> files;
  std::size_t failed_cells = 0;
  std::string summary; // human-readable table
};

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline nlohmann::json study_metadata(const ExperimentConfig& cfg) {
  nlohmann::json m;
  m["version"] = version;
  m["study"] = std::string(study_name(cfg.study));
  m["name"] = cfg.label();
  m["methods"] = cfg.methods;
  m["K"] = cfg.K;
  m["T"] = cfg.T;
  m["tau_list"] = cfg.tau_list;
  m["data"] = {{"kind", cfg.data.kind == DataKind::Smooth ? "smooth" : "rough"},
               {"theta", cfg.data.kind == DataKind::Smooth ? nlohmann::json(nullptr) : nlohmann::json(cfg.data.theta)},
               {"seed", cfg.data.seed},
               {"generator", "mt19937_64, 53-bit uniforms, real parts then imaginary parts"}};
  m["nonlinearity"] = {{"lambda", cfg.params.lambda}, {"p", cfg.params.p}};
  m["solver"] = {{"tolerance", cfg.solver.tolerance}, {"max_iterations", cfg.solver.max_iterations}};
  m["endpoint"] = cfg.endpoint == EndpointPolicy::RelaxedMatched ? "relaxed" : "unrelaxed";
  m["time_matching"] = "stepwise values at relaxed times t_tilde; no interpolation";
  if (cfg.study == Study::Convergence || cfg.study == Study::Efficiency) {
    m["error_norm_s"] = cfg.error_norm_s;
    m["reference"] = {{"method", "LRI1"}, {"tau_ref", cfg.reference.tau_ref}, {"K_ref", cfg.reference.K_ref}};
    m["fit"] = {{"method", "least squares on (log tau, log error)"},
                {"excluded", "points with error <= 10 x reference floor"},
                {"floor_estimate", "|| ref(tau_ref) - ref(2 tau_ref) ||_s / 3"}};
  }
  if (cfg.study == Study::GammaStats) m["gamma_series_tau"] = cfg.gamma_series_tau;
  return m;
}

} // namespace detail

/// Runs one study, writes its CSV files and metadata under `out_dir`, and
/// returns a printable summary.
inline StudyReport run_study(const ExperimentConfig& cfg, const RunContext& ctx, const std::filesystem::path& out_dir) {
  using detail::fmt;
  StudyReport rep;
  rep.label = cfg.label();
  std::filesystem::create_directories(out_dir);
  const auto file = [&](const std::string& suffix) {
    rep.files.push_back(out_dir / (rep.label + suffix));
    return rep.files.back();
  };
  nlohmann::json meta = detail::study_metadata(cfg);
  std::ostringstream s;
  s << "[" << rep.label << "] " << study_name(cfg.study) << ", data " << cfg.data.label() << ", K = " << cfg.K
    << ", T = " << cfg.T << "\n";

  switch (cfg.study) {
  case Study::Convergence:
  case Study::Efficiency: {
    const ConvergenceResult r = cfg.study == Study::Efficiency ? run_efficiency(cfg, ctx) : run_convergence(cfg, ctx);
    write_convergence_csv(file(".csv"), r.rows);
    write_slopes_csv(file("_slopes.csv"), r.slopes);
    meta["reference"]["floor"] = r.reference_floor;
    s << "  reference floor " << fmt("%.3e", r.reference_floor) << (r.reference_cache_hit ? " (cached)" : "") << "\n";
    s << "  method      slope   points  tau range\n";
    for (const auto& sl : r.slopes)
      s << "  " << sl.method << std::string(sl.method.size() < 10 ? 10 - sl.method.size() : 1, ' ')
        << fmt("%7.3f", sl.fit.slope) << "  " << sl.fit.points << "       " << fmt("%.3e", sl.fit.tau_min) << " .. "
        << fmt("%.3e", sl.fit.tau_max) << "\n";
    if (cfg.study == Study::Efficiency) {
      s << "  method      tau         error       wall [s]\n";
      for (const auto& row : r.rows)
        s << "  " << row.method << std::string(row.method.size() < 10 ? 10 - row.method.size() : 1, ' ')
          << fmt("%.3e", row.tau) << "   " << fmt("%.3e", row.error) << "   " << fmt("%.3f", row.wall_time) << "\n";
    }
    for (const auto& row : r.rows)
      if (row.status != "ok") {
        ++rep.failed_cells;
        s << "  FAILED " << row.method << " tau = " << row.tau << ": " << row.status << "\n";
      }
    break;
  }
  case Study::GammaStats: {
    const GammaStatsResult r = run_gamma_stats(cfg, ctx);
    write_gamma_series_csv(file("_series.csv"), r.series);
    write_dgamma_csv(file("_dgamma.csv"), r.table);
    write_slopes_csv(file("_slopes.csv"), r.slopes);
    s << "  method      d(gamma) slope   gamma range\n";
    for (std::size_t i = 0; i < r.slopes.size(); ++i) {
      double lo = 2.0, hi = 0.0;
      for (const auto& row : r.table)
        if (row.method == r.slopes[i].method && row.status == "ok") lo = std::min(lo, row.gamma_min), hi = std::max(hi, row.gamma_max);
      const auto& name = r.slopes[i].method;
      s << "  " << name << std::string(name.size() < 10 ? 10 - name.size() : 1, ' ') << fmt("%7.3f", r.slopes[i].fit.slope)
        << "          [" << fmt("%.6f", lo) << ", " << fmt("%.6f", hi) << "]\n";
    }
    for (const auto& row : r.table)
      if (row.status != "ok") {
        ++rep.failed_cells;
        s << "  FAILED " << row.method << " tau = " << row.tau << ": " << row.status << "\n";
      }
    break;
  }
  case Study::LongtimeMass: {
    const LongtimeResult r = run_longtime_mass(cfg, ctx);
    write_longtime_csv(file(".csv"), r.rows);
    write_longtime_summary_csv(file("_summary.csv"), r.summary);
    s << "  method      tau        max rel. mass err   min rel. mass err\n";
    for (const auto& row : r.summary) {
      s << "  " << row.method << std::string(row.method.size() < 10 ? 10 - row.method.size() : 1, ' ')
        << fmt("%.3e", row.tau) << "  " << fmt("%.3e", row.max_err) << "           " << fmt("%.3e", row.min_err) << "\n";
      if (row.status != "ok") {
        ++rep.failed_cells;
        s << "  FAILED " << row.method << ": " << row.status << "\n";
      }
    }
    break;
  }
  }

  const auto meta_path = file("_meta.json");
  std::ofstream(meta_path) << meta.dump(2) << "\n";
  rep.summary = s.str();
  return rep;
}

} // namespace nlsr
