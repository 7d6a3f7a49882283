// nlsr: run NLS time-integration studies from a JSON config.
//
// Exit codes: 0 success, 2 config error, 3 numerical failure (including
// failed sweep cells), 4 cache error, 1 anything else.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "nlsr/nlsr.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_other = 1;
constexpr int exit_config = 2;
constexpr int exit_numeric = 3;
constexpr int exit_cache = 4;

struct RunArgs {
  std::string config;
  std::vector<double> tau;
  unsigned threads = 0;
  std::string output_dir, cache_dir, study;
  std::uint64_t seed = 0;
};

int cmd_run(const RunArgs& a, const CLI::App& sub) {
  nlsr::CliConfig cfg = nlsr::load_config(a.config);
  nlsr::ConfigOverrides o;
  if (sub.count("--tau")) o.tau = a.tau;
  if (sub.count("--threads")) o.threads = a.threads;
  if (sub.count("--output-dir")) o.output_dir = a.output_dir;
  if (sub.count("--seed")) o.seed = a.seed;
  if (sub.count("--study")) o.only_study = a.study;
  nlsr::apply_overrides(cfg, o);
  nlsr::validate(cfg);

  nlsr::RunContext ctx;
  ctx.cache_dir = nlsr::resolve_cache_dir(a.cache_dir, cfg.cache_dir);
  ctx.threads = nlsr::effective_threads(cfg);

  std::size_t failed = 0;
  for (const auto& study : cfg.studies) {
    const auto rep = nlsr::run_study(study, ctx, cfg.output_dir);
    std::cout << rep.summary;
    for (const auto& f : rep.files) std::cout << "  wrote " << f.string() << "\n";
    failed += rep.failed_cells;
  }
  if (failed > 0) {
    std::cerr << "error: " << failed << " sweep cell(s) failed\n";
    return exit_numeric;
  }
  return exit_ok;
}

int cmd_list_methods() {
  std::printf("%-9s %-7s %-6s %s\n", "method", "kernel", "relax", "notes");
  for (const auto& m : nlsr::method_roster)
    std::printf("%-9s %-7s %-6s %s\n", std::string(m.name).c_str(), std::string(nlsr::StepKernel::kernel_id_name(m.kernel)).c_str(),
                std::string(nlsr::relax_mode_name(m.relax)).c_str(), std::string(m.note).c_str());
  std::printf("\nrelax v: twisted-variable kernels (LRI1, LRI_P, LRI2); relax u: LRI1 only; none: any kernel\n");
  return exit_ok;
}

// Broken phi2 for exercising the suite: sign of the constant term flipped.
nlsr::cplx phi2_sign_flipped(double y) {
  if (y == 0.0) return {-1e300, 0.0};
  const nlsr::cplx z{0.0, y};
  const nlsr::cplx ez{std::cos(y), std::sin(y)};
  return (z * ez - ez - 1.0) / (z * z);
}

int cmd_verify(std::size_t samples, const std::string& fault) {
  nlsr::VerifyOptions opts;
  opts.samples = samples;
  if (fault == "phi2-sign") opts.phi.phi2 = phi2_sign_flipped;
  else if (!fault.empty()) throw nlsr::ConfigError("unknown fault '" + fault + "' (known: phi2-sign)");

  const auto results = nlsr::run_verify(opts);
  bool ok = true;
  double total = 0.0;
  for (const auto& r : results) {
    std::printf("%-4s %-24s %7.3fs  %s\n", r.passed ? "ok" : "FAIL", r.name.c_str(), r.seconds, r.detail.c_str());
    ok = ok && r.passed;
    total += r.seconds;
  }
  std::printf("%s (%.2f s)\n", ok ? "all properties hold" : "property failures", total);
  return ok ? exit_ok : exit_numeric;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relaxed low-regularity integrators for the nonlinear Schroedinger equation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", nlsr::version);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run the studies in a config file");
  run_cmd->add_option("config", run.config, "JSON run document")->required();
  run_cmd->add_option("--tau", run.tau, "replace every study's tau list (repeatable)");
  run_cmd->add_option("--threads", run.threads, "worker threads (0 = all cores)");
  run_cmd->add_option("--output-dir", run.output_dir, "directory for CSV output");
  run_cmd->add_option("--cache-dir", run.cache_dir, "reference cache (beats NLSR_CACHE_DIR and the config)");
  run_cmd->add_option("--seed", run.seed, "seed for rough initial data in every study");
  run_cmd->add_option("--study", run.study, "run only the study with this name");

  app.add_subcommand("list-methods", "print the method roster");

  std::size_t samples = 1000000;
  std::string fault;
  auto* verify_cmd = app.add_subcommand("verify", "run the fast property suite");
  verify_cmd->add_option("--samples", samples, "random samples for the phi inequalities");
  verify_cmd->add_option("--inject-fault", fault, "check the checker: phi2-sign")->group("");

  std::string cache_dir;
  auto* cache_cmd = app.add_subcommand("cache", "inspect or clear the reference cache");
  cache_cmd->require_subcommand(1);
  cache_cmd->add_option("--cache-dir", cache_dir, "cache directory");
  auto* cache_info = cache_cmd->add_subcommand("info", "show cache location and size");
  auto* cache_clear = cache_cmd->add_subcommand("clear", "delete cached reference snapshots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (*run_cmd) return cmd_run(run, *run_cmd);
    if (app.got_subcommand("list-methods")) return cmd_list_methods();
    if (*verify_cmd) return cmd_verify(samples, fault);
    if (*cache_cmd) {
      const auto dir = nlsr::resolve_cache_dir(cache_dir, "");
      if (*cache_info) {
        const auto info = nlsr::cache_info(dir);
        std::printf("cache %s: %zu snapshot(s), %ju bytes\n", dir.string().c_str(), info.files, info.bytes);
      } else if (*cache_clear) {
        std::printf("removed %zu snapshot(s) from %s\n", nlsr::cache_clear(dir), dir.string().c_str());
      }
      return exit_ok;
    }
  } catch (const nlsr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const nlsr::CacheError& e) {
    std::cerr << "cache error: " << e.what() << "\n";
    return exit_cache;
  } catch (const nlsr::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_other;
  }
  return exit_other;
}
