#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "nlsr/nlsr.hpp"

using namespace nlsr;
namespace fs = std::filesystem;

namespace {

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("nlsr-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunContext quiet_context(const fs::path& cache) {
  RunContext ctx;
  ctx.cache_dir = cache;
  ctx.threads = 2;
  ctx.log = nullptr;
  return ctx;
}

ExperimentConfig small_convergence() {
  ExperimentConfig c;
  c.study = Study::Convergence;
  c.methods = {"LRI1", "RLRI1-v"};
  c.K = 64;
  c.data = {DataKind::Smooth, 2.0, 0};
  c.T = 0.2;
  c.tau_list = {0.02, 0.01, 0.005};
  c.reference = {1e-4, 64};
  return c;
}

} // namespace

// ---------------------------------------------------------------------------
// Snapshot cache

TEST(Cache, RoundTripIsBitExact) {
  TempDir dir;
  const auto g = make_grid(32);
  const auto u = rough_data(g, 2.0, 3);
  write_snapshot(dir.path / "a.nlsr", u);
  const auto back = read_snapshot(dir.path / "a.nlsr", g);
  ASSERT_TRUE(back);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ((*back)[i], u[i]);
  EXPECT_FALSE(fs::exists(dir.path / "a.nlsr.tmp"));
}

TEST(Cache, MissingFileIsAMiss) {
  TempDir dir;
  EXPECT_FALSE(read_snapshot(dir.path / "none.nlsr", make_grid(16)));
}

TEST(Cache, CorruptionIsDetected) {
  TempDir dir;
  const auto g = make_grid(16);
  const auto p = dir.path / "x.nlsr";
  write_snapshot(p, smooth_data(g));
  const std::string good = slurp(p);

  auto write = [&](const std::string& bytes) { std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes; };
  write("XLSR1" + good.substr(5));
  EXPECT_THROW(read_snapshot(p, g), CacheError);
  write(good.substr(0, good.size() - 3));
  EXPECT_THROW(read_snapshot(p, g), CacheError);
  write(good + "z");
  EXPECT_THROW(read_snapshot(p, g), CacheError);
  write(good);
  EXPECT_THROW(read_snapshot(p, make_grid(32)), CacheError);

  std::string nan = good;
  const double q = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan.data() + 5 + 8, &q, sizeof q);
  write(nan);
  EXPECT_THROW(read_snapshot(p, g), CacheError);
}

TEST(Cache, InfoAndClearTouchOnlySnapshots) {
  TempDir dir;
  const auto g = make_grid(16);
  write_snapshot(dir.path / "a.nlsr", smooth_data(g));
  write_snapshot(dir.path / "b.nlsr", smooth_data(g));
  std::ofstream(dir.path / "keep.txt") << "x";
  const auto info = cache_info(dir.path);
  EXPECT_EQ(info.files, 2u);
  EXPECT_EQ(info.bytes, 2u * (5 + 8 + 16 * 16));
  EXPECT_EQ(cache_clear(dir.path), 2u);
  EXPECT_TRUE(fs::exists(dir.path / "keep.txt"));
  EXPECT_EQ(cache_info(dir.path / "absent").files, 0u);
}

TEST(Cache, DirectoryPrecedence) {
  ::unsetenv("NLSR_CACHE_DIR");
  EXPECT_EQ(resolve_cache_dir("", ""), fs::path(".nlsr_cache"));
  EXPECT_EQ(resolve_cache_dir("", "cfg"), fs::path("cfg"));
  ::setenv("NLSR_CACHE_DIR", "env", 1);
  EXPECT_EQ(resolve_cache_dir("", "cfg"), fs::path("env"));
  EXPECT_EQ(resolve_cache_dir("flag", "cfg"), fs::path("flag"));
  ::unsetenv("NLSR_CACHE_DIR");
}

TEST(Cache, KeyDependsOnEveryInput) {
  const auto g = make_grid(32);
  const auto u = rough_data(g, 2.0, 1);
  const NonlinearityParams p;
  const std::string k = reference_key(u, 1.0, 5e-5, p);
  EXPECT_EQ(k.size(), 16u);
  EXPECT_EQ(k, reference_key(u, 1.0, 5e-5, p));
  EXPECT_NE(k, reference_key(u, 2.0, 5e-5, p));
  EXPECT_NE(k, reference_key(u, 1.0, 1e-4, p));
  EXPECT_NE(k, reference_key(u, 1.0, 5e-5, {-1.0, 1}));
  EXPECT_NE(k, reference_key(rough_data(g, 2.0, 2), 1.0, 5e-5, p));
}

TEST(Reference, CachedAndRecomputedAgree) {
  TempDir dir;
  const auto ctx = quiet_context(dir.path);
  const auto u0 = smooth_data(make_grid(32));
  bool hit = true;
  const auto a = reference_solution(u0, 0.1, 1e-3, 64, {}, ctx, &hit);
  EXPECT_FALSE(hit);
  const auto b = reference_solution(u0, 0.1, 1e-3, 64, {}, ctx, &hit);
  EXPECT_TRUE(hit);
  EXPECT_EQ(l2_norm(a - b), 0.0);
  EXPECT_EQ(a.size(), 64u);

  // corrupt every cached file: the reference is recomputed, not trusted
  for (const auto& e : fs::directory_iterator(dir.path)) std::ofstream(e.path(), std::ios::trunc) << "junk";
  const auto c = reference_solution(u0, 0.1, 1e-3, 64, {}, ctx, &hit);
  EXPECT_FALSE(hit);
  EXPECT_EQ(l2_norm(a - c), 0.0);
}

TEST(Reference, ZeroTimeIsInitialData) {
  TempDir dir;
  const auto u0 = smooth_data(make_grid(32));
  const auto r = reference_solution(u0, 0.0, 1e-3, 64, {}, quiet_context(dir.path));
  EXPECT_EQ(l2_norm(r - embed(u0, make_grid(64))), 0.0);
}

// ---------------------------------------------------------------------------
// Fitting

TEST(Fit, RecoversPowerLaw) {
  std::vector<double> x{0.1, 0.05, 0.025, 0.0125}, y;
  for (double t : x) y.push_back(3.0 * t * t);
  const auto f = fit_loglog(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
  EXPECT_EQ(f.points, 4u);
  EXPECT_EQ(f.tau_min, 0.0125);
}

TEST(Fit, SkipsNonPositiveAndNeedsTwoPoints) {
  const auto f = fit_loglog({0.1, 0.05, 0.02}, {1.0, std::nan(""), 0.0});
  EXPECT_EQ(f.points, 1u);
  EXPECT_FALSE(f.ok());
}

// ---------------------------------------------------------------------------
// Studies

TEST(Study, ConvergenceOnSmoothDataIsSecondOrder) {
  TempDir dir;
  const auto r = run_convergence(small_convergence(), quiet_context(dir.path));
  ASSERT_EQ(r.rows.size(), 6u);
  for (const auto& row : r.rows) EXPECT_EQ(row.status, "ok");
  ASSERT_EQ(r.slopes.size(), 2u);
  for (const auto& s : r.slopes) EXPECT_NEAR(s.fit.slope, 2.0, 0.2) << s.method;
}

TEST(Study, FloorExcludesSaturatedPoints) {
  TempDir dir;
  auto cfg = small_convergence();
  cfg.reference.tau_ref = 4e-3; // deliberately poor reference
  const auto r = run_convergence(cfg, quiet_context(dir.path));
  EXPECT_GT(r.reference_floor, 0.0);
  for (const auto& s : r.slopes) EXPECT_LT(s.fit.points, 3u);
}

TEST(Study, FailedCellsAreRecordedNotFatal) {
  TempDir dir;
  auto cfg = small_convergence();
  cfg.methods = {"Lawson"};
  cfg.solver = {1e-14, 1};
  const auto r = run_convergence(cfg, quiet_context(dir.path));
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.status.rfind("failed: ", 0), 0u);
    EXPECT_EQ(row.status.find(','), std::string::npos);
  }
}

TEST(Study, CsvOutputIsDeterministic) {
  TempDir dir;
  const auto ctx = quiet_context(dir.path / "cache");
  ExperimentConfig g;
  g.study = Study::GammaStats;
  g.methods = {"RLRI1-v", "RLRI-u"};
  g.K = 64;
  g.data = {DataKind::Rough, 2.0, 11};
  g.T = 0.2;
  g.tau_list = {0.02, 0.01};
  g.gamma_series_tau = 0.02;

  const auto a = run_study(g, ctx, dir.path / "a");
  auto ctx4 = ctx;
  ctx4.threads = 4;
  const auto b = run_study(g, ctx4, dir.path / "b");
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) EXPECT_EQ(slurp(a.files[i]), slurp(b.files[i])) << a.files[i];

  const std::string series = slurp(a.files[0]);
  EXPECT_EQ(series.rfind("study,method,theta,seed,K,tau,n,t_tilde,gamma\n", 0), 0u);
}

TEST(Study, LongtimeRowsAndSummary) {
  TempDir dir;
  ExperimentConfig c;
  c.study = Study::LongtimeMass;
  c.methods = {"RLRI1-v", "LRI1"};
  c.K = 64;
  c.data = {DataKind::Rough, 2.0, 1};
  c.T = 1.0;
  c.tau_list = {0.05};
  const auto r = run_longtime_mass(c, quiet_context(dir.path));
  ASSERT_EQ(r.summary.size(), 2u);
  EXPECT_LE(r.summary[0].max_err, 1e-13);
  EXPECT_GT(r.summary[1].max_err, 1e-13);
  EXPECT_EQ(r.rows.size(), r.summary[0].steps + r.summary[1].steps);
}

TEST(Study, WritesMetadataSidecar) {
  TempDir dir;
  const auto rep = run_study(small_convergence(), quiet_context(dir.path / "c"), dir.path / "out");
  const auto meta = nlohmann::json::parse(slurp(dir.path / "out" / "convergence_meta.json"));
  EXPECT_EQ(meta["version"], version);
  EXPECT_EQ(meta["reference"]["method"], "LRI1");
  EXPECT_EQ(rep.failed_cells, 0u);
  EXPECT_NE(rep.summary.find("RLRI1-v"), std::string::npos);
}

TEST(Study, ValidationCatchesBadSweeps) {
  auto c = small_convergence();
  c.tau_list = {0.01, 0.02};
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_convergence();
  c.reference.tau_ref = 0.01;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_convergence();
  c.reference.K_ref = 32;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_convergence();
  c.study = Study::GammaStats;
  EXPECT_THROW(c.validate(), ConfigError); // LRI1 is not relaxed
  c = small_convergence();
  c.methods = {"Euler"};
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Config documents

TEST(Config, ParsesFullDocument) {
  const auto cfg = parse_config(R"({
    // comments are allowed
    "output_dir": "out", "threads": 3, "seed": 9,
    "studies": [
      {"study": "convergence", "name": "h2", "methods": ["RLRI1-v", "LRI1"], "K": 256, "T": 0.5,
       "data": {"kind": "rough", "theta": 2}, "tau_sweep": {"base": 0.1, "j_min": 2, "j_max": 4},
       "reference": {"method": "LRI1", "tau_ref": 1e-4, "K_ref": 512}, "error_norm_s": 1},
      {"study": "longtime_mass", "methods": ["RLRI-u"], "seed": 4, "endpoint": "unrelaxed"}
    ]})");
  EXPECT_EQ(cfg.output_dir, "out");
  EXPECT_EQ(cfg.threads, 3u);
  ASSERT_EQ(cfg.studies.size(), 2u);
  const auto& a = cfg.studies[0];
  EXPECT_EQ(a.label(), "h2");
  EXPECT_EQ(a.data.kind, DataKind::Rough);
  EXPECT_EQ(a.data.seed, 9u);
  EXPECT_EQ(a.tau_list, (std::vector<double>{0.025, 0.0125, 0.00625}));
  EXPECT_EQ(a.reference.K_ref, 512u);
  const auto& b = cfg.studies[1];
  EXPECT_EQ(b.T, 100.0);
  EXPECT_EQ(b.tau_list, std::vector<double>{0.02});
  EXPECT_EQ(b.data.seed, 4u);
  EXPECT_EQ(b.endpoint, EndpointPolicy::Unrelaxed);
  EXPECT_NO_THROW(validate(cfg));
}

TEST(Config, UnknownKeyReportsPathAndLine) {
  try {
    parse_config("{\n  \"studies\": [\n    {\"study\": \"convergence\", \"methods\": [\"LRI1\"],\n     \"tua_list\": [0.1]}\n  ]\n}");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("studies[0].tua_list"), std::string::npos) << m;
    EXPECT_NE(m.find("line 4"), std::string::npos) << m;
  }
}

TEST(Config, SyntaxErrorReportsLineAndColumn) {
  try {
    parse_config("{\n  \"studies\": [\n    {\"study\": }\n  ]\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(parse_config(R"({"studies": []})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"studies": [{"study": "sweep", "methods": ["LRI1"]}]})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"studies": [{"study": "convergence", "methods": ["LRI1"], "K": -4}]})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"studies": [{"study": "convergence", "methods": ["LRI1"], "reference": {"method": "Strang"}}]})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"studies": [{"study": "convergence", "methods": ["LRI1"]},
                                            {"study": "convergence", "methods": ["LRI1"]}]})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"studies": [{"study": "convergence", "methods": ["LRI1"], "tau_list": [0.1],
                                             "tau_sweep": {"base": 0.1, "j_min": 1, "j_max": 2}}]})"),
               ConfigError);
}

TEST(Config, OverridesReplaceSweepsAndSeeds) {
  auto cfg = parse_config(R"({"seed": 1, "studies": [
      {"study": "convergence", "name": "a", "methods": ["LRI1"]},
      {"study": "gamma_stats", "name": "b", "methods": ["RLRI1-v"], "seed": 5}]})");
  ConfigOverrides o;
  o.tau = std::vector<double>{0.01, 0.04, 0.02, 0.04};
  o.seed = 77;
  o.threads = 2;
  apply_overrides(cfg, o);
  for (const auto& s : cfg.studies) {
    EXPECT_EQ(s.tau_list, (std::vector<double>{0.04, 0.02, 0.01}));
    EXPECT_EQ(s.data.seed, 77u);
  }
  EXPECT_EQ(effective_threads(cfg), 2u);

  ConfigOverrides only;
  only.only_study = "b";
  apply_overrides(cfg, only);
  ASSERT_EQ(cfg.studies.size(), 1u);
  EXPECT_EQ(cfg.studies[0].label(), "b");
  only.only_study = "zzz";
  EXPECT_THROW(apply_overrides(cfg, only), ConfigError);
}

TEST(Config, DefaultSweepIsDyadic) {
  const auto cfg = parse_config(R"({"studies": [{"study": "convergence", "methods": ["LRI1"]}]})");
  const auto& t = cfg.studies[0].tau_list;
  ASSERT_EQ(t.size(), 6u);
  EXPECT_DOUBLE_EQ(t.front(), 0.1 / 16);
  EXPECT_DOUBLE_EQ(t.back(), 0.1 / 512);
}

// ---------------------------------------------------------------------------

TEST(Verify, SuitePassesAndCatchesInjectedFault) {
  VerifyOptions opts;
  opts.samples = 20000;
  for (const auto& r : run_verify(opts)) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;

  opts.phi.phi2 = [](double y) {
    if (y == 0.0) return cplx{-1e300, 0.0};
    const cplx z{0.0, y};
    const cplx ez{std::cos(y), std::sin(y)};
    return (z * ez - ez - 1.0) / (z * z);
  };
  bool caught = false;
  for (const auto& r : run_verify(opts))
    if (r.name == "phi2-bound") caught = !r.passed;
  EXPECT_TRUE(caught);
}
