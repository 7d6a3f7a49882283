#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "nlsr/experiments.hpp"

namespace nlsr {

/// Parsed run document: global settings plus one section per study.
struct CliConfig {
  std::string output_dir = "results";
  std::string cache_dir; // empty: NLSR_CACHE_DIR or the default
  unsigned threads = 0;  // 0: hardware concurrency
  std::uint64_t seed = 0;
  std::vector<ExperimentConfig> studies;
};

/// Command-line values that take precedence over the document.
struct ConfigOverrides {
  std::optional<std::vector<double>> tau;
  std::optional<unsigned> threads;
  std::optional<std::string> output_dir;
  std::optional<std::string> cache_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> only_study; // keep only the study with this name
};

namespace detail {

using json = nlohmann::json;

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Key-level errors carry the JSON path and, when the key text can be found,
// its line in the source.
class Reader {
public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    std::ostringstream os;
    os << "config: " << path << ": " << msg;
    const auto dot = path.find_last_of(".]");
    const std::string key = (dot == std::string::npos) ? path : path.substr(dot + 1);
    if (!key.empty()) {
      const auto pos = text_.find("\"" + key + "\"");
      if (pos != std::string::npos) os << " (line " << line_col(text_, pos).first << ")";
    }
    throw ConfigError(os.str());
  }

  void require_object(const json& j, const std::string& path) const {
    if (!j.is_object()) fail(path, "expected an object");
  }

  void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) const {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; });
      if (!known) fail(join(path, it.key()), "unknown key");
    }
  }

  double number(const json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
  }

  std::uint64_t unsigned_int(const json& j, const std::string& path) const {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0))
      fail(path, "expected a non-negative integer");
    return j.get<std::uint64_t>();
  }

  int integer(const json& j, const std::string& path) const {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
  }

  std::string string(const json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

private:
  const std::string& text_;
};

inline std::vector<double> tau_sweep(double base, int j_min, int j_max) {
  std::vector<double> out;
  for (int j = j_min; j <= j_max; ++j) out.push_back(base * std::ldexp(1.0, -j));
  return out;
}

inline ExperimentConfig parse_study_section(const Reader& r, const json& j, const std::string& path, std::uint64_t seed) {
  r.require_object(j, path);
  r.reject_unknown(j, path,
                   {"name", "study", "methods", "K", "T", "data", "nonlinearity", "solver", "tau_list", "tau_sweep",
                    "error_norm_s", "reference", "gamma_series_tau", "endpoint", "seed"});
  ExperimentConfig c;
  const auto key = [&](const char* k) { return Reader::join(path, k); };

  if (!j.contains("study")) r.fail(key("study"), "missing");
  const auto study = parse_study(r.string(j["study"], key("study")));
  if (!study) r.fail(key("study"), "expected one of convergence, gamma_stats, longtime_mass, efficiency");
  c.study = *study;
  if (j.contains("name")) c.name = r.string(j["name"], key("name"));

  if (!j.contains("methods") || !j["methods"].is_array()) r.fail(key("methods"), "expected a list of method names");
  for (std::size_t i = 0; i < j["methods"].size(); ++i)
    c.methods.push_back(r.string(j["methods"][i], key("methods") + "[" + std::to_string(i) + "]"));

  if (j.contains("K")) c.K = r.unsigned_int(j["K"], key("K"));
  if (j.contains("T")) c.T = r.number(j["T"], key("T"));

  if (c.study == Study::LongtimeMass) c.T = j.contains("T") ? c.T : 100.0;

  c.data.seed = seed;
  if (j.contains("seed")) c.data.seed = r.unsigned_int(j["seed"], key("seed"));
  if (j.contains("data")) {
    const auto& d = j["data"];
    const std::string p = key("data");
    r.require_object(d, p);
    r.reject_unknown(d, p, {"kind", "theta"});
    if (d.contains("kind")) {
      const std::string kind = r.string(d["kind"], Reader::join(p, "kind"));
      if (kind == "smooth") c.data.kind = DataKind::Smooth;
      else if (kind == "rough") c.data.kind = DataKind::Rough;
      else r.fail(Reader::join(p, "kind"), "expected \"smooth\" or \"rough\"");
    }
    if (d.contains("theta")) c.data.theta = r.number(d["theta"], Reader::join(p, "theta"));
  }

  if (j.contains("nonlinearity")) {
    const auto& n = j["nonlinearity"];
    const std::string p = key("nonlinearity");
    r.require_object(n, p);
    r.reject_unknown(n, p, {"lambda", "p"});
    if (n.contains("lambda")) c.params.lambda = r.number(n["lambda"], Reader::join(p, "lambda"));
    if (n.contains("p")) c.params.p = r.integer(n["p"], Reader::join(p, "p"));
  }

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    const std::string p = key("solver");
    r.require_object(s, p);
    r.reject_unknown(s, p, {"tolerance", "max_iterations"});
    if (s.contains("tolerance")) c.solver.tolerance = r.number(s["tolerance"], Reader::join(p, "tolerance"));
    if (s.contains("max_iterations")) c.solver.max_iterations = r.integer(s["max_iterations"], Reader::join(p, "max_iterations"));
  }

  if (j.contains("tau_list") && j.contains("tau_sweep")) r.fail(key("tau_sweep"), "give either tau_list or tau_sweep");
  if (j.contains("tau_list")) {
    const auto& t = j["tau_list"];
    if (!t.is_array()) r.fail(key("tau_list"), "expected a list of numbers");
    for (std::size_t i = 0; i < t.size(); ++i) c.tau_list.push_back(r.number(t[i], key("tau_list") + "[" + std::to_string(i) + "]"));
  } else if (j.contains("tau_sweep")) {
    const auto& s = j["tau_sweep"];
    const std::string p = key("tau_sweep");
    r.require_object(s, p);
    r.reject_unknown(s, p, {"base", "j_min", "j_max"});
    for (const char* k : {"base", "j_min", "j_max"})
      if (!s.contains(k)) r.fail(Reader::join(p, k), "missing");
    const int jmin = r.integer(s["j_min"], Reader::join(p, "j_min"));
    const int jmax = r.integer(s["j_max"], Reader::join(p, "j_max"));
    if (jmax < jmin) r.fail(Reader::join(p, "j_max"), "must be >= j_min");
    c.tau_list = tau_sweep(r.number(s["base"], Reader::join(p, "base")), jmin, jmax);
  } else {
    c.tau_list = c.study == Study::LongtimeMass ? std::vector<double>{0.02} : tau_sweep(0.1, 4, 9);
  }

  if (j.contains("error_norm_s")) c.error_norm_s = r.number(j["error_norm_s"], key("error_norm_s"));
  if (j.contains("reference")) {
    const auto& f = j["reference"];
    const std::string p = key("reference");
    r.require_object(f, p);
    r.reject_unknown(f, p, {"method", "tau_ref", "K_ref"});
    if (f.contains("method") && r.string(f["method"], Reader::join(p, "method")) != "LRI1")
      r.fail(Reader::join(p, "method"), "only LRI1 references are supported");
    if (f.contains("tau_ref")) c.reference.tau_ref = r.number(f["tau_ref"], Reader::join(p, "tau_ref"));
    if (f.contains("K_ref")) c.reference.K_ref = r.unsigned_int(f["K_ref"], Reader::join(p, "K_ref"));
  }
  if (j.contains("gamma_series_tau")) c.gamma_series_tau = r.number(j["gamma_series_tau"], key("gamma_series_tau"));
  if (j.contains("endpoint")) {
    const std::string e = r.string(j["endpoint"], key("endpoint"));
    if (e == "relaxed") c.endpoint = EndpointPolicy::RelaxedMatched;
    else if (e == "unrelaxed") c.endpoint = EndpointPolicy::Unrelaxed;
    else r.fail(key("endpoint"), "expected \"relaxed\" or \"unrelaxed\"");
  }
  return c;
}

} // namespace detail

/// Parses a run document. Syntax errors report line and column; semantic
/// errors report the key path. Unknown keys are rejected.
inline CliConfig parse_config(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (const auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ConfigError("config: syntax error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
  }
  const detail::Reader r(text);
  r.require_object(doc, "<root>");
  r.reject_unknown(doc, "", {"output_dir", "cache_dir", "threads", "seed", "studies"});

  CliConfig cfg;
  if (doc.contains("output_dir")) cfg.output_dir = r.string(doc["output_dir"], "output_dir");
  if (doc.contains("cache_dir")) cfg.cache_dir = r.string(doc["cache_dir"], "cache_dir");
  if (doc.contains("threads")) cfg.threads = static_cast<unsigned>(r.unsigned_int(doc["threads"], "threads"));
  if (doc.contains("seed")) cfg.seed = r.unsigned_int(doc["seed"], "seed");
  if (!doc.contains("studies") || !doc["studies"].is_array() || doc["studies"].empty())
    r.fail("studies", "expected a non-empty list of study sections");

  std::set<std::string> labels;
  for (std::size_t i = 0; i < doc["studies"].size(); ++i) {
    const std::string path = "studies[" + std::to_string(i) + "]";
    cfg.studies.push_back(detail::parse_study_section(r, doc["studies"][i], path, cfg.seed));
    if (!labels.insert(cfg.studies.back().label()).second)
      r.fail(path + ".name", "duplicate study name '" + cfg.studies.back().label() + "'");
  }
  return cfg;
}

inline CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Flags beat the document. --tau replaces every study's tau list (sorted
/// descending); --seed replaces every study's data seed.
inline void apply_overrides(CliConfig& cfg, const ConfigOverrides& o) {
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.cache_dir) cfg.cache_dir = *o.cache_dir;
  if (o.threads) cfg.threads = *o.threads;
  if (o.seed) {
    cfg.seed = *o.seed;
    for (auto& s : cfg.studies) s.data.seed = *o.seed;
  }
  if (o.tau) {
    std::vector<double> taus = *o.tau;
    std::sort(taus.begin(), taus.end(), std::greater<>());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    for (auto& s : cfg.studies) s.tau_list = taus;
  }
  if (o.only_study) {
    std::erase_if(cfg.studies, [&](const ExperimentConfig& s) { return s.label() != *o.only_study; });
    if (cfg.studies.empty()) throw ConfigError("config: no study named '" + *o.only_study + "'");
  }
}

inline void validate(const CliConfig& cfg) {
  for (const auto& s : cfg.studies) s.validate();
}

inline unsigned effective_threads(const CliConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace nlsr
