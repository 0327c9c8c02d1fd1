#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "svarproj/calibrate.hpp"
#include "svarproj/chi2.hpp"
#include "svarproj/io.hpp"

namespace svarproj::cli {

using nlohmann::json;

// Config grammar (JSON). Paths are relative to the config file.
//
//   data           string, CSV path                      (required)
//   lags           integer >= 1                          (default 1)
//   demean         bool                                  (default false)
//   level          coverage/credibility level in (0,1)   (default 0.68; "alpha" is an alias)
//   horizons       list of integers, or {"max": H}       (default [0])
//   variables      list of 1-based indices               (default all)
//   shocks         list of 1-based indices               (default all)
//   cumulative     bool                                  (default false)
//   targets        explicit list of {"k","i","j","cumulative"}, replaces the grid
//   restrictions   path to a restriction file, or {"preset": "bh_labor_market", "V": 1}
//   methods        subset of baseline, calibrated, gk, dm, uhlig, freq_coverage
//   draws          M                                     (default 1000)
//   posterior      gaussian_approx | normal_wishart      (default gaussian_approx)
//   eta            calibration tolerance                 (default 0.005)
//   seed           unsigned integer                      (default 0)
//   c              squared-radius override for project
//   strict_empty   count empty identified sets as misses (default false)
//   dm             {"r": radius, "delta": expansion}     (default r = normal quantile of level, delta 0)
//   coverage       {"draws": M, "lambda_points": K, "radii": [...], "target": {...}}
//   solver         {"starts", "inner_starts", "feas_tol", "opt_tol", "max_iter", "strict_stability"}
//   output_dir     string                                (default "out")
//
// SVARPROJ_SEED and SVARPROJ_OUTPUT_DIR override seed and output_dir.

struct RunConfig {
  std::filesystem::path data;
  int lags = 1;
  bool demean = false;
  double level = 0.68;
  std::vector<Target> targets;
  std::optional<std::filesystem::path> restriction_file;
  std::string preset;
  double preset_V = 1.0;
  std::set<std::string> methods;
  int draws = 1000;
  std::string posterior = "gaussian_approx";
  double eta = 0.005;
  std::uint64_t seed = 0;
  std::optional<double> c_override;
  bool strict_empty = false;
  std::optional<double> dm_r;
  double dm_delta = 0.0;
  int coverage_draws = 200;
  int coverage_lambda_points = 5;
  std::vector<double> coverage_radii;
  std::optional<Target> coverage_target;
  int starts = 5;
  int inner_starts = 10;
  std::optional<double> feas_tol;
  std::optional<double> opt_tol;
  std::optional<int> max_iter;
  bool strict_stability = false;
  std::filesystem::path output_dir = "out";
  int threads = 1;

  json canonical;         // effective config after overrides
  std::string config_hash;

  double alpha() const { return 1.0 - level; }
  bool wants(const std::string& m) const { return methods.count(m) > 0; }

  ProjectionConfig projection() const {
    ProjectionConfig p;
    p.starts = starts;
    p.seed = seed;
    p.threads = threads;
    p.strict_stability = strict_stability;
    p.inner.starts = inner_starts;
    p.inner.seed = seed;
    p.inner.threads = threads;
    if (feas_tol) p.inner.solver.feas_tol = p.solver.feas_tol = *feas_tol;
    if (opt_tol) p.inner.solver.opt_tol = p.solver.opt_tol = *opt_tol;
    if (max_iter) p.inner.solver.max_iter = p.solver.max_iter = *max_iter;
    return p;
  }
};

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

[[noreturn]] inline void bad(const std::string& what) { throw Error(ErrorCode::InputError, "config: " + what); }

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(std::string("field '") + key + "' has the wrong type");
  }
}

inline std::vector<int> index_list(const json& j, const char* key, int n) {
  std::vector<int> out;
  if (!j.contains(key)) {
    for (int v = 1; v <= n; ++v) out.push_back(v);
    return out;
  }
  out = get<std::vector<int>>(j, key, {});
  for (int v : out)
    if (v < 1 || v > n) bad(std::string(key) + " index " + std::to_string(v) + " out of range 1.." + std::to_string(n));
  return out;
}

inline Target target_from(const json& t, int n) {
  if (!t.is_object()) bad("target entries must be objects");
  Target out;
  out.k = get<int>(t, "k", 0);
  out.i = get<int>(t, "i", 1) - 1;
  out.j = get<int>(t, "j", 1) - 1;
  out.cumulative = get<bool>(t, "cumulative", false);
  if (out.k < 0 || out.i < 0 || out.i >= n || out.j < 0 || out.j >= n) bad("target index out of range");
  return out;
}

}  // namespace detail

/// Parses the config; `n` is the number of data columns, needed to expand
/// the default target grid.
inline RunConfig parse_config(json j, const std::filesystem::path& base_dir, int n) {
  using detail::bad;
  using detail::get;
  if (!j.is_object()) bad("top level must be an object");
  static const std::set<std::string> known = {
      "data",      "lags",     "demean",      "level",     "alpha",  "horizons", "variables",  "shocks",
      "cumulative", "targets", "restrictions", "methods",  "draws",  "posterior", "eta",        "seed",
      "c",         "strict_empty", "dm",      "coverage",  "solver", "output_dir"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) bad("unknown field '" + key + "'");

  if (const char* env = std::getenv("SVARPROJ_SEED")) {
    try {
      j["seed"] = std::stoull(env);
    } catch (const std::exception&) {
      bad("SVARPROJ_SEED is not an unsigned integer");
    }
  }
  if (const char* env = std::getenv("SVARPROJ_OUTPUT_DIR")) j["output_dir"] = env;
  if (j.contains("alpha") && j.contains("level")) bad("give either level or alpha, not both");

  RunConfig c;
  if (!j.contains("data")) bad("missing field 'data'");
  c.data = base_dir / get<std::string>(j, "data", "");
  c.lags = get<int>(j, "lags", 1);
  c.demean = get<bool>(j, "demean", false);
  c.level = get<double>(j, "level", get<double>(j, "alpha", 0.68));
  if (!(c.level > 0.0 && c.level < 1.0)) bad("level must lie in (0, 1)");

  if (j.contains("targets")) {
    if (!j["targets"].is_array() || j["targets"].empty()) bad("targets must be a non-empty list");
    for (const auto& t : j["targets"]) c.targets.push_back(detail::target_from(t, n));
  } else {
    std::vector<int> horizons{0};
    if (j.contains("horizons")) {
      const auto& h = j["horizons"];
      if (h.is_object()) {
        int H = get<int>(h, "max", 0);
        if (H < 0) bad("horizons.max must be >= 0");
        horizons.clear();
        for (int k = 0; k <= H; ++k) horizons.push_back(k);
      } else {
        horizons = get<std::vector<int>>(j, "horizons", {});
      }
    }
    for (int k : horizons)
      if (k < 0) bad("horizons must be >= 0");
    const bool cum = get<bool>(j, "cumulative", false);
    for (int i : detail::index_list(j, "variables", n))
      for (int s : detail::index_list(j, "shocks", n))
        for (int k : horizons) c.targets.push_back(Target{k, i - 1, s - 1, cum});
  }
  if (c.targets.empty()) bad("no targets");

  if (!j.contains("restrictions")) bad("missing field 'restrictions'");
  const auto& r = j["restrictions"];
  if (r.is_string()) {
    c.restriction_file = base_dir / r.get<std::string>();
  } else if (r.is_object()) {
    c.preset = get<std::string>(r, "preset", "");
    if (c.preset != "bh_labor_market") bad("unknown restriction preset '" + c.preset + "'");
    c.preset_V = get<double>(r, "V", 1.0);
  } else {
    bad("restrictions must be a file path or a preset object");
  }

  static const std::set<std::string> methods = {"baseline", "calibrated", "gk", "dm", "uhlig", "freq_coverage"};
  for (const auto& m : get<std::vector<std::string>>(j, "methods", {"baseline"})) {
    if (!methods.count(m)) bad("unknown method '" + m + "'");
    c.methods.insert(m);
  }
  c.draws = get<int>(j, "draws", 1000);
  if (c.draws < 1) bad("draws must be >= 1");
  c.posterior = get<std::string>(j, "posterior", "gaussian_approx");
  if (c.posterior != "gaussian_approx" && c.posterior != "normal_wishart") bad("unknown posterior '" + c.posterior + "'");
  c.eta = get<double>(j, "eta", 0.005);
  if (!(c.eta > 0.0)) bad("eta must be positive");
  c.seed = get<std::uint64_t>(j, "seed", 0);
  if (j.contains("c")) {
    c.c_override = get<double>(j, "c", 0.0);
    if (*c.c_override < 0.0) bad("c must be >= 0");
  }
  c.strict_empty = get<bool>(j, "strict_empty", false);

  if (j.contains("dm")) {
    const auto& d = j["dm"];
    if (d.contains("r")) c.dm_r = get<double>(d, "r", 0.0);
    c.dm_delta = get<double>(d, "delta", 0.0);
    if ((c.dm_r && *c.dm_r < 0.0) || c.dm_delta < 0.0) bad("dm.r and dm.delta must be >= 0");
  }
  if (j.contains("coverage")) {
    const auto& v = j["coverage"];
    c.coverage_draws = get<int>(v, "draws", 200);
    c.coverage_lambda_points = get<int>(v, "lambda_points", 5);
    c.coverage_radii = get<std::vector<double>>(v, "radii", {});
    if (v.contains("target")) c.coverage_target = detail::target_from(v["target"], n);
    if (c.coverage_draws < 1 || c.coverage_lambda_points < 1) bad("coverage.draws and lambda_points must be >= 1");
    for (double x : c.coverage_radii)
      if (x < 0.0) bad("coverage radii must be >= 0");
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    c.starts = get<int>(s, "starts", 5);
    c.inner_starts = get<int>(s, "inner_starts", 10);
    if (s.contains("feas_tol")) c.feas_tol = get<double>(s, "feas_tol", 0.0);
    if (s.contains("opt_tol")) c.opt_tol = get<double>(s, "opt_tol", 0.0);
    if (s.contains("max_iter")) c.max_iter = get<int>(s, "max_iter", 0);
    c.strict_stability = get<bool>(s, "strict_stability", false);
    if (c.starts < 1 || c.inner_starts < 1) bad("solver starts must be >= 1");
  }
  c.output_dir = base_dir / get<std::string>(j, "output_dir", "out");

  c.canonical = j;
  c.config_hash = fnv1a_hex(j.dump());
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::InputError, "cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InputError, path.string() + ": " + e.what());
  }
}

inline RestrictionSet load_restrictions(const RunConfig& c) {
  if (c.restriction_file) return read_restrictions_file(*c.restriction_file);
  return bh_labor_market_preset(c.preset_V);
}

}  // namespace svarproj::cli
