#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli/config.hpp"
#include "svarproj/calibrate.hpp"
#include "svarproj/io.hpp"
#include "svarproj/posterior.hpp"
#include "svarproj/projection.hpp"

namespace svarproj::cli {

enum ExitCode { kOk = 0, kNumericFailure = 1, kInputError = 2 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InputError:
    case ErrorCode::ShortSample:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::InvalidRestriction:
    case ErrorCode::NormalizationMissing:
    case ErrorCode::DomainError:
      return kInputError;
    default:
      return kNumericFailure;
  }
}

struct Context {
  RunConfig config;
  TimeSeriesData data;
  ReducedForm rf;
  RestrictionSet rset;

  VarSpec spec() const { return VarSpec{rf.n, rf.p, config.demean}; }
};

inline Context load_context(const std::filesystem::path& config_path, int threads) {
  json raw = read_json_file(config_path);
  const auto base = config_path.has_parent_path() ? config_path.parent_path() : std::filesystem::path(".");
  // the data width is needed to expand default targets
  require(raw.is_object() && raw.contains("data") && raw["data"].is_string(), ErrorCode::InputError,
          "config: missing field 'data'");
  Context ctx;
  ctx.data = read_csv_file(base / raw["data"].get<std::string>());
  ctx.config = parse_config(raw, base, static_cast<int>(ctx.data.variables()));
  ctx.config.threads = threads;
  ctx.rset = load_restrictions(ctx.config);
  const int n = static_cast<int>(ctx.data.variables());
  validate(ctx.rset, n);
  require_sign_normalization(ctx.rset, n);
  ctx.rf = estimate(ctx.data, VarSpec{n, ctx.config.lags, ctx.config.demean});
  return ctx;
}

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json target_json(const Target& t) {
  return {{"k", t.k}, {"i", t.i + 1}, {"j", t.j + 1}, {"cumulative", t.cumulative}};
}

inline json provenance(const RunConfig& c) {
  return {{"seed", c.seed}, {"version", std::string(kVersion)}, {"config_hash", c.config_hash}};
}

inline json reduced_form_json(const ReducedForm& rf) {
  return {{"n", rf.n},
          {"p", rf.p},
          {"T", rf.T},
          {"d", rf.d()},
          {"A", matrix_json(rf.A)},
          {"Sigma", matrix_json(rf.Sigma)},
          {"stability_margin", stability_margin(rf.A)},
          {"warnings", rf.warnings}};
}

inline json interval_json(const std::string& method, double c, const Target& t, double lower, double upper,
                          const std::string& status) {
  return {{"method", method}, {"c", c}, {"target", target_json(t)}, {"lower", lower}, {"upper", upper},
          {"status", status}};
}

inline json region_json(const std::string& method, const ProjectionRegion& region) {
  json out = json::array();
  for (const auto& iv : region.intervals) {
    json e = interval_json(method, region.c, iv.target, iv.lower, iv.upper, std::string(to_string(iv.status)));
    e["plugin_lower"] = iv.plugin_lower;
    e["plugin_upper"] = iv.plugin_upper;
    out.push_back(e);
  }
  return out;
}

inline json bundle_head(const Context& ctx, const std::string& command) {
  return {{"command", command}, {"provenance", provenance(ctx.config)}, {"reduced_form", reduced_form_json(ctx.rf)}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::InputError, "cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

inline bool any_failed(const ProjectionRegion& region) {
  for (const auto& iv : region.intervals)
    if (iv.status == EndpointStatus::Failed) return true;
  return false;
}

inline double baseline_radius(const Context& ctx) {
  return chi2_quantile(static_cast<double>(ctx.rf.d()), ctx.config.level);
}

/// Reduced-form summary only.
inline int cmd_estimate(const Context& ctx) {
  json doc = bundle_head(ctx, "estimate");
  doc["variables"] = ctx.data.names;
  doc["Omega"] = matrix_json(ctx.rf.Omega);
  write_json(ctx.config.output_dir / "estimate.json", doc);
  return kOk;
}

/// Baseline projection region, plus delta-method and Uhlig bands when asked.
inline int cmd_project(const Context& ctx) {
  const auto& cfg = ctx.config;
  const double c = cfg.c_override.value_or(baseline_radius(ctx));
  ProjectionProblem problem(ctx.rf, ctx.rset, cfg.projection());
  ProjectionRegion region = problem.region(cfg.targets, c);
  int code = any_failed(region) ? kNumericFailure : kOk;

  json doc = bundle_head(ctx, "project");
  doc["c"] = c;
  doc["level"] = cfg.level;
  doc["alpha_equivalent"] = 1.0 - chi2_cdf(static_cast<double>(ctx.rf.d()), c);
  json intervals = region_json("baseline", region);

  if (cfg.wants("dm")) {
    const double r = cfg.dm_r.value_or(std::sqrt(chi2_quantile(1.0, cfg.level)));
    for (const auto& t : cfg.targets) {
      try {
        auto dm = dm_interval(ctx.rf, ctx.rset, t, r, cfg.dm_delta);
        json e = interval_json("dm", r * r, t, dm.lower, dm.upper, dm.warnings.empty() ? "ok" : "nondifferentiable");
        e["delta"] = cfg.dm_delta;
        e["sigma_lower"] = dm.sigma_lower;
        e["sigma_upper"] = dm.sigma_upper;
        intervals.push_back(e);
      } catch (const Error& err) {
        intervals.push_back(interval_json("dm", r * r, t, std::nan(""), std::nan(""), "failed"));
        code = kNumericFailure;
      }
    }
  }
  if (cfg.wants("uhlig")) {
    try {
      auto u = uhlig_credible_bands(NwHyper::flat(ctx.rf.n, ctx.rf.p), ctx.rf, ctx.rset, cfg.targets, cfg.alpha(),
                                    cfg.draws, cfg.seed);
      for (const auto& b : u.bands) intervals.push_back(interval_json("uhlig", std::nan(""), b.target, b.lower, b.upper, "ok"));
      doc["uhlig"] = {{"accepted", u.accepted}, {"acceptance_rate", u.acceptance_rate}, {"warnings", u.warnings}};
    } catch (const Error& err) {
      for (const auto& t : cfg.targets) intervals.push_back(interval_json("uhlig", std::nan(""), t, std::nan(""), std::nan(""), "failed"));
      doc["uhlig"] = {{"error", err.what()}};
      code = kNumericFailure;
    }
  }
  doc["intervals"] = intervals;
  write_json(cfg.output_dir / "project.json", doc);

  std::ostringstream csv;
  csv << "horizon,variable,shock,lower,upper,plugin_lower,plugin_upper\n";
  for (const auto& iv : region.intervals)
    csv << iv.target.k << "," << iv.target.i + 1 << "," << iv.target.j + 1 << "," << format_double(iv.lower) << ","
        << format_double(iv.upper) << "," << format_double(iv.plugin_lower) << "," << format_double(iv.plugin_upper)
        << "\n";
  write_text(cfg.output_dir / "project_plot.csv", csv.str());
  return code;
}

inline PosteriorDraws posterior_draws(const Context& ctx) {
  const auto& cfg = ctx.config;
  if (cfg.posterior == "normal_wishart")
    return nw_posterior_draws(NwHyper::flat(ctx.rf.n, ctx.rf.p), ctx.rf, cfg.draws, cfg.seed, cfg.threads);
  return gaussian_posterior_draws(ctx.rf, cfg.draws, cfg.seed);
}

/// Calibrated projection region and report; GK region when asked.
inline int cmd_calibrate(const Context& ctx) {
  const auto& cfg = ctx.config;
  ProjectionConfig pcfg = cfg.projection();
  PosteriorDraws draws = posterior_draws(ctx);
  BatchBounds batch = bounds_batch(draws.draws, ctx.spec(), ctx.rset, cfg.targets, pcfg.inner);
  for (std::size_t m = 0; m < draws.status.size(); ++m)
    if (draws.status[m] == DrawStatus::Singular) batch.status[m] = BoundStatus::Singular;

  json doc = bundle_head(ctx, "calibrate");
  doc["level"] = cfg.level;
  doc["posterior"] = {{"source", cfg.posterior}, {"draws", cfg.draws}, {"singular", draws.singular_count()}};

  ProjectionProblem problem(ctx.rf, ctx.rset, pcfg);
  CalibrationConfig cc;
  cc.projection = pcfg;
  cc.strict_empty = cfg.strict_empty;
  CalibrationResult res;
  try {
    res = calibrate_radius(problem, batch, cfg.alpha(), cfg.eta, cc);
  } catch (const Error& err) {
    doc["calibration"] = {{"error", err.what()}};
    write_json(cfg.output_dir / "calibrate.json", doc);
    return exit_code_for(err.code());
  }

  json trace = json::array();
  for (const auto& s : res.iterations) trace.push_back({{"c", s.c}, {"credibility", s.credibility}});
  doc["calibration"] = {{"c_star", res.c_star},
                        {"achieved", res.achieved},
                        {"eta", res.eta},
                        {"baseline_c", res.baseline_c},
                        {"baseline_credibility", res.baseline_credibility},
                        {"d", ctx.rf.d()},
                        {"effective_dof", res.effective_dof},
                        {"alpha_equivalent", 1.0 - chi2_cdf(static_cast<double>(ctx.rf.d()), res.c_star)},
                        {"converged", res.converged},
                        {"counted_draws", res.counted_draws},
                        {"excluded_draws", res.excluded_draws},
                        {"trace", trace},
                        {"warnings", res.warnings}};

  json intervals = region_json("baseline", res.baseline);
  for (auto& e : region_json("calibrated", res.region)) intervals.push_back(e);
  if (cfg.wants("gk")) {
    for (std::size_t h = 0; h < cfg.targets.size(); ++h) {
      auto gk = gk_robust_region(batch, h, cfg.alpha());
      intervals.push_back(interval_json("gk", std::nan(""), cfg.targets[h], gk.lower, gk.upper, "ok"));
    }
  }
  doc["intervals"] = intervals;
  write_json(cfg.output_dir / "calibrate.json", doc);

  std::ostringstream csv;
  csv << "horizon,variable,shock,baseline_lower,baseline_upper,calibrated_lower,calibrated_upper\n";
  for (std::size_t h = 0; h < cfg.targets.size(); ++h) {
    const auto& b = res.baseline.intervals[h];
    const auto& c = res.region.intervals[h];
    csv << b.target.k << "," << b.target.i + 1 << "," << b.target.j + 1 << "," << format_double(b.lower) << ","
        << format_double(b.upper) << "," << format_double(c.lower) << "," << format_double(c.upper) << "\n";
  }
  write_text(cfg.output_dir / "calibrate_plot.csv", csv.str());
  return any_failed(res.region) || any_failed(res.baseline) || !res.converged ? kNumericFailure : kOk;
}

/// Frequentist radius table at the estimated reduced form.
inline int cmd_coverage(const Context& ctx) {
  const auto& cfg = ctx.config;
  const Target target = cfg.coverage_target.value_or(cfg.targets.front());
  std::vector<double> radii = cfg.coverage_radii;
  if (radii.empty()) {
    const double base = baseline_radius(ctx);
    for (int s = 1; s <= 8; ++s) radii.push_back(base * s / 8.0);
  }
  auto res = calibrate_frequentist({ctx.rf.mu}, radii, ctx.rf.Omega, ctx.rf.T, ctx.spec(), ctx.rset, target,
                                   cfg.alpha(), cfg.coverage_draws, cfg.coverage_lambda_points, cfg.seed,
                                   cfg.projection());
  std::ostringstream csv;
  csv << "c,r,approx_cl\n";
  json table = json::array();
  for (const auto& row : res.table) {
    csv << format_double(row.c) << "," << format_double(row.r) << "," << format_double(row.approx_cl) << "\n";
    table.push_back({{"c", row.c}, {"r", row.r}, {"approx_cl", row.approx_cl}});
  }
  write_text(cfg.output_dir / "coverage.csv", csv.str());

  json doc = bundle_head(ctx, "coverage");
  doc["target"] = target_json(target);
  doc["level"] = cfg.level;
  doc["draws"] = cfg.coverage_draws;
  doc["lambda_points"] = cfg.coverage_lambda_points;
  doc["c_star"] = res.c_star;
  doc["r_star"] = res.r_star;
  doc["table"] = table;
  write_json(cfg.output_dir / "coverage.json", doc);
  return kOk;
}

/// estimate, project, then calibrate / coverage as the method flags ask.
inline int cmd_run(const Context& ctx) {
  int code = cmd_estimate(ctx);
  code = std::max(code, cmd_project(ctx));
  if (ctx.config.wants("calibrated") || ctx.config.wants("gk")) code = std::max(code, cmd_calibrate(ctx));
  if (ctx.config.wants("freq_coverage")) code = std::max(code, cmd_coverage(ctx));
  return code;
}

}  // namespace svarproj::cli
