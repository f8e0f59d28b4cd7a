#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxent/certificate.hpp"
#include "maxent/common.hpp"
#include "maxent/dual_solver.hpp"
#include "maxent/measurement.hpp"
#include "maxent/problem.hpp"
#include "maxent/quadrature.hpp"
#include "maxent/support.hpp"
#include "maxent/version.hpp"

namespace maxent {

using ojson = nlohmann::ordered_json;

// Parse failures carry the path of the offending field, e.g.
// "constraints[0].u: expected a number".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what) {}
};

namespace cfg {

inline std::string type_name(const ojson& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "a boolean";
  if (j.is_number()) return "a number";
  if (j.is_string()) return "a string";
  if (j.is_array()) return "an array";
  return "an object";
}

inline const ojson& require(const ojson& j, const char* key,
                            const std::string& path) {
  if (!j.is_object())
    throw ConfigError(path, "expected an object, got " + type_name(j));
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(path + "." + key, "missing required field");
  return *it;
}

inline void reject_unknown(const ojson& j, const std::string& path,
                           std::initializer_list<const char*> known) {
  if (!j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(path, "unknown field '" + key + "'");
  }
}

inline double as_double(const ojson& j, const std::string& path) {
  if (!j.is_number())
    throw ConfigError(path, "expected a number, got " + type_name(j));
  return j.get<double>();
}

// Bounds admit infinities, which JSON numbers cannot carry; the strings
// "inf" and "-inf" stand in for them.
inline double as_extent(const ojson& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ConfigError(path, "expected a number or \"inf\"/\"-inf\", got \"" +
                                s + "\"");
  }
  throw ConfigError(path,
                    "expected a number or \"inf\"/\"-inf\", got " +
                        type_name(j));
}

inline ojson extent_to_json(double v) {
  if (v == kInf) return ojson("inf");
  if (v == -kInf) return ojson("-inf");
  if (std::isnan(v)) return ojson("nan");
  return ojson(v);
}

inline bool as_bool(const ojson& j, const std::string& path) {
  if (!j.is_boolean())
    throw ConfigError(path, "expected a boolean, got " + type_name(j));
  return j.get<bool>();
}

inline long long as_integer(const ojson& j, const std::string& path) {
  if (!j.is_number_integer())
    throw ConfigError(path, "expected an integer, got " + type_name(j));
  return j.get<long long>();
}

inline size_t as_count(const ojson& j, const std::string& path) {
  const long long v = as_integer(j, path);
  if (v < 0) throw ConfigError(path, "expected a nonnegative integer");
  return static_cast<size_t>(v);
}

inline uint64_t as_seed(const ojson& j, const std::string& path) {
  if (!j.is_number_unsigned() && !j.is_number_integer())
    throw ConfigError(path, "expected an integer seed, got " + type_name(j));
  if (j.is_number_integer() && j.get<long long>() < 0)
    throw ConfigError(path, "expected a nonnegative seed");
  return j.get<uint64_t>();
}

inline std::vector<double> as_extent_vector(const ojson& j, size_t n,
                                            const std::string& path) {
  if (!j.is_array())
    throw ConfigError(path, "expected an array, got " + type_name(j));
  if (j.size() != n)
    throw ConfigError(path, "expected " + std::to_string(n) +
                                " entries, got " + std::to_string(j.size()));
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i)
    out[i] = as_extent(j[i], path + "[" + std::to_string(i) + "]");
  return out;
}

inline std::vector<double> as_double_vector(const ojson& j,
                                            const std::string& path) {
  if (!j.is_array())
    throw ConfigError(path, "expected an array, got " + type_name(j));
  std::vector<double> out(j.size());
  for (size_t i = 0; i < j.size(); ++i)
    out[i] = as_double(j[i], path + "[" + std::to_string(i) + "]");
  return out;
}

inline SupportSet parse_support(const ojson& j, size_t d,
                                const std::string& path) {
  reject_unknown(j, path, {"shape", "lower", "upper", "halfspaces"});
  std::string shape = "box";
  if (j.is_object() && j.contains("shape")) {
    const ojson& s = j.at("shape");
    if (!s.is_string())
      throw ConfigError(path + ".shape", "expected a string");
    shape = s.get<std::string>();
  }
  if (shape == "full_space")
    return SupportSet::full_space(static_cast<int>(d));
  if (shape != "box" && shape != "box_with_halfspaces")
    throw ConfigError(path + ".shape",
                      "expected \"box\", \"box_with_halfspaces\", or "
                      "\"full_space\", got \"" +
                          shape + "\"");
  auto lower = as_extent_vector(require(j, "lower", path), d, path + ".lower");
  auto upper = as_extent_vector(require(j, "upper", path), d, path + ".upper");
  std::vector<Halfspace> halfspaces;
  if (j.contains("halfspaces")) {
    const ojson& hs = j.at("halfspaces");
    if (!hs.is_array())
      throw ConfigError(path + ".halfspaces", "expected an array");
    for (size_t i = 0; i < hs.size(); ++i) {
      const std::string hp = path + ".halfspaces[" + std::to_string(i) + "]";
      reject_unknown(hs[i], hp, {"normal", "offset"});
      Halfspace h;
      h.normal = as_extent_vector(require(hs[i], "normal", hp), d,
                                  hp + ".normal");
      h.offset = as_double(require(hs[i], "offset", hp), hp + ".offset");
      halfspaces.push_back(std::move(h));
    }
  }
  try {
    if (halfspaces.empty())
      return SupportSet::box(std::move(lower), std::move(upper));
    return SupportSet::box_with_halfspaces(std::move(lower), std::move(upper),
                                           std::move(halfspaces));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(path, ex.what());
  }
}

inline MeasurementFunction parse_measurement(const ojson& j, size_t d,
                                             const std::string& path) {
  const ojson& kind_j = require(j, "kind", path);
  if (!kind_j.is_string())
    throw ConfigError(path + ".kind", "expected a string");
  const std::string kind = kind_j.get<std::string>();

  MeasurementFunction phi = [&]() -> MeasurementFunction {
    try {
      if (kind == "power_moment") {
        reject_unknown(j, path,
                       {"kind", "axis", "exponent", "absolute", "u",
                        "declared"});
        const int axis = static_cast<int>(
            as_integer(require(j, "axis", path), path + ".axis"));
        if (axis < 0 || static_cast<size_t>(axis) >= d)
          throw ConfigError(path + ".axis",
                            "axis out of range for dimension " +
                                std::to_string(d));
        const double p =
            as_double(require(j, "exponent", path), path + ".exponent");
        bool absolute = false;
        if (j.contains("absolute"))
          absolute = as_bool(j.at("absolute"), path + ".absolute");
        return MeasurementFunction::power_moment(static_cast<int>(d), axis, p,
                                                 absolute);
      }
      if (kind == "norm_power") {
        reject_unknown(j, path, {"kind", "exponent", "u", "declared"});
        const double p =
            as_double(require(j, "exponent", path), path + ".exponent");
        return MeasurementFunction::norm_power(static_cast<int>(d), p);
      }
      if (kind == "quadratic_form") {
        reject_unknown(j, path, {"kind", "matrix", "u", "declared"});
        const ojson& rows = require(j, "matrix", path);
        if (!rows.is_array() || rows.size() != d)
          throw ConfigError(path + ".matrix",
                            "expected " + std::to_string(d) + " rows");
        Eigen::MatrixXd q(d, d);
        for (size_t r = 0; r < d; ++r) {
          const auto row = as_double_vector(
              rows[r], path + ".matrix[" + std::to_string(r) + "]");
          if (row.size() != d)
            throw ConfigError(path + ".matrix[" + std::to_string(r) + "]",
                              "expected " + std::to_string(d) + " entries");
          for (size_t c = 0; c < d; ++c) q(r, c) = row[c];
        }
        return MeasurementFunction::quadratic_form(std::move(q));
      }
      if (kind == "indicator_complement") {
        reject_unknown(j, path, {"kind", "region", "u", "declared"});
        SupportSet region =
            parse_support(require(j, "region", path), d, path + ".region");
        return MeasurementFunction::indicator_complement(std::move(region));
      }
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(path, ex.what());
    }
    throw ConfigError(path + ".kind",
                      "unknown measurement kind \"" + kind + "\"");
  }();

  if (j.contains("declared")) {
    const ojson& dec = j.at("declared");
    const std::string dp = path + ".declared";
    reject_unknown(dec, dp,
                   {"convex", "coercive", "well_behaved",
                    "well_behaved_radius", "growth_coefficient",
                    "lower_bound"});
    MeasurementAttributes attrs = phi.attributes();
    if (dec.contains("convex"))
      attrs.is_convex = as_bool(dec.at("convex"), dp + ".convex");
    if (dec.contains("coercive"))
      attrs.is_coercive = as_bool(dec.at("coercive"), dp + ".coercive");
    if (dec.contains("well_behaved"))
      attrs.is_well_behaved =
          as_bool(dec.at("well_behaved"), dp + ".well_behaved");
    if (dec.contains("well_behaved_radius"))
      attrs.well_behaved_radius = as_double(dec.at("well_behaved_radius"),
                                            dp + ".well_behaved_radius");
    if (dec.contains("growth_coefficient"))
      attrs.growth_coefficient = as_double(dec.at("growth_coefficient"),
                                           dp + ".growth_coefficient");
    if (dec.contains("lower_bound"))
      attrs.lower_bound =
          as_extent(dec.at("lower_bound"), dp + ".lower_bound");
    MeasurementFunction inner = phi;
    phi = MeasurementFunction::callback(
        static_cast<int>(d),
        [inner](std::span<const double> x) { return inner.value(x); },
        std::move(attrs), inner.label());
  }
  return phi;
}

}  // namespace cfg

struct OutputOptions {
  std::string report_path = "report.json";
  std::string csv_path = "density.csv";
  size_t grid_resolution = 0;  // 0 picks a per-dimension default
};

struct ProblemConfig {
  int dimension = 0;
  MomentProblem problem;
  SolverOptions solver;
  IntegrationOptions quadrature;
  OutputOptions output;
  ojson echo;  // the config as given, for the report
};

inline ProblemConfig parse_config(const ojson& j) {
  cfg::reject_unknown(j, "config",
                      {"schema", "dimension", "support", "constraints",
                       "solver", "quadrature", "output"});
  const ojson& schema = cfg::require(j, "schema", "config");
  if (!schema.is_string() || schema.get<std::string>() != kConfigSchema)
    throw ConfigError("config.schema",
                      std::string("expected \"") + kConfigSchema + "\"");
  const long long dim_ll =
      cfg::as_integer(cfg::require(j, "dimension", "config"),
                      "config.dimension");
  if (dim_ll < 1 || dim_ll > 16)
    throw ConfigError("config.dimension", "expected an integer in [1, 16]");
  const size_t d = static_cast<size_t>(dim_ll);

  SupportSet support =
      cfg::parse_support(cfg::require(j, "support", "config"), d,
                         "config.support");

  std::vector<Constraint> constraints;
  if (j.contains("constraints")) {
    const ojson& cs = j.at("constraints");
    if (!cs.is_array())
      throw ConfigError("config.constraints", "expected an array");
    for (size_t i = 0; i < cs.size(); ++i) {
      const std::string path = "constraints[" + std::to_string(i) + "]";
      MeasurementFunction phi = cfg::parse_measurement(cs[i], d, path);
      const double u =
          cfg::as_double(cfg::require(cs[i], "u", path), path + ".u");
      constraints.push_back({std::move(phi), u});
    }
  }

  SolverOptions solver;
  if (j.contains("solver")) {
    const ojson& s = j.at("solver");
    cfg::reject_unknown(s, "config.solver",
                        {"tol", "max_iter", "budget", "seed"});
    if (s.contains("tol"))
      solver.tol = cfg::as_double(s.at("tol"), "config.solver.tol");
    if (s.contains("max_iter"))
      solver.max_iter = cfg::as_count(s.at("max_iter"),
                                      "config.solver.max_iter");
    if (s.contains("budget"))
      solver.budget = cfg::as_count(s.at("budget"), "config.solver.budget");
    if (s.contains("seed"))
      solver.seed = cfg::as_seed(s.at("seed"), "config.solver.seed");
  }
  IntegrationOptions quadrature;
  quadrature.budget = solver.budget;
  if (j.contains("quadrature")) {
    const ojson& q = j.at("quadrature");
    cfg::reject_unknown(q, "config.quadrature",
                        {"budget", "target_rel_tol", "seed"});
    if (q.contains("budget"))
      quadrature.budget = cfg::as_count(q.at("budget"),
                                        "config.quadrature.budget");
    if (q.contains("target_rel_tol"))
      quadrature.target_rel_tol = cfg::as_double(
          q.at("target_rel_tol"), "config.quadrature.target_rel_tol");
    if (q.contains("seed"))
      quadrature.seed = cfg::as_seed(q.at("seed"), "config.quadrature.seed");
  }
  solver.quad_rel_tol = quadrature.target_rel_tol;

  OutputOptions output;
  if (j.contains("output")) {
    const ojson& o = j.at("output");
    cfg::reject_unknown(o, "config.output",
                        {"report", "csv", "grid_resolution"});
    if (o.contains("report")) {
      if (!o.at("report").is_string())
        throw ConfigError("config.output.report", "expected a string");
      output.report_path = o.at("report").get<std::string>();
    }
    if (o.contains("csv")) {
      if (!o.at("csv").is_string())
        throw ConfigError("config.output.csv", "expected a string");
      output.csv_path = o.at("csv").get<std::string>();
    }
    if (o.contains("grid_resolution"))
      output.grid_resolution = cfg::as_count(
          o.at("grid_resolution"), "config.output.grid_resolution");
  }

  // DeclarationError (an inadmissible problem, not a malformed file) is left
  // to propagate: callers class it as an existence failure, not a parse one.
  try {
    MomentProblem problem(std::move(support), std::move(constraints));
    return ProblemConfig{static_cast<int>(d), std::move(problem), solver,
                         quadrature, output, j};
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("config", ex.what());
  }
}

inline ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file: " + path);
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(path, ex.what());
  }
  return parse_config(j);
}

// Claimed solution for verification: a multiplier vector plus optional
// alpha/entropy. Accepts either a bare object or a full run report.
struct SolutionClaim {
  std::vector<double> lambda;
  std::optional<double> alpha;
  std::optional<double> entropy;
};

inline SolutionClaim parse_solution_claim(const ojson& root) {
  const ojson& j = root.contains("solution") ? root.at("solution") : root;
  SolutionClaim claim;
  claim.lambda = cfg::as_double_vector(
      cfg::require(j, "lambda", "solution"), "solution.lambda");
  if (j.contains("alpha"))
    claim.alpha = cfg::as_double(j.at("alpha"), "solution.alpha");
  if (j.contains("entropy"))
    claim.entropy = cfg::as_double(j.at("entropy"), "solution.entropy");
  return claim;
}

inline SolutionClaim load_solution_claim(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open solution file: " + path);
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(path, ex.what());
  }
  return parse_solution_claim(j);
}

// Deterministic work counters. Wall-clock times would break byte-identical
// reruns, so cost is reported in units the algorithm controls exactly.
struct WorkCounters {
  size_t solver_iterations = 0;
  size_t solver_budget = 0;
  size_t certificate_budget = 0;
  size_t csv_rows = 0;
};

struct RunReport {
  std::string version = kVersion;
  ExistenceDiagnosis diagnosis;
  std::optional<DualSolution> solution;
  std::optional<Certificate> certificate;
  WorkCounters timings;
  ojson config_echo;
};

namespace cfg {

inline ojson diagnosis_to_json(const ExistenceDiagnosis& d) {
  ojson j;
  j["route"] = to_string(d.route);
  j["c_nonzero_volume"] = d.c_nonzero_volume;
  j["c_volume_estimate"] = d.c_volume_estimate;
  ojson wits = ojson::array();
  for (const auto& w : d.c_witnesses) wits.push_back(w);
  j["c_witnesses"] = std::move(wits);
  j["stabilizer_index"] =
      d.stabilizer_index ? ojson(*d.stabilizer_index) : ojson(nullptr);
  j["slater_found"] = d.slater_found;
  j["slater_description"] = d.slater_description;
  j["entropy_lower"] = extent_to_json(d.entropy_lower);
  j["entropy_upper"] = extent_to_json(d.entropy_upper);
  j["notes"] = d.notes;
  return j;
}

inline ExistenceDiagnosis diagnosis_from_json(const ojson& j) {
  ExistenceDiagnosis d;
  const std::string route = j.at("route").get<std::string>();
  d.route = route == "finite-volume"
                ? ExistenceDiagnosis::Route::FiniteVolume
                : (route == "stabilizing"
                       ? ExistenceDiagnosis::Route::Stabilizing
                       : ExistenceDiagnosis::Route::None);
  d.c_nonzero_volume = j.at("c_nonzero_volume").get<bool>();
  d.c_volume_estimate = j.at("c_volume_estimate").get<double>();
  for (const auto& w : j.at("c_witnesses"))
    d.c_witnesses.push_back(w.get<Point>());
  if (!j.at("stabilizer_index").is_null())
    d.stabilizer_index = j.at("stabilizer_index").get<size_t>();
  d.slater_found = j.at("slater_found").get<bool>();
  d.slater_description = j.at("slater_description").get<std::string>();
  d.entropy_lower = as_extent(j.at("entropy_lower"), "entropy_lower");
  d.entropy_upper = as_extent(j.at("entropy_upper"), "entropy_upper");
  d.notes = j.at("notes").get<std::vector<std::string>>();
  return d;
}

inline ojson solution_to_json(const DualSolution& s) {
  ojson j;
  j["lambda"] = s.lambda;
  j["alpha"] = s.alpha;
  j["entropy"] = s.entropy;
  j["entropy_via_bounds"] = s.entropy_via_bounds;
  j["fitted_moments"] = s.fitted_moments;
  std::vector<int> active(s.active_set.begin(), s.active_set.end());
  j["active_set"] = active;
  j["slackness_residual"] = s.slackness_residual;
  j["entropy_identity_residual"] = s.entropy_identity_residual;
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["projected_gradient_norm"] = extent_to_json(s.projected_gradient_norm);
  j["alpha_error"] = s.alpha_error;
  j["quadrature_seed"] = s.quadrature_seed;
  return j;
}

inline DualSolution solution_from_json(const ojson& j) {
  DualSolution s;
  s.lambda = j.at("lambda").get<std::vector<double>>();
  s.alpha = j.at("alpha").get<double>();
  s.entropy = j.at("entropy").get<double>();
  s.entropy_via_bounds = j.at("entropy_via_bounds").get<double>();
  s.fitted_moments = j.at("fitted_moments").get<std::vector<double>>();
  for (const auto& a : j.at("active_set"))
    s.active_set.push_back(a.get<int>() != 0);
  s.slackness_residual = j.at("slackness_residual").get<double>();
  s.entropy_identity_residual =
      j.at("entropy_identity_residual").get<double>();
  s.converged = j.at("converged").get<bool>();
  s.iterations = j.at("iterations").get<size_t>();
  s.projected_gradient_norm =
      as_extent(j.at("projected_gradient_norm"), "projected_gradient_norm");
  s.alpha_error = j.at("alpha_error").get<double>();
  s.quadrature_seed = j.at("quadrature_seed").get<uint64_t>();
  return s;
}

inline ojson certificate_to_json(const Certificate& c) {
  ojson j;
  j["verdict"] = to_string(c.verdict);
  j["rejection_reason"] = c.rejection_reason;
  j["feasibility_residuals"] = c.feasibility_residuals;
  j["slackness_residual"] = c.slackness_residual;
  j["support_assumption"] = c.support_assumption;
  j["entropy_identity_residual"] = c.entropy_identity_residual;
  j["tolerances"] = ojson{{"feasibility", c.tolerances.feasibility},
                          {"slackness", c.tolerances.slackness},
                          {"entropy", c.tolerances.entropy}};
  j["recomputed_alpha"] = c.recomputed_alpha;
  j["recomputed_moments"] = c.recomputed_moments;
  return j;
}

inline Certificate certificate_from_json(const ojson& j) {
  Certificate c;
  c.verdict = j.at("verdict").get<std::string>() == "certified"
                  ? CertificateVerdict::Certified
                  : CertificateVerdict::Rejected;
  c.rejection_reason = j.at("rejection_reason").get<std::string>();
  c.feasibility_residuals =
      j.at("feasibility_residuals").get<std::vector<double>>();
  c.slackness_residual = j.at("slackness_residual").get<double>();
  c.support_assumption = j.at("support_assumption").get<bool>();
  c.entropy_identity_residual =
      j.at("entropy_identity_residual").get<double>();
  c.tolerances.feasibility =
      j.at("tolerances").at("feasibility").get<double>();
  c.tolerances.slackness = j.at("tolerances").at("slackness").get<double>();
  c.tolerances.entropy = j.at("tolerances").at("entropy").get<double>();
  c.recomputed_alpha = j.at("recomputed_alpha").get<double>();
  c.recomputed_moments = j.at("recomputed_moments").get<std::vector<double>>();
  return c;
}

}  // namespace cfg

inline ojson report_to_json(const RunReport& r) {
  ojson j;
  j["schema"] = kReportSchema;
  j["version"] = r.version;
  j["diagnosis"] = cfg::diagnosis_to_json(r.diagnosis);
  j["solution"] =
      r.solution ? cfg::solution_to_json(*r.solution) : ojson(nullptr);
  j["certificate"] = r.certificate
                         ? cfg::certificate_to_json(*r.certificate)
                         : ojson(nullptr);
  j["timings"] = ojson{{"units", "deterministic work counters"},
                       {"solver_iterations", r.timings.solver_iterations},
                       {"solver_budget", r.timings.solver_budget},
                       {"certificate_budget", r.timings.certificate_budget},
                       {"csv_rows", r.timings.csv_rows}};
  j["config"] = r.config_echo;
  return j;
}

inline RunReport report_from_json(const ojson& j) {
  if (!j.contains("schema") ||
      j.at("schema").get<std::string>() != kReportSchema)
    throw ConfigError("report.schema",
                      std::string("expected \"") + kReportSchema + "\"");
  RunReport r;
  r.version = j.at("version").get<std::string>();
  r.diagnosis = cfg::diagnosis_from_json(j.at("diagnosis"));
  if (!j.at("solution").is_null())
    r.solution = cfg::solution_from_json(j.at("solution"));
  if (!j.at("certificate").is_null())
    r.certificate = cfg::certificate_from_json(j.at("certificate"));
  const ojson& t = j.at("timings");
  r.timings.solver_iterations = t.at("solver_iterations").get<size_t>();
  r.timings.solver_budget = t.at("solver_budget").get<size_t>();
  r.timings.certificate_budget = t.at("certificate_budget").get<size_t>();
  r.timings.csv_rows = t.at("csv_rows").get<size_t>();
  r.config_echo = j.at("config");
  return r;
}

// Midpoint-rule density table: one row per grid cell whose center lies in S.
// Full 17-significant-digit decimals and LF endings keep reruns of the same
// build byte-identical.
inline size_t write_density_csv(std::ostream& out,
                                const MomentProblem& problem,
                                const DualSolution& solution,
                                const std::vector<double>& lo,
                                const std::vector<double>& hi,
                                size_t resolution) {
  const size_t d = static_cast<size_t>(problem.dimension());
  for (size_t i = 0; i < d; ++i) out << "x_" << (i + 1) << ",";
  out << "density\n";
  std::vector<double> width(d);
  for (size_t i = 0; i < d; ++i)
    width[i] = (hi[i] - lo[i]) / static_cast<double>(resolution);

  char buf[32];
  std::vector<size_t> idx(d, 0);
  std::vector<double> x(d);
  size_t rows = 0;
  while (true) {
    for (size_t i = 0; i < d; ++i)
      x[i] = lo[i] + (static_cast<double>(idx[i]) + 0.5) * width[i];
    if (problem.support().contains(x)) {
      for (size_t i = 0; i < d; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", x[i]);
        out << buf << ",";
      }
      std::snprintf(buf, sizeof buf, "%.17g",
                    density_at(solution, problem, x));
      out << buf << "\n";
      ++rows;
    }
    size_t axis = 0;
    while (axis < d && ++idx[axis] == resolution) {
      idx[axis] = 0;
      ++axis;
    }
    if (axis == d) break;
  }
  return rows;
}

}  // namespace maxent
