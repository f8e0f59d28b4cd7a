#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "maxent/config.hpp"
#include "maxent/maxent.hpp"
#include "maxent/version.hpp"

namespace maxent::cli {

// Outcome classes, stable across runs. Selftest failures use 1 so that any
// unexpected internal error (also 1) is never mistaken for a clean refusal.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigInvalid = 2,
  kNoRoute = 3,
  kNotConverged = 4,
  kRejected = 5,
};

struct Options {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::string solution_path;
  bool force = false;
  bool quiet = false;
  size_t n = 1000;
  std::optional<uint64_t> seed_flag;
};

inline const char* kUsage =
    "usage: maxent <command> [flags]\n"
    "\n"
    "commands:\n"
    "  solve      diagnose existence, fit the density, certify, write\n"
    "             report + density CSV\n"
    "  verify     certify a claimed multiplier vector against a config\n"
    "             (solution file as positional arg or --solution PATH)\n"
    "  eval       read points from stdin (one per line, space-separated\n"
    "             coordinates), append the density to each line\n"
    "  sample     draw points from the fitted density (--n, --seed),\n"
    "             write samples CSV\n"
    "  diagnose   existence diagnosis only, write report\n"
    "  selftest   run the built-in fixture matrix\n"
    "\n"
    "flags:\n"
    "  --config PATH    problem config (required except for selftest)\n"
    "  --out DIR        output directory (default \".\")\n"
    "  --solution PATH  claimed solution for verify\n"
    "  --force          proceed past a route=none diagnosis\n"
    "  --quiet          suppress progress text\n"
    "  --n N            sample count (sample only, default 1000)\n"
    "  --seed S         sampling seed (sample only)\n"
    "\n"
    "MAXENT_SEED, when set, overrides the solver and quadrature seeds.\n";

inline int parse_args(int argc, const char* const* argv, Options* opt,
                      std::string* err) {
  if (argc < 2) {
    *err = "missing command\n\n" + std::string(kUsage);
    return kConfigInvalid;
  }
  opt->command = argv[1];
  if (opt->command == "--help" || opt->command == "help") {
    opt->command = "help";
    return kOk;
  }
  for (int i = 2; i < argc; ++i) {
    const std::string arg = argv[i];
    auto need_value = [&](const char* flag) -> const char* {
      if (i + 1 >= argc) {
        *err = std::string(flag) + ": missing value";
        return nullptr;
      }
      return argv[++i];
    };
    if (arg == "--config") {
      const char* v = need_value("--config");
      if (!v) return kConfigInvalid;
      opt->config_path = v;
    } else if (arg == "--out") {
      const char* v = need_value("--out");
      if (!v) return kConfigInvalid;
      opt->out_dir = v;
    } else if (arg == "--solution") {
      const char* v = need_value("--solution");
      if (!v) return kConfigInvalid;
      opt->solution_path = v;
    } else if (arg == "--force") {
      opt->force = true;
    } else if (arg == "--quiet") {
      opt->quiet = true;
    } else if (arg == "--n") {
      const char* v = need_value("--n");
      if (!v) return kConfigInvalid;
      char* end = nullptr;
      const unsigned long long n = std::strtoull(v, &end, 10);
      if (end == v || *end != '\0' || n == 0) {
        *err = "--n: expected a positive integer";
        return kConfigInvalid;
      }
      opt->n = static_cast<size_t>(n);
    } else if (arg == "--seed") {
      const char* v = need_value("--seed");
      if (!v) return kConfigInvalid;
      char* end = nullptr;
      const unsigned long long s = std::strtoull(v, &end, 10);
      if (end == v || *end != '\0') {
        *err = "--seed: expected a nonnegative integer";
        return kConfigInvalid;
      }
      opt->seed_flag = static_cast<uint64_t>(s);
    } else if (!arg.empty() && arg[0] == '-') {
      *err = "unknown flag: " + arg;
      return kConfigInvalid;
    } else if (opt->solution_path.empty()) {
      opt->solution_path = arg;  // verify's positional solution file
    } else {
      *err = "unexpected argument: " + arg;
      return kConfigInvalid;
    }
  }
  return kOk;
}

namespace detail {

inline std::optional<uint64_t> env_seed(std::string* err) {
  const char* v = std::getenv("MAXENT_SEED");
  if (!v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (end == v || *end != '\0') {
    *err = "MAXENT_SEED: expected a nonnegative integer, got \"" +
           std::string(v) + "\"";
    return std::nullopt;
  }
  return static_cast<uint64_t>(s);
}

inline int load(const Options& opt, std::ostream& err,
                std::optional<ProblemConfig>* out) {
  if (opt.config_path.empty()) {
    err << "maxent " << opt.command << ": --config PATH is required\n";
    return kConfigInvalid;
  }
  try {
    out->emplace(load_config(opt.config_path));
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kConfigInvalid;
  } catch (const DeclarationError& ex) {
    err << "no existence route: " << ex.what()
        << "\n(existence needs a finite-volume support or a stabilizing "
           "constraint that is bounded below and stable; this problem "
           "provides neither)\n";
    return kNoRoute;
  }
  std::string env_err;
  if (const auto seed = env_seed(&env_err)) {
    (*out)->solver.seed = *seed;
    (*out)->quadrature.seed = *seed;
  } else if (!env_err.empty()) {
    err << env_err << "\n";
    return kConfigInvalid;
  }
  return kOk;
}

inline std::filesystem::path out_file(const Options& opt,
                                      const std::string& name) {
  std::filesystem::create_directories(opt.out_dir);
  return std::filesystem::path(opt.out_dir) / name;
}

inline void write_report_file(const Options& opt, const ProblemConfig& config,
                              const RunReport& report, std::ostream& err) {
  const auto path = out_file(opt, config.output.report_path);
  std::ofstream f(path, std::ios::binary);
  f << report_to_json(report).dump(2) << "\n";
  if (!f) err << "warning: could not write " << path.string() << "\n";
}

// Grid window for the density table: exact bounds where finite, otherwise
// proposal-fit location +- 8 scales (deterministic for a fixed seed).
inline void csv_window(const ProblemConfig& config,
                       const DualSolution& solution, std::vector<double>* lo,
                       std::vector<double>* hi) {
  const size_t d = static_cast<size_t>(config.problem.dimension());
  const auto& support = config.problem.support();
  lo->assign(support.lower().begin(), support.lower().end());
  hi->assign(support.upper().begin(), support.upper().end());
  bool any_unbounded = false;
  for (size_t i = 0; i < d; ++i)
    any_unbounded |= !std::isfinite((*lo)[i]) || !std::isfinite((*hi)[i]);
  if (!any_unbounded) return;
  const auto prop = maxent::detail::fit_proposal(solution, config.problem,
                                                 config.quadrature.seed);
  for (size_t i = 0; i < d; ++i) {
    (*lo)[i] = std::max((*lo)[i], prop.location[i] - 8.0 * prop.scale[i]);
    (*hi)[i] = std::min((*hi)[i], prop.location[i] + 8.0 * prop.scale[i]);
  }
}

inline size_t csv_resolution(const ProblemConfig& config) {
  if (config.output.grid_resolution > 0) return config.output.grid_resolution;
  switch (config.problem.dimension()) {
    case 1:
      return 512;
    case 2:
      return 96;
    case 3:
      return 24;
    default:
      return 0;  // table would be astronomically wide; skip it
  }
}

inline void print_diagnosis(const ExistenceDiagnosis& diag,
                            std::ostream& out) {
  out << "existence route: " << to_string(diag.route) << "\n";
  out << "  feasible volume found: " << (diag.c_nonzero_volume ? "yes" : "no");
  if (diag.c_nonzero_volume)
    out << " (estimate " << diag.c_volume_estimate << ", "
        << diag.c_witnesses.size() << " witnesses kept)";
  out << "\n";
  if (diag.stabilizer_index)
    out << "  stabilizing constraint: index " << *diag.stabilizer_index
        << "\n";
  out << "  interior point: "
      << (diag.slater_found ? diag.slater_description : "not verified")
      << "\n";
  out << "  entropy bracket: [" << diag.entropy_lower << ", "
      << diag.entropy_upper << "]\n";
  for (const auto& n : diag.notes) out << "  note: " << n << "\n";
}

}  // namespace detail

inline int cmd_solve(const Options& opt, std::ostream& out,
                     std::ostream& err) {
  std::optional<ProblemConfig> loaded;
  if (const int rc = detail::load(opt, err, &loaded)) return rc;
  ProblemConfig& config = *loaded;

  RunReport report;
  report.config_echo = config.echo;
  report.diagnosis = diagnose_existence(
      config.problem, std::max<size_t>(config.quadrature.budget, 1000),
      config.quadrature.seed);
  if (!opt.quiet) detail::print_diagnosis(report.diagnosis, out);

  if (report.diagnosis.route == ExistenceDiagnosis::Route::None &&
      !opt.force) {
    detail::write_report_file(opt, config, report, err);
    err << "no existence route: ";
    for (const auto& n : report.diagnosis.notes) err << n << "; ";
    err << "(--force to attempt a solve anyway)\n";
    return kNoRoute;
  }

  DualSolution solution;
  try {
    solution = solve(config.problem, config.solver);
  } catch (const DivergentIntegralError& ex) {
    detail::write_report_file(opt, config, report, err);
    err << "solver failed: " << ex.what() << "\n";
    return kNotConverged;
  }
  report.solution = solution;
  report.timings.solver_iterations = solution.iterations;
  report.timings.solver_budget = config.solver.budget;
  if (!opt.quiet) {
    out << "multipliers:";
    for (double l : solution.lambda) out << " " << l;
    out << "\nalpha: " << solution.alpha << "\nentropy: " << solution.entropy
        << "\niterations: " << solution.iterations << "\n";
  }
  if (!solution.converged) {
    detail::write_report_file(opt, config, report, err);
    err << "solver did not converge within " << config.solver.max_iter
        << " iterations (projected gradient "
        << solution.projected_gradient_norm << ")\n";
    return kNotConverged;
  }

  const Certificate cert = certify(config.problem, solution,
                                   config.quadrature);
  report.certificate = cert;
  report.timings.certificate_budget = 4 * config.quadrature.budget;
  if (!opt.quiet) out << "certificate: " << to_string(cert.verdict) << "\n";

  const size_t resolution = detail::csv_resolution(config);
  if (resolution > 0) {
    std::vector<double> lo, hi;
    detail::csv_window(config, solution, &lo, &hi);
    const auto path = detail::out_file(opt, config.output.csv_path);
    std::ofstream csv(path, std::ios::binary);
    report.timings.csv_rows =
        write_density_csv(csv, config.problem, solution, lo, hi, resolution);
    if (!csv) err << "warning: could not write " << path.string() << "\n";
    if (!opt.quiet)
      out << "density table: " << path.string() << " ("
          << report.timings.csv_rows << " rows)\n";
  }
  detail::write_report_file(opt, config, report, err);
  if (!cert.certified()) {
    err << "certificate rejected: " << cert.rejection_reason << "\n";
    return kRejected;
  }
  return kOk;
}

inline int cmd_verify(const Options& opt, std::ostream& out,
                      std::ostream& err) {
  std::optional<ProblemConfig> loaded;
  if (const int rc = detail::load(opt, err, &loaded)) return rc;
  ProblemConfig& config = *loaded;
  if (opt.solution_path.empty()) {
    err << "maxent verify: solution file required (positional or "
           "--solution PATH)\n";
    return kConfigInvalid;
  }
  SolutionClaim claim;
  try {
    claim = load_solution_claim(opt.solution_path);
  } catch (const ConfigError& ex) {
    err << "solution error: " << ex.what() << "\n";
    return kConfigInvalid;
  }
  if (claim.lambda.size() != config.problem.size()) {
    err << "solution error: " << claim.lambda.size()
        << " multipliers for " << config.problem.size() << " constraints\n";
    return kConfigInvalid;
  }
  for (double l : claim.lambda)
    if (!std::isfinite(l) || l < 0.0) {
      err << "solution error: multipliers must be finite and nonnegative\n";
      return kConfigInvalid;
    }

  DualSolution solution;
  try {
    solution =
        solution_from_lambda(config.problem, claim.lambda, config.quadrature);
  } catch (const DivergentIntegralError& ex) {
    err << "verification failed: " << ex.what() << "\n";
    return kRejected;
  }
  if (claim.alpha) solution.alpha = *claim.alpha;
  if (claim.entropy) solution.entropy = *claim.entropy;

  const Certificate cert = certify(config.problem, solution,
                                   config.quadrature);
  if (!opt.quiet || !cert.certified()) {
    out << "verdict: " << to_string(cert.verdict) << "\n";
    out << "residuals (tolerance in parentheses):\n";
    for (size_t g = 0; g < cert.feasibility_residuals.size(); ++g)
      out << "  feasibility[" << g << "]: " << cert.feasibility_residuals[g]
          << " (" << cert.tolerances.feasibility << ")\n";
    out << "  slackness: " << cert.slackness_residual << " ("
        << cert.tolerances.slackness << ")\n";
    out << "  entropy identity: " << cert.entropy_identity_residual << " ("
        << cert.tolerances.entropy << ")\n";
    if (!cert.certified()) out << "reason: " << cert.rejection_reason << "\n";
  }
  return cert.certified() ? kOk : kRejected;
}

inline int cmd_eval(const Options& opt, std::istream& in, std::ostream& out,
                    std::ostream& err) {
  std::optional<ProblemConfig> loaded;
  if (const int rc = detail::load(opt, err, &loaded)) return rc;
  ProblemConfig& config = *loaded;
  DualSolution solution;
  try {
    solution = solve(config.problem, config.solver);
  } catch (const DivergentIntegralError& ex) {
    err << "solver failed: " << ex.what() << "\n";
    return kNotConverged;
  }
  if (!solution.converged) {
    err << "solver did not converge\n";
    return kNotConverged;
  }
  const size_t d = static_cast<size_t>(config.problem.dimension());
  std::string line;
  size_t lineno = 0;
  char buf[32];
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::vector<double> x;
    double v;
    while (fields >> v) x.push_back(v);
    if (x.size() != d) {
      err << "stdin line " << lineno << ": expected " << d
          << " coordinates, got " << x.size() << "\n";
      return kConfigInvalid;
    }
    std::snprintf(buf, sizeof buf, "%.17g",
                  density_at(solution, config.problem, x));
    out << line << " " << buf << "\n";
  }
  return kOk;
}

inline int cmd_sample(const Options& opt, std::ostream& out,
                      std::ostream& err) {
  std::optional<ProblemConfig> loaded;
  if (const int rc = detail::load(opt, err, &loaded)) return rc;
  ProblemConfig& config = *loaded;
  DualSolution solution;
  try {
    solution = solve(config.problem, config.solver);
  } catch (const DivergentIntegralError& ex) {
    err << "solver failed: " << ex.what() << "\n";
    return kNotConverged;
  }
  if (!solution.converged) {
    err << "solver did not converge\n";
    return kNotConverged;
  }
  const uint64_t seed =
      opt.seed_flag ? *opt.seed_flag : config.solver.seed;
  std::vector<Point> points;
  try {
    points = sample(solution, config.problem, opt.n, seed);
  } catch (const AcceptanceCollapseError& ex) {
    err << "sampling failed: " << ex.what() << "\n";
    return kFailure;
  }
  const auto path = detail::out_file(opt, "samples.csv");
  std::ofstream csv(path, std::ios::binary);
  const size_t d = static_cast<size_t>(config.problem.dimension());
  for (size_t i = 0; i < d; ++i) csv << "x_" << (i + 1) << ",";
  csv << "density\n";
  char buf[32];
  for (const auto& p : points) {
    for (size_t i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p[i]);
      csv << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g",
                  density_at(solution, config.problem, p));
    csv << buf << "\n";
  }
  if (!csv) {
    err << "could not write " << path.string() << "\n";
    return kFailure;
  }
  if (!opt.quiet)
    out << "wrote " << points.size() << " samples to " << path.string()
        << " (seed " << seed << ")\n";
  return kOk;
}

inline int cmd_diagnose(const Options& opt, std::ostream& out,
                        std::ostream& err) {
  std::optional<ProblemConfig> loaded;
  if (const int rc = detail::load(opt, err, &loaded)) return rc;
  ProblemConfig& config = *loaded;
  RunReport report;
  report.config_echo = config.echo;
  report.diagnosis = diagnose_existence(
      config.problem, std::max<size_t>(config.quadrature.budget, 1000),
      config.quadrature.seed);
  detail::print_diagnosis(report.diagnosis, out);
  detail::write_report_file(opt, config, report, err);
  if (report.diagnosis.route == ExistenceDiagnosis::Route::None) {
    err << "no existence route established\n";
    return kNoRoute;
  }
  return kOk;
}

inline int cmd_selftest(const Options& opt, std::ostream& out) {
  struct Row {
    std::string name;
    bool solve_ok = false;
    bool certify_ok = false;
    bool grid_ok = false;
    std::string detail;
  };
  std::vector<Row> rows;

  auto fixtures = analytic_fixtures();
  fixtures.push_back(inactive_fixture());
  for (const auto& f : fixtures) {
    Row row;
    row.name = f.name;
    std::ostringstream detail;
    try {
      SolverOptions sopt;
      sopt.budget = 100000;
      const DualSolution sol = solve(f.problem, sopt);
      double lambda_err = 0.0;
      for (size_t g = 0; g < f.lambda_true.size(); ++g)
        lambda_err = std::max(
            lambda_err, std::abs(sol.lambda[g] - f.lambda_true[g]));
      row.solve_ok = sol.converged && lambda_err <= 1e-3 &&
                     std::abs(sol.alpha - f.alpha_true) <= 1e-4 &&
                     std::abs(sol.entropy - f.entropy_true) <= 1e-4;
      if (!row.solve_ok)
        detail << "solve: lambda_err=" << lambda_err
               << " alpha_err=" << std::abs(sol.alpha - f.alpha_true)
               << " entropy_err=" << std::abs(sol.entropy - f.entropy_true)
               << " converged=" << sol.converged << "; ";

      const Certificate cert = certify(f.problem, sol);
      row.certify_ok = cert.certified();
      if (!row.certify_ok) detail << "certify: " << cert.rejection_reason;

      const GridMaxent grid = grid_solve(f.problem, f.grid_lo, f.grid_hi);
      double tv = 0.0;
      std::vector<double> x(1);
      for (size_t i = 0; i < grid.centers.size(); ++i) {
        x[0] = grid.centers[i];
        tv += std::abs(density_at(sol, f.problem, x) * grid.delta -
                       grid.p[i]);
      }
      tv *= 0.5;
      const double gap = std::abs(grid.entropy - sol.entropy);
      row.grid_ok = grid.converged && tv <= 1e-2 && gap <= 2e-3;
      if (!row.grid_ok)
        detail << "grid: tv=" << tv << " entropy_gap=" << gap
               << " converged=" << grid.converged << "; ";
    } catch (const std::exception& ex) {
      detail << "exception: " << ex.what();
    }
    row.detail = detail.str();
    rows.push_back(std::move(row));
  }

  bool all_ok = true;
  out << "fixture                   solve    certify  grid\n";
  for (const auto& row : rows) {
    auto cell = [](bool ok) { return ok ? "pass     " : "FAIL     "; };
    out << row.name;
    for (size_t i = row.name.size(); i < 26; ++i) out << ' ';
    out << cell(row.solve_ok) << cell(row.certify_ok)
        << (row.grid_ok ? "pass" : "FAIL") << "\n";
    if (!(row.solve_ok && row.certify_ok && row.grid_ok)) {
      all_ok = false;
      if (!row.detail.empty()) out << "    " << row.detail << "\n";
    }
  }
  out << (all_ok ? "selftest: all checks passed\n"
                 : "selftest: FAILURES listed above\n");
  (void)opt;
  return all_ok ? kOk : kFailure;
}

inline int run(const Options& opt, std::istream& in, std::ostream& out,
               std::ostream& err) {
  try {
    if (opt.command == "help") {
      out << kUsage;
      return kOk;
    }
    if (opt.command == "solve") return cmd_solve(opt, out, err);
    if (opt.command == "verify") return cmd_verify(opt, out, err);
    if (opt.command == "eval") return cmd_eval(opt, in, out, err);
    if (opt.command == "sample") return cmd_sample(opt, out, err);
    if (opt.command == "diagnose") return cmd_diagnose(opt, out, err);
    if (opt.command == "selftest") return cmd_selftest(opt, out);
    err << "unknown command: " << opt.command << "\n\n" << kUsage;
    return kConfigInvalid;
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kConfigInvalid;
  } catch (const std::invalid_argument& ex) {
    err << "invalid input: " << ex.what() << "\n";
    return kConfigInvalid;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kFailure;
  }
}

inline int main(int argc, const char* const* argv) {
  Options opt;
  std::string parse_err;
  if (const int rc = parse_args(argc, argv, &opt, &parse_err)) {
    std::cerr << parse_err << "\n";
    return rc;
  }
  return run(opt, std::cin, std::cout, std::cerr);
}

}  // namespace maxent::cli
