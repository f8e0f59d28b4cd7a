#include <catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "maxent/cli.hpp"
#include "maxent/config.hpp"

using namespace maxent;
namespace fs = std::filesystem;

#ifndef MAXENT_CLI_PATH
#define MAXENT_CLI_PATH "./maxent"
#endif

namespace {

const char* kExpConfig = R"({
  "schema": "maxent-config/1",
  "dimension": 1,
  "support": {"shape": "box", "lower": [0.0], "upper": ["inf"]},
  "constraints": [
    {"kind": "power_moment", "axis": 0, "exponent": 1.0, "u": 1.0}
  ],
  "solver": {"budget": 60000, "seed": 42},
  "quadrature": {"budget": 60000, "seed": 42}
})";

fs::path test_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() /
             ("maxent_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
  const auto path = test_dir() / name;
  std::ofstream f(path, std::ios::binary);
  f << content;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const std::string& stdin_text = "",
                  const std::string& extra_env = "") {
  const auto out_path = test_dir() / "stdout.txt";
  const auto err_path = test_dir() / "stderr.txt";
  const auto in_path = test_dir() / "stdin.txt";
  {
    std::ofstream f(in_path, std::ios::binary);
    f << stdin_text;
  }
  std::string cmd = extra_env + " \"" MAXENT_CLI_PATH "\" " + args + " < \"" +
                    in_path.string() + "\" > \"" + out_path.string() +
                    "\" 2> \"" + err_path.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

}  // namespace

TEST_CASE("argument parser maps flags and rejects junk") {
  cli::Options opt;
  std::string err;
  {
    const char* argv[] = {"maxent", "solve",  "--config", "c.json",
                          "--out",  "outdir", "--force",  "--quiet"};
    REQUIRE(cli::parse_args(8, argv, &opt, &err) == 0);
    CHECK(opt.command == "solve");
    CHECK(opt.config_path == "c.json");
    CHECK(opt.out_dir == "outdir");
    CHECK(opt.force);
    CHECK(opt.quiet);
  }
  {
    cli::Options o2;
    const char* argv[] = {"maxent", "sample", "--n", "250", "--seed", "9"};
    REQUIRE(cli::parse_args(6, argv, &o2, &err) == 0);
    CHECK(o2.n == 250);
    REQUIRE(o2.seed_flag.has_value());
    CHECK(*o2.seed_flag == 9);
  }
  {
    cli::Options o3;
    const char* argv[] = {"maxent", "solve", "--bogus"};
    CHECK(cli::parse_args(3, argv, &o3, &err) == cli::kConfigInvalid);
    CHECK(err.find("--bogus") != std::string::npos);
  }
  {
    cli::Options o4;
    const char* argv[] = {"maxent", "sample", "--n", "zero"};
    CHECK(cli::parse_args(4, argv, &o4, &err) == cli::kConfigInvalid);
  }
  {
    cli::Options o5;
    const char* argv[] = {"maxent", "verify", "--config", "c.json",
                          "sol.json"};
    REQUIRE(cli::parse_args(5, argv, &o5, &err) == 0);
    CHECK(o5.solution_path == "sol.json");
  }
}

TEST_CASE("config parser reports field anchored errors") {
  auto parse = [](const std::string& text) {
    return parse_config(ojson::parse(text));
  };

  CHECK_NOTHROW(parse(kExpConfig));

  // Malformed bound: the path must reach the exact field.
  try {
    parse(R"({"schema": "maxent-config/1", "dimension": 1,
              "support": {"lower": [0.0], "upper": [4.0]},
              "constraints": [{"kind": "power_moment", "axis": 0,
                               "exponent": 1.0, "u": []}]})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& ex) {
    CHECK(std::string(ex.what()).find("constraints[0].u") !=
          std::string::npos);
  }

  CHECK_THROWS_AS(parse(R"({"dimension": 1,
                            "support": {"lower": [0.0], "upper": [1.0]}})"),
                  ConfigError);  // missing schema
  CHECK_THROWS_AS(parse(R"({"schema": "maxent-config/9", "dimension": 1,
                            "support": {"lower": [0.0], "upper": [1.0]}})"),
                  ConfigError);  // wrong schema
  CHECK_THROWS_AS(parse(R"({"schema": "maxent-config/1", "dimension": 1,
                            "support": {"lower": [0.0], "upper": [1.0]},
                            "sovler": {}})"),
                  ConfigError);  // typo'd section must not be ignored
  CHECK_THROWS_AS(parse(R"({"schema": "maxent-config/1", "dimension": 1,
                            "support": {"lower": [0.0], "upper": [1.0]},
                            "constraints": [{"kind": "power_moment",
                                             "axis": 3, "exponent": 2.0,
                                             "u": 1.0}]})"),
                  ConfigError);  // axis out of range
  CHECK_THROWS_AS(parse(R"({"schema": "maxent-config/1", "dimension": 2,
                            "support": {"lower": [0.0], "upper": [1.0]}})"),
                  ConfigError);  // bounds arity

  // Admissibility failures are typed differently from parse failures.
  CHECK_THROWS_AS(parse(R"({"schema": "maxent-config/1", "dimension": 1,
                            "support": {"lower": ["-inf"], "upper": ["inf"]},
                            "constraints": [{"kind": "power_moment",
                                             "axis": 0, "exponent": 1.0,
                                             "u": 1.0}]})"),
                  DeclarationError);
}

TEST_CASE("config carries solver and quadrature settings through") {
  const auto config = parse_config(ojson::parse(kExpConfig));
  CHECK(config.dimension == 1);
  CHECK(config.problem.size() == 1);
  CHECK(config.solver.budget == 60000);
  CHECK(config.solver.seed == 42);
  CHECK(config.quadrature.seed == 42);
  CHECK(config.output.report_path == "report.json");
  CHECK(config.echo.at("dimension") == 1);
}

TEST_CASE("declared attribute blocks override the structural defaults") {
  const auto config = parse_config(ojson::parse(R"({
    "schema": "maxent-config/1",
    "dimension": 1,
    "support": {"lower": [0.0], "upper": ["inf"]},
    "constraints": [
      {"kind": "power_moment", "axis": 0, "exponent": 1.0, "u": 1.0,
       "declared": {"well_behaved": true, "well_behaved_radius": 2.0,
                    "lower_bound": 0.0}}
    ]
  })"));
  const auto& phi = config.problem.constraints()[0].phi;
  CHECK(phi.attributes().is_well_behaved);
  CHECK(phi.attributes().well_behaved_radius == 2.0);
  CHECK(phi.attributes().lower_bound == 0.0);
  CHECK(phi.value(std::vector{3.0}) == 3.0);
}

TEST_CASE("quadratic form and halfspace configs build full problems") {
  const auto config = parse_config(ojson::parse(R"({
    "schema": "maxent-config/1",
    "dimension": 2,
    "support": {"shape": "box_with_halfspaces",
                "lower": [0.0, 0.0], "upper": [2.0, 2.0],
                "halfspaces": [{"normal": [1.0, 1.0], "offset": 3.0}]},
    "constraints": [
      {"kind": "quadratic_form", "matrix": [[1.0, 0.0], [0.0, 2.0]],
       "u": 1.5},
      {"kind": "norm_power", "exponent": 1.0, "u": 2.0},
      {"kind": "indicator_complement",
       "region": {"lower": [0.0, 0.0], "upper": [1.5, 1.5]}, "u": 0.25}
    ]
  })"));
  CHECK(config.problem.size() == 3);
  CHECK(config.problem.constraints()[0].phi.value(std::vector{1.0, 0.5}) ==
        Catch::Approx(1.5));
  CHECK(config.problem.support().contains(std::vector{1.0, 1.0}));
  CHECK_FALSE(config.problem.support().contains(std::vector{1.9, 1.9}));
}

TEST_CASE("solution claims load from bare objects and full reports") {
  const auto bare = parse_solution_claim(ojson::parse(
      R"({"lambda": [1.0, 0.5], "alpha": 0.25})"));
  CHECK(bare.lambda == std::vector{1.0, 0.5});
  REQUIRE(bare.alpha.has_value());
  CHECK(*bare.alpha == 0.25);
  CHECK_FALSE(bare.entropy.has_value());

  const auto nested = parse_solution_claim(ojson::parse(
      R"({"solution": {"lambda": [2.0], "entropy": 1.5}})"));
  CHECK(nested.lambda == std::vector{2.0});
  REQUIRE(nested.entropy.has_value());

  CHECK_THROWS_AS(parse_solution_claim(ojson::parse(R"({"alpha": 1.0})")),
                  ConfigError);
}

TEST_CASE("run reports round trip through their serialization") {
  const auto config = parse_config(ojson::parse(kExpConfig));
  RunReport report;
  report.config_echo = config.echo;
  report.diagnosis = diagnose_existence(config.problem, 5000);
  const auto sol = solve(config.problem, config.solver);
  report.solution = sol;
  report.certificate = certify(config.problem, sol, config.quadrature);
  report.timings.solver_iterations = sol.iterations;
  report.timings.solver_budget = config.solver.budget;
  report.timings.certificate_budget = 4 * config.quadrature.budget;

  const std::string once = report_to_json(report).dump(2);
  const RunReport parsed = report_from_json(ojson::parse(once));
  const std::string twice = report_to_json(parsed).dump(2);
  CHECK(once == twice);

  // Route-none reports serialize a null solution and survive the trip too.
  RunReport bare;
  bare.config_echo = config.echo;
  bare.diagnosis.notes.push_back("nothing to see");
  const std::string b1 = report_to_json(bare).dump(2);
  const std::string b2 = report_to_json(report_from_json(ojson::parse(b1)))
                             .dump(2);
  CHECK(b1 == b2);
}

TEST_CASE("density csv is exact decimal with unix line endings") {
  const auto config = parse_config(ojson::parse(kExpConfig));
  const auto sol = solve(config.problem, config.solver);
  std::ostringstream csv;
  const size_t rows = write_density_csv(csv, config.problem, sol, {0.0},
                                        {9.0}, 128);
  CHECK(rows == 128);
  const std::string text = csv.str();
  CHECK(text.rfind("x_1,density\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);

  // Values reparse to the exact doubles that were written.
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  size_t checked = 0;
  double mass = 0.0;
  const double width = 9.0 / 128.0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    const double x = std::strtod(line.substr(0, comma).c_str(), nullptr);
    const double rho = std::strtod(line.substr(comma + 1).c_str(), nullptr);
    CHECK(rho >= 0.0);
    CHECK(rho == density_at(sol, config.problem,
                            std::vector{x}));  // bit-exact round trip
    mass += rho * width;
    ++checked;
  }
  CHECK(checked == rows);
  CHECK(mass == Catch::Approx(1.0).margin(1e-2));
}

TEST_CASE("solve command produces certified output end to end") {
  const auto cfg = write_file("exp.json", kExpConfig);
  const auto out = (test_dir() / "solve_out").string();
  const auto r = run_cli("solve --config \"" + cfg.string() + "\" --out \"" +
                         out + "\"");
  CAPTURE(r.err);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("certificate: certified") != std::string::npos);

  const auto report = ojson::parse(slurp(fs::path(out) / "report.json"));
  CHECK(report.at("solution").at("lambda")[0].get<double>() ==
        Catch::Approx(1.0).margin(1e-3));
  CHECK(report.at("solution").at("entropy").get<double>() ==
        Catch::Approx(1.0).margin(1e-4));
  CHECK(report.at("certificate").at("verdict") == "certified");
  CHECK(report.at("diagnosis").at("route") == "stabilizing");
  CHECK(fs::exists(fs::path(out) / "density.csv"));
}

TEST_CASE("identical configs give byte identical artifacts") {
  const auto cfg = write_file("exp_det.json", kExpConfig);
  const auto out1 = (test_dir() / "det1").string();
  const auto out2 = (test_dir() / "det2").string();
  const auto r1 = run_cli("solve --quiet --config \"" + cfg.string() +
                          "\" --out \"" + out1 + "\"");
  const auto r2 = run_cli("solve --quiet --config \"" + cfg.string() +
                          "\" --out \"" + out2 + "\"");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(fs::path(out1) / "report.json") ==
        slurp(fs::path(out2) / "report.json"));
  CHECK(slurp(fs::path(out1) / "density.csv") ==
        slurp(fs::path(out2) / "density.csv"));
}

TEST_CASE("unstabilized infinite support exits with the route code") {
  const auto cfg = write_file("line.json", R"({
    "schema": "maxent-config/1",
    "dimension": 1,
    "support": {"lower": ["-inf"], "upper": ["inf"]},
    "constraints": [
      {"kind": "power_moment", "axis": 0, "exponent": 1.0, "u": 1.0}
    ]
  })");
  const auto r = run_cli("solve --config \"" + cfg.string() + "\" --out \"" +
                         (test_dir() / "line_out").string() + "\"");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("stabilizing constraint") != std::string::npos);
}

TEST_CASE("malformed config exits with the config code and a field path") {
  const auto cfg = write_file("bad.json", R"({
    "schema": "maxent-config/1",
    "dimension": 1,
    "support": {"lower": [0.0], "upper": [4.0]},
    "constraints": [{"kind": "power_moment", "axis": 0, "exponent": 1.0,
                     "u": []}]
  })");
  const auto r = run_cli("solve --config \"" + cfg.string() + "\"");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("constraints[0].u") != std::string::npos);
}

TEST_CASE("verify separates certified, rejected, and invalid claims") {
  const auto cfg = write_file("exp_v.json", kExpConfig);
  const auto good = write_file("sol_good.json", R"({"lambda": [1.0]})");
  const auto off = write_file("sol_off.json", R"({"lambda": [1.1]})");
  const auto neg = write_file("sol_neg.json", R"({"lambda": [-0.5]})");

  const auto r1 = run_cli("verify --config \"" + cfg.string() + "\" \"" +
                          good.string() + "\" --quiet");
  CHECK(r1.exit_code == 0);

  const auto r2 = run_cli("verify --config \"" + cfg.string() + "\" \"" +
                          off.string() + "\"");
  CHECK(r2.exit_code == 5);
  CHECK(r2.out.find("verdict: rejected") != std::string::npos);
  CHECK(r2.out.find("residuals (tolerance in parentheses):") !=
        std::string::npos);
  CHECK(r2.out.find("reason: ") != std::string::npos);
  CHECK(r2.out.find("slackness") != std::string::npos);

  const auto r3 = run_cli("verify --config \"" + cfg.string() + "\" \"" +
                          neg.string() + "\"");
  CHECK(r3.exit_code == 2);
}

TEST_CASE("eval appends densities to streamed points") {
  const auto cfg = write_file("exp_e.json", kExpConfig);
  const auto r = run_cli("eval --config \"" + cfg.string() + "\"",
                         "0.5\n2.0\n");
  REQUIRE(r.exit_code == 0);
  std::istringstream out(r.out);
  std::string l1, l2;
  std::getline(out, l1);
  std::getline(out, l2);
  CHECK(l1.rfind("0.5 ", 0) == 0);
  const double d1 = std::strtod(l1.substr(4).c_str(), nullptr);
  CHECK(d1 == Catch::Approx(std::exp(-0.5)).margin(1e-6));
  const double d2 = std::strtod(l2.substr(4).c_str(), nullptr);
  CHECK(d2 == Catch::Approx(std::exp(-2.0)).margin(1e-6));

  const auto bad = run_cli("eval --config \"" + cfg.string() + "\"",
                           "0.5 0.5\n");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("sample writes the requested number of in support rows") {
  const auto cfg = write_file("exp_s.json", kExpConfig);
  const auto out = (test_dir() / "sample_out").string();
  const auto r = run_cli("sample --config \"" + cfg.string() + "\" --out \"" +
                         out + "\" --n 64 --seed 3 --quiet");
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(fs::path(out) / "samples.csv");
  CHECK(csv.rfind("x_1,density\n", 0) == 0);
  size_t lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 65);  // header + 64 samples

  // Same seed, same bytes; different seed, different bytes.
  const auto out2 = (test_dir() / "sample_out2").string();
  run_cli("sample --config \"" + cfg.string() + "\" --out \"" + out2 +
          "\" --n 64 --seed 3 --quiet");
  CHECK(slurp(fs::path(out) / "samples.csv") ==
        slurp(fs::path(out2) / "samples.csv"));
  const auto out3 = (test_dir() / "sample_out3").string();
  run_cli("sample --config \"" + cfg.string() + "\" --out \"" + out3 +
          "\" --n 64 --seed 4 --quiet");
  CHECK(slurp(fs::path(out) / "samples.csv") !=
        slurp(fs::path(out3) / "samples.csv"));
}

TEST_CASE("environment seed overrides the configured seeds") {
  const auto cfg = write_file("exp_env.json", kExpConfig);
  const auto out = (test_dir() / "env_out").string();
  const auto r = run_cli("solve --quiet --config \"" + cfg.string() +
                             "\" --out \"" + out + "\"",
                         "", "MAXENT_SEED=777");
  REQUIRE(r.exit_code == 0);
  const auto report = ojson::parse(slurp(fs::path(out) / "report.json"));
  CHECK(report.at("solution").at("quadrature_seed").get<uint64_t>() == 777);

  const auto bad = run_cli("solve --quiet --config \"" + cfg.string() + "\"",
                           "", "MAXENT_SEED=banana");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("diagnose reports the route without solving") {
  const auto cfg = write_file("exp_d.json", kExpConfig);
  const auto out = (test_dir() / "diag_out").string();
  const auto r = run_cli("diagnose --config \"" + cfg.string() +
                         "\" --out \"" + out + "\"");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("existence route: stabilizing") != std::string::npos);
  const auto report = ojson::parse(slurp(fs::path(out) / "report.json"));
  CHECK(report.at("solution").is_null());
  CHECK(report.at("diagnosis").at("route") == "stabilizing");
}

TEST_CASE("unknown commands and missing files fail cleanly") {
  const auto r1 = run_cli("frobnicate");
  CHECK(r1.exit_code == 2);
  const auto r2 = run_cli("solve --config /nonexistent/nope.json");
  CHECK(r2.exit_code == 2);
  const auto r3 = run_cli("");
  CHECK(r3.exit_code == 2);
}
