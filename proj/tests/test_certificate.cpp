#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "maxent/certificate.hpp"
#include "maxent/common.hpp"
#include "maxent/dual_solver.hpp"
#include "maxent/oracle.hpp"
#include "maxent/sampling.hpp"

using namespace maxent;

namespace {

SolverOptions quick() {
  SolverOptions o;
  o.budget = 60000;
  return o;
}

IntegrationOptions quad() {
  IntegrationOptions o;
  o.budget = 60000;
  return o;
}

}  // namespace

TEST_CASE("true solutions are certified on every fixture") {
  for (const auto& f : analytic_fixtures()) {
    INFO(f.name);
    const auto sol = solve(f.problem, quick());
    const auto cert = certify(f.problem, sol, quad());
    CHECK(cert.certified());
    CHECK(cert.rejection_reason.empty());
    CHECK(cert.support_assumption);
    for (double r : cert.feasibility_residuals)
      CHECK(r <= cert.tolerances.feasibility);
    CHECK(cert.slackness_residual <= cert.tolerances.slackness);
    CHECK(cert.entropy_identity_residual <= cert.tolerances.entropy);
  }
}

TEST_CASE("tolerances scale with the bound and entropy magnitudes") {
  const auto f = analytic_fixtures()[1];
  const auto sol = solve(f.problem, quick());
  const auto tol = default_tolerances(f.problem, sol);
  CHECK(tol.feasibility == Catch::Approx(1e-5 * (1.0 + 1.0)));
  CHECK(tol.slackness == tol.feasibility);
  CHECK(tol.entropy == Catch::Approx(1e-4 * (1.0 + std::abs(sol.entropy))));
}

TEST_CASE("perturbed multipliers are rejected through slackness") {
  const auto f = analytic_fixtures()[1];  // exponential, u = 1
  auto sol = solution_from_lambda(f.problem, std::vector{1.1}, quad());
  const auto cert = certify(f.problem, sol, quad());
  CHECK_FALSE(cert.certified());
  // E[x] at rate 1.1 is 1/1.1, so the slack is 1.1*(1/1.1 - 1) = -0.1.
  CHECK(cert.slackness_residual == Catch::Approx(0.1).margin(1e-6));
  CHECK(cert.slackness_residual >= 0.05);
  CHECK(cert.rejection_reason.find("slackness") != std::string::npos);
}

TEST_CASE("an infeasible multiplier is rejected through feasibility") {
  const auto f = analytic_fixtures()[1];
  auto sol = solution_from_lambda(f.problem, std::vector{0.25}, quad());
  const auto cert = certify(f.problem, sol, quad());
  CHECK_FALSE(cert.certified());
  // E[x] at rate 0.25 is 4, violating u = 1 by 3.
  CHECK(cert.feasibility_residuals[0] == Catch::Approx(3.0).margin(1e-4));
}

TEST_CASE("a wrong entropy claim is rejected through the identity") {
  const auto f = analytic_fixtures()[3];  // laplace
  auto sol = solve(f.problem, quick());
  sol.entropy += 0.01;
  const auto cert = certify(f.problem, sol, quad());
  CHECK_FALSE(cert.certified());
  CHECK(cert.entropy_identity_residual == Catch::Approx(0.01).margin(1e-5));
  CHECK(cert.rejection_reason.find("entropy identity") != std::string::npos);
}

TEST_CASE("certificate validates its inputs") {
  const auto f = analytic_fixtures()[1];
  auto sol = solve(f.problem, quick());
  auto bad = sol;
  bad.lambda = {-0.5};
  CHECK_THROWS_AS(certify(f.problem, bad, quad()), std::invalid_argument);
  bad.lambda = {0.5, 0.5};
  CHECK_THROWS_AS(certify(f.problem, bad, quad()), std::invalid_argument);
}

TEST_CASE("recomputation uses an independent stream and a larger budget") {
  const auto f = analytic_fixtures()[2];
  const auto sol = solve(f.problem, quick());
  const auto cert = certify(f.problem, sol, quad());
  // Recomputed alpha agrees with the solve to quadrature accuracy but is a
  // genuinely fresh number.
  CHECK(cert.recomputed_alpha == Catch::Approx(sol.alpha).margin(1e-7));
  CHECK(cert.recomputed_moments[0] ==
        Catch::Approx(f.problem.constraints()[0].u).margin(1e-6));
}

TEST_CASE("finite volume supports take the finite volume route") {
  const auto f = analytic_fixtures()[0];  // uniform on [0, 2]
  const auto diag = diagnose_existence(f.problem, 20000);
  CHECK(diag.route == ExistenceDiagnosis::Route::FiniteVolume);
  CHECK(diag.c_nonzero_volume);
  CHECK(diag.entropy_upper == Catch::Approx(std::log(2.0)));
  CHECK(diag.entropy_lower <= diag.entropy_upper + 1e-9);
  CHECK(diag.slater_found);
}

TEST_CASE("infinite volume with a stable constraint takes the stabilizing route") {
  const auto f = analytic_fixtures()[1];  // exponential on [0, inf)
  const auto diag = diagnose_existence(f.problem, 20000);
  CHECK(diag.route == ExistenceDiagnosis::Route::Stabilizing);
  REQUIRE(diag.stabilizer_index.has_value());
  CHECK(*diag.stabilizer_index == 0);
  REQUIRE_FALSE(diag.c_witnesses.empty());
  for (const auto& w : diag.c_witnesses) {
    CHECK(w[0] >= 0.0);
    CHECK(w[0] <= 1.0);  // C = {x <= u}
  }
  // The lambda-grid upper bound is tight here: min at lambda = 1 gives h = 1.
  CHECK(diag.entropy_upper == Catch::Approx(1.0).margin(1e-6));
  CHECK(diag.entropy_lower <= 1.0);
}

TEST_CASE("entropy bracket actually brackets the attained entropy") {
  for (const auto& f : analytic_fixtures()) {
    INFO(f.name);
    const auto diag = diagnose_existence(f.problem, 20000);
    CHECK(diag.route != ExistenceDiagnosis::Route::None);
    CHECK(f.entropy_true <= diag.entropy_upper + 1e-6);
    CHECK(f.entropy_true >= diag.entropy_lower - 1e-2);
  }
}

TEST_CASE("boundary only feasible sets yield no route and a reason") {
  // u = 0 with phi = x on [0, inf): only x = 0 is feasible, zero volume.
  const auto x1 = MeasurementFunction::power_moment(1, 0, 1.0, false);
  const MomentProblem knife(SupportSet::box({0.0}, {kInf}), {{x1, 0.0}});
  const auto diag = diagnose_existence(knife, 20000);
  CHECK(diag.route == ExistenceDiagnosis::Route::None);
  CHECK_FALSE(diag.c_nonzero_volume);
  CHECK_FALSE(diag.slater_found);
  REQUIRE_FALSE(diag.notes.empty());
  CHECK(diag.notes[0].find("no feasible point") != std::string::npos);
}

TEST_CASE("diagnosis is monotone in the bounds") {
  // Relaxing u can only grow the feasible set the sweep sees.
  const auto x2 = MeasurementFunction::power_moment(1, 0, 2.0, false);
  const auto support = SupportSet::box({-kInf}, {kInf});
  const auto tight =
      diagnose_existence(MomentProblem(support, {{x2, 0.5}}), 20000);
  const auto loose =
      diagnose_existence(MomentProblem(support, {{x2, 2.0}}), 20000);
  CHECK(tight.c_nonzero_volume);
  CHECK(loose.c_nonzero_volume);
  CHECK(loose.c_volume_estimate >= tight.c_volume_estimate);
}

TEST_CASE("samples follow the fitted density") {
  const auto f = analytic_fixtures()[1];
  const auto sol = solve(f.problem, quick());
  const auto pts = sample(sol, f.problem, 20000, 99);
  REQUIRE(pts.size() == 20000);
  double mean = 0.0, second = 0.0, min_x = kInf;
  for (const auto& p : pts) {
    mean += p[0];
    second += p[0] * p[0];
    min_x = std::min(min_x, p[0]);
  }
  mean /= static_cast<double>(pts.size());
  second /= static_cast<double>(pts.size());
  CHECK(min_x >= 0.0);  // support respected
  // Exponential(1): mean 1, second moment 2; MC error ~ 1/sqrt(n).
  CHECK(mean == Catch::Approx(1.0).margin(0.05));
  CHECK(second == Catch::Approx(2.0).margin(0.2));
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto f = analytic_fixtures()[2];
  const auto sol = solve(f.problem, quick());
  const auto a = sample(sol, f.problem, 500, 4);
  const auto b = sample(sol, f.problem, 500, 4);
  const auto c = sample(sol, f.problem, 500, 5);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("bounded supports clip the sampler") {
  const auto f = analytic_fixtures()[4];  // truncated exponential on [0, 4]
  const auto sol = solve(f.problem, quick());
  const auto pts = sample(sol, f.problem, 5000, 12);
  double mean = 0.0;
  for (const auto& p : pts) {
    REQUIRE(p[0] >= 0.0);
    REQUIRE(p[0] <= 4.0);
    mean += p[0];
  }
  mean /= static_cast<double>(pts.size());
  CHECK(mean == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("sampler rejects impossible requests") {
  const auto f = analytic_fixtures()[1];
  const auto sol = solve(f.problem, quick());
  CHECK_THROWS_AS(sample(sol, f.problem, 0, 1), std::invalid_argument);
}
