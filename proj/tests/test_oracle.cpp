#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "maxent/common.hpp"
#include "maxent/dual_solver.hpp"
#include "maxent/oracle.hpp"

using namespace maxent;

TEST_CASE("fixture truths satisfy their own defining equations") {
  // Self-consistency of the reference values, independent of any solver:
  // alpha = ln integral exp(-lambda x) (closed forms), h = alpha + lambda*u,
  // and the density integrates to one by Riemann sum.
  const auto fixtures = analytic_fixtures();
  REQUIRE(fixtures.size() == 5);

  for (const auto& f : fixtures) {
    INFO(f.name);
    double h = f.alpha_true;
    for (size_t g = 0; g < f.lambda_true.size(); ++g)
      h += f.lambda_true[g] * f.problem.constraints()[g].u;
    CHECK(f.entropy_true == Catch::Approx(h).margin(1e-12));

    const size_t n = 200000;
    const double width = (f.grid_hi - f.grid_lo) / static_cast<double>(n);
    double mass = 0.0, moment = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double x = f.grid_lo + (static_cast<double>(i) + 0.5) * width;
      const double p = f.density(x);
      mass += p * width;
      if (!f.problem.constraints().empty())
        moment +=
            p * width * f.problem.constraints()[0].phi.value(std::vector{x});
    }
    CHECK(mass == Catch::Approx(1.0).margin(1e-6));
    if (!f.problem.constraints().empty()) {
      // Every fixture's single constraint is active at the closed form.
      CHECK(moment ==
            Catch::Approx(f.problem.constraints()[0].u).margin(1e-6));
    }
  }
}

TEST_CASE("truncated exponential rate comes from the mean equation") {
  // m(lambda) = 1/lambda - T/(e^{lambda T} - 1) must equal u at the root.
  const double T = 4.0, u = 1.0;
  const double lambda = detail::truncated_exponential_rate(T, u);
  const double mean = 1.0 / lambda - T / std::expm1(lambda * T);
  CHECK(mean == Catch::Approx(u).margin(1e-12));
  CHECK(lambda > 0.0);
  // Frozen value; guards against silent regressions of the root solve.
  CHECK(lambda == Catch::Approx(0.89837799236185645).margin(1e-11));

  CHECK_THROWS_AS(detail::truncated_exponential_rate(4.0, 2.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(detail::truncated_exponential_rate(4.0, -1.0),
                  std::invalid_argument);
}

TEST_CASE("fixture names and shapes are stable") {
  const auto fixtures = analytic_fixtures();
  CHECK(fixtures[0].name == "uniform");
  CHECK(fixtures[1].name == "exponential");
  CHECK(fixtures[2].name == "gaussian");
  CHECK(fixtures[3].name == "laplace");
  CHECK(fixtures[4].name == "truncated-exponential");
  CHECK(fixtures[0].lambda_true.empty());
  for (size_t i = 1; i < fixtures.size(); ++i)
    CHECK(fixtures[i].lambda_true.size() == 1);

  CHECK(fixtures[2].entropy_true ==
        Catch::Approx(0.5 * std::log(2.0 * std::numbers::pi *
                                     std::numbers::e))
            .margin(1e-14));
  CHECK(fixtures[3].entropy_true ==
        Catch::Approx(1.0 + std::log(2.0)).margin(1e-14));
}

TEST_CASE("grid solver matches the analytic entropies without the solver") {
  // Pure discrete cross-check: no quadrature, no BFGS.
  for (const auto& f : analytic_fixtures()) {
    INFO(f.name);
    const auto grid = grid_solve(f.problem, f.grid_lo, f.grid_hi);
    CHECK(grid.converged);
    CHECK(grid.entropy == Catch::Approx(f.entropy_true).margin(2e-3));

    double total = 0.0;
    for (double p : grid.p) total += p;
    CHECK(total == Catch::Approx(1.0).margin(1e-10));
    for (size_t g = 0; g < f.problem.size(); ++g)
      CHECK(grid.moments[g] <= f.problem.constraints()[g].u + 1e-8);
  }
}

TEST_CASE("grid multipliers approximate the continuous ones") {
  const auto f = analytic_fixtures()[4];  // truncated exponential
  const auto grid = grid_solve(f.problem, f.grid_lo, f.grid_hi);
  REQUIRE(grid.nu.size() == 1);
  CHECK(grid.nu[0] == Catch::Approx(f.lambda_true[0]).margin(1e-3));
}

TEST_CASE("grid densities recover the closed form pointwise") {
  const auto f = analytic_fixtures()[4];
  const auto grid = grid_solve(f.problem, f.grid_lo, f.grid_hi);
  double max_err = 0.0;
  for (size_t i = 0; i < grid.centers.size(); ++i) {
    const double ref = f.density(grid.centers[i]);
    max_err = std::max(max_err, std::abs(grid.p[i] / grid.delta - ref));
  }
  CHECK(max_err < 1e-3);
}

TEST_CASE("inactive bound leaves the grid distribution uniform") {
  const auto f = inactive_fixture();
  const auto grid = grid_solve(f.problem, f.grid_lo, f.grid_hi);
  CHECK(grid.converged);
  CHECK(grid.nu[0] == Catch::Approx(0.0).margin(1e-9));
  CHECK(grid.entropy == Catch::Approx(std::log(20.0)).margin(1e-6));
  CHECK(grid.moments[0] == Catch::Approx(100.0 / 3.0).margin(1e-2));
}

TEST_CASE("grid solver rejects bad windows and dimensions") {
  const auto f = analytic_fixtures()[0];
  CHECK_THROWS_AS(grid_solve(f.problem, 2.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(grid_solve(f.problem, 0.0, kInf), std::invalid_argument);

  const auto x2 = MeasurementFunction::power_moment(2, 0, 2.0, false);
  const MomentProblem twod(SupportSet::box({-1.0, -1.0}, {1.0, 1.0}),
                           {{x2, 1.0}});
  CHECK_THROWS_AS(grid_solve(twod, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("grid cells outside the support carry no mass") {
  // Window wider than the support: outside cells must stay at zero.
  const auto f = analytic_fixtures()[0];  // uniform on [0, 2]
  const auto grid = grid_solve(f.problem, -1.0, 3.0);
  for (size_t i = 0; i < grid.centers.size(); ++i) {
    if (grid.centers[i] < 0.0 || grid.centers[i] > 2.0)
      CHECK(grid.p[i] == 0.0);
  }
  CHECK(grid.entropy == Catch::Approx(std::log(2.0)).margin(1e-6));
}
