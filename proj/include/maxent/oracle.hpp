#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxent/common.hpp"
#include "maxent/measurement.hpp"
#include "maxent/problem.hpp"
#include "maxent/support.hpp"

namespace maxent {

// Reference problems whose maximizers are known in closed form (or, for the
// truncated exponential family, from a one-dimensional root solve that does
// not touch any quadrature or solver code). Everything here is independent
// of the machinery under test.
struct AnalyticFixture {
  std::string name;
  MomentProblem problem;
  std::vector<double> lambda_true;
  double alpha_true = 0.0;
  double entropy_true = 0.0;
  std::function<double(double)> density;  // all fixtures are univariate
  double grid_lo = 0.0;  // truncation window for discrete cross-checks
  double grid_hi = 0.0;
};

namespace detail {

// Mean of the exponential family lambda*exp(-lambda*x)/(1-exp(-lambda*T))
// on [0, T] is 1/lambda - T/(e^{lambda*T} - 1), decreasing in lambda from
// T/2 to 0. Bisection is exact enough to serve as ground truth.
inline double truncated_exponential_rate(double T, double u) {
  if (!(u > 0.0) || !(u < T / 2.0))
    throw std::invalid_argument(
        "truncated_exponential_rate: need 0 < u < T/2");
  auto mean = [T](double lambda) {
    return 1.0 / lambda - T / std::expm1(lambda * T);
  };
  double lo = 1e-8, hi = 64.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (mean(mid) > u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline std::vector<AnalyticFixture> analytic_fixtures() {
  std::vector<AnalyticFixture> out;

  {
    AnalyticFixture f{
        "uniform",
        MomentProblem(SupportSet::box({0.0}, {2.0}), {}),
        {},
        std::log(2.0),
        std::log(2.0),
        [](double x) { return (x >= 0.0 && x <= 2.0) ? 0.5 : 0.0; },
        0.0,
        2.0};
    out.push_back(std::move(f));
  }
  {
    // First moment 1 on the half line: the unit-rate exponential.
    AnalyticFixture f{
        "exponential",
        MomentProblem(SupportSet::box({0.0}, {kInf}),
                      {{MeasurementFunction::power_moment(1, 0, 1.0, false),
                        1.0}}),
        {1.0},
        0.0,
        1.0,
        [](double x) { return x >= 0.0 ? std::exp(-x) : 0.0; },
        0.0,
        40.0};
    out.push_back(std::move(f));
  }
  {
    // Second moment 1 on the line: the standard normal.
    const double alpha = 0.5 * std::log(2.0 * std::numbers::pi);
    AnalyticFixture f{
        "gaussian",
        MomentProblem(SupportSet::box({-kInf}, {kInf}),
                      {{MeasurementFunction::power_moment(1, 0, 2.0, false),
                        1.0}}),
        {0.5},
        alpha,
        alpha + 0.5,
        [](double x) {
          return std::exp(-0.5 * x * x) /
                 std::sqrt(2.0 * std::numbers::pi);
        },
        -8.0,
        8.0};
    out.push_back(std::move(f));
  }
  {
    // First absolute moment 1 on the line: the unit Laplace.
    AnalyticFixture f{
        "laplace",
        MomentProblem(SupportSet::box({-kInf}, {kInf}),
                      {{MeasurementFunction::power_moment(1, 0, 1.0, true),
                        1.0}}),
        {1.0},
        std::log(2.0),
        std::log(2.0) + 1.0,
        [](double x) { return 0.5 * std::exp(-std::abs(x)); },
        -20.0,
        20.0};
    out.push_back(std::move(f));
  }
  {
    // First moment 1 on [0, 4]: truncated exponential, rate from bisection.
    const double T = 4.0, u = 1.0;
    const double lambda = detail::truncated_exponential_rate(T, u);
    const double alpha = std::log(-std::expm1(-lambda * T) / lambda);
    AnalyticFixture f{
        "truncated-exponential",
        MomentProblem(SupportSet::box({0.0}, {T}),
                      {{MeasurementFunction::power_moment(1, 0, 1.0, false),
                        u}}),
        {lambda},
        alpha,
        alpha + lambda * u,
        [lambda, alpha, T](double x) {
          return (x >= 0.0 && x <= T) ? std::exp(-alpha - lambda * x) : 0.0;
        },
        0.0,
        T};
    out.push_back(std::move(f));
  }
  return out;
}

// A bound so loose it never binds: the maximizer is plain uniform and the
// multiplier must come out exactly zero.
inline AnalyticFixture inactive_fixture() {
  return AnalyticFixture{
      "inactive-bound",
      MomentProblem(SupportSet::box({-10.0}, {10.0}),
                    {{MeasurementFunction::power_moment(1, 0, 2.0, false),
                      200.0}}),
      {0.0},
      std::log(20.0),
      std::log(20.0),
      [](double x) { return (x >= -10.0 && x <= 10.0) ? 0.05 : 0.0; },
      -10.0,
      10.0};
}

// Discrete cross-check: maximize -sum p_i ln(p_i / delta) over probability
// vectors on a uniform grid subject to the moment bounds. This is its own
// tiny projected-gradient solver on purpose; it shares no code with the
// continuous path, so agreement between the two is evidence, not an echo.
struct GridMaxent {
  std::vector<double> centers;
  std::vector<double> p;
  std::vector<double> nu;
  std::vector<double> moments;
  double delta = 0.0;
  double entropy = 0.0;
  bool converged = false;
  size_t iterations = 0;
};

inline GridMaxent grid_solve(const MomentProblem& problem, double lo,
                             double hi, size_t cells = 4000) {
  if (problem.dimension() != 1)
    throw std::invalid_argument("grid_solve: univariate problems only");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("grid_solve: need a finite window lo < hi");
  const size_t m = problem.size();

  GridMaxent grid;
  grid.delta = (hi - lo) / static_cast<double>(cells);
  grid.centers.resize(cells);
  std::vector<std::vector<double>> phi(m, std::vector<double>(cells));
  std::vector<char> inside(cells, 0);
  std::vector<double> x(1);
  for (size_t i = 0; i < cells; ++i) {
    grid.centers[i] = lo + (static_cast<double>(i) + 0.5) * grid.delta;
    x[0] = grid.centers[i];
    inside[i] = problem.support().contains(x) ? 1 : 0;
    for (size_t g = 0; g < m; ++g)
      phi[g][i] = inside[i] ? problem.constraints()[g].phi.value(x) : 0.0;
  }

  // Dual descent on nu >= 0 of ln(sum delta*exp(-nu.phi)) + nu.u.
  auto evaluate = [&](const std::vector<double>& nu, std::vector<double>* p,
                      std::vector<double>* mom) {
    double shift = -kInf;
    std::vector<double> e(cells, -kInf);
    for (size_t i = 0; i < cells; ++i) {
      if (!inside[i]) continue;
      double s = 0.0;
      for (size_t g = 0; g < m; ++g) s += nu[g] * phi[g][i];
      e[i] = -s;
      shift = std::max(shift, e[i]);
    }
    double z = 0.0;
    for (size_t i = 0; i < cells; ++i)
      if (inside[i]) z += std::exp(e[i] - shift);
    const double log_z = shift + std::log(z) + std::log(grid.delta);
    p->assign(cells, 0.0);
    mom->assign(m, 0.0);
    for (size_t i = 0; i < cells; ++i) {
      if (!inside[i]) continue;
      (*p)[i] = std::exp(e[i] - shift) / z;
      for (size_t g = 0; g < m; ++g) (*mom)[g] += (*p)[i] * phi[g][i];
    }
    double dual = log_z;
    for (size_t g = 0; g < m; ++g) dual += nu[g] * problem.constraints()[g].u;
    return dual;
  };

  grid.nu.assign(m, m ? 0.5 : 0.0);
  std::vector<double> p_cur, mom_cur;
  double dual = evaluate(grid.nu, &p_cur, &mom_cur);
  const size_t max_iter = 5000;
  size_t it = 0;
  double pg_last = 0.0;
  for (; it < max_iter && m > 0; ++it) {
    std::vector<double> g(m), pg(m);
    double pg_norm = 0.0;
    for (size_t k = 0; k < m; ++k) {
      g[k] = problem.constraints()[k].u - mom_cur[k];
      pg[k] = (grid.nu[k] <= 0.0 && g[k] > 0.0) ? 0.0 : g[k];
      pg_norm = std::max(pg_norm, std::abs(pg[k]));
    }
    pg_last = pg_norm;
    if (pg_norm < 1e-11) {
      grid.converged = true;
      break;
    }
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half) {
      std::vector<double> trial(m);
      double predicted = 0.0;
      for (size_t k = 0; k < m; ++k) {
        trial[k] = std::max(0.0, grid.nu[k] - step * g[k]);
        predicted += g[k] * (trial[k] - grid.nu[k]);
      }
      std::vector<double> p_trial, mom_trial;
      const double dual_trial = evaluate(trial, &p_trial, &mom_trial);
      if (dual_trial <= dual + 1e-4 * predicted) {
        grid.nu = std::move(trial);
        p_cur = std::move(p_trial);
        mom_cur = std::move(mom_trial);
        dual = dual_trial;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // dual differences below rounding; accept if near-flat
  }
  if (m == 0 || pg_last < 1e-7) grid.converged = true;
  grid.iterations = it;

  grid.p = p_cur;
  grid.moments = mom_cur;
  grid.entropy = 0.0;
  for (size_t i = 0; i < cells; ++i)
    if (grid.p[i] > 0.0)
      grid.entropy -= grid.p[i] * std::log(grid.p[i] / grid.delta);
  return grid;
}

}  // namespace maxent
