#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "maxent/common.hpp"
#include "maxent/problem.hpp"
#include "maxent/quadrature.hpp"

namespace maxent {

struct SolverOptions {
  double tol = 1e-7;  // projected-gradient max-norm
  size_t max_iter = 300;
  size_t budget = 200000;  // integrand evaluations per dual evaluation
  uint64_t seed = 0;
  double quad_rel_tol = 1e-9;
};

struct TraceRecord {
  size_t iteration = 0;
  double objective = 0.0;
  double projected_gradient_norm = 0.0;
  double step = 0.0;
};

// Multipliers lambda >= 0 and the density exp(-alpha - sum lambda_g phi_g)
// they induce. entropy uses the fitted moments; entropy_via_bounds uses the
// declared bounds; the two agree exactly when slackness vanishes.
struct DualSolution {
  std::vector<double> lambda;
  double alpha = 0.0;
  double entropy = 0.0;
  double entropy_via_bounds = 0.0;
  std::vector<double> fitted_moments;
  std::vector<bool> active_set;
  double slackness_residual = 0.0;        // sum lambda_g (E[phi_g] - u_g)
  double entropy_identity_residual = 0.0; // |entropy - entropy_via_bounds|
  bool converged = false;
  size_t iterations = 0;
  double projected_gradient_norm = kInf;
  double alpha_error = 0.0;
  std::vector<TraceRecord> trace;
  uint64_t quadrature_seed = 0;
};

// Multiplier counted active only above a scale-aware cutoff; exact zero is
// unreachable through the projection arithmetic alone.
inline double activation_threshold(std::span<const double> lambda) {
  double linf = 0.0;
  for (double v : lambda) linf = std::max(linf, std::abs(v));
  return 1e-8 * (1.0 + linf);
}

inline double dual_objective(const MomentProblem& problem,
                             std::span<const double> lambda,
                             const IntegrationOptions& opts) {
  for (double l : lambda)
    if (!std::isfinite(l) || l < 0.0)
      throw std::invalid_argument("dual_objective: multipliers must be >= 0");
  auto [alpha, err] = log_partition(problem, lambda, opts);
  double obj = alpha;
  for (size_t g = 0; g < lambda.size(); ++g)
    obj += lambda[g] * problem.constraints()[g].u;
  return obj;
}

// Component g is u_g - E[phi_g] under the current exponential density; all
// moments come from one shared point set.
inline std::vector<double> dual_gradient(const MomentProblem& problem,
                                         std::span<const double> lambda,
                                         const IntegrationOptions& opts) {
  for (double l : lambda)
    if (!std::isfinite(l) || l < 0.0)
      throw std::invalid_argument("dual_gradient: multipliers must be >= 0");
  const auto moments = moments_under(problem, lambda, opts);
  std::vector<double> grad(lambda.size());
  for (size_t g = 0; g < lambda.size(); ++g)
    grad[g] = problem.constraints()[g].u - moments[g];
  return grad;
}

namespace detail {

struct DualEval {
  double alpha = 0.0;
  double alpha_err = 0.0;
  double objective = 0.0;
  std::vector<double> moments;
};

inline DualEval evaluate_dual(const MomentProblem& problem,
                              std::span<const double> lambda,
                              const IntegrationOptions& qopts) {
  const auto terms = exponent_terms_for(problem, lambda);
  std::vector<MeasurementFunction> weights;
  weights.reserve(problem.size());
  for (const auto& c : problem.constraints()) weights.push_back(c.phi);
  const BatchResult br =
      batch_integrate(problem.support(), terms, weights, qopts);
  DualEval e;
  e.alpha = br.log_z;
  e.alpha_err = br.log_z_err;
  e.moments = br.moments;
  e.objective = br.log_z;
  for (size_t g = 0; g < lambda.size(); ++g)
    e.objective += lambda[g] * problem.constraints()[g].u;
  return e;
}

}  // namespace detail

// Assembles the solution fields at a fixed multiplier vector without any
// optimization; used to wrap externally supplied multipliers.
inline DualSolution solution_from_lambda(const MomentProblem& problem,
                                         std::span<const double> lambda,
                                         const IntegrationOptions& qopts) {
  if (lambda.size() != problem.size())
    throw std::invalid_argument("solution_from_lambda: multiplier count mismatch");
  for (double l : lambda)
    if (!std::isfinite(l) || l < 0.0)
      throw std::invalid_argument(
          "solution_from_lambda: multipliers must be finite and >= 0");
  DualSolution sol;
  sol.lambda.assign(lambda.begin(), lambda.end());
  sol.quadrature_seed = qopts.seed;
  if (problem.size() == 0) {
    const BatchResult br = batch_integrate(problem.support(), {}, {}, qopts);
    sol.alpha = br.log_z;
    sol.alpha_error = br.log_z_err;
    sol.entropy = sol.entropy_via_bounds = br.log_z;
    sol.converged = true;
    sol.projected_gradient_norm = 0.0;
    return sol;
  }
  const auto e = detail::evaluate_dual(problem, lambda, qopts);
  sol.alpha = e.alpha;
  sol.alpha_error = e.alpha_err;
  sol.fitted_moments = e.moments;
  const double thresh = activation_threshold(sol.lambda);
  sol.active_set.resize(problem.size());
  sol.entropy = e.alpha;
  sol.entropy_via_bounds = e.alpha;
  sol.slackness_residual = 0.0;
  double pg = 0.0;
  for (size_t g = 0; g < problem.size(); ++g) {
    const double u = problem.constraints()[g].u;
    sol.active_set[g] = sol.lambda[g] > thresh;
    sol.entropy += sol.lambda[g] * e.moments[g];
    sol.entropy_via_bounds += sol.lambda[g] * u;
    sol.slackness_residual += sol.lambda[g] * (e.moments[g] - u);
    const double grad = u - e.moments[g];
    if (sol.lambda[g] > 0.0 || grad < 0.0)
      pg = std::max(pg, std::abs(grad));
  }
  sol.entropy_identity_residual =
      std::abs(sol.entropy - sol.entropy_via_bounds);
  sol.projected_gradient_norm = pg;
  sol.converged = true;
  sol.iterations = 0;
  return sol;
}

// Minimizes D(lambda) = alpha(lambda) + sum lambda_g u_g over lambda >= 0 by
// projected quasi-Newton descent: BFGS curvature on the free coordinates,
// componentwise projection, Armijo backtracking. The quadrature seed is
// frozen for the whole solve so D is a deterministic function of lambda.
//
// Existence should be diagnosed before calling (see certify/diagnose); solve
// itself only reports divergence at the initial point, which signals a
// missing stabilizing constraint.
inline DualSolution solve(const MomentProblem& problem,
                          const SolverOptions& options = {}) {
  const size_t n = problem.size();
  const IntegrationOptions qopts{options.budget, options.quad_rel_tol,
                                 options.seed};
  if (n == 0) return solution_from_lambda(problem, {}, qopts);

  std::vector<double> lambda(n);
  for (size_t g = 0; g < n; ++g) {
    const auto& a = problem.constraints()[g].phi.attributes();
    const bool declared_stable = (a.is_convex && a.is_coercive) || a.is_well_behaved;
    lambda[g] = declared_stable ? 1.0 : 1e-3;
  }

  detail::DualEval cur;
  try {
    cur = detail::evaluate_dual(problem, lambda, qopts);
  } catch (const DivergentIntegralError& ex) {
    throw DivergentIntegralError(
        std::string("partition function diverges at the initial multipliers; "
                    "no constraint stabilizes the exponent (declare one "
                    "stable or add a stabilizing measurement): ") +
        ex.what());
  }

  auto gradient_of = [&](const detail::DualEval& e) {
    std::vector<double> g(n);
    for (size_t k = 0; k < n; ++k)
      g[k] = problem.constraints()[k].u - e.moments[k];
    return g;
  };

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(
      static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  bool h_is_identity = true;
  bool first_update = true;

  DualSolution sol;
  sol.quadrature_seed = options.seed;
  std::vector<double> grad = gradient_of(cur);
  double last_step = 0.0;
  bool converged = false;
  size_t iter = 0;
  int stalls = 0;

  for (iter = 1; iter <= options.max_iter; ++iter) {
    double pgnorm = 0.0;
    for (size_t g = 0; g < n; ++g)
      if (lambda[g] > 0.0 || grad[g] < 0.0)
        pgnorm = std::max(pgnorm, std::abs(grad[g]));
    sol.trace.push_back({iter, cur.objective, pgnorm, last_step});
    if (pgnorm < options.tol) {
      converged = true;
      break;
    }

    // Free coordinates get the quasi-Newton metric; coordinates pinned at
    // zero by a positive gradient are frozen this iteration.
    std::vector<size_t> free_idx;
    for (size_t g = 0; g < n; ++g)
      if (!(lambda[g] <= 0.0 && grad[g] > 0.0)) free_idx.push_back(g);
    std::vector<double> dir(n, 0.0);
    if (!free_idx.empty()) {
      Eigen::VectorXd gf(static_cast<Eigen::Index>(free_idx.size()));
      for (size_t i = 0; i < free_idx.size(); ++i)
        gf[static_cast<Eigen::Index>(i)] = grad[free_idx[i]];
      Eigen::MatrixXd hf(free_idx.size(), free_idx.size());
      for (size_t i = 0; i < free_idx.size(); ++i)
        for (size_t j = 0; j < free_idx.size(); ++j)
          hf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              h_inv(static_cast<Eigen::Index>(free_idx[i]),
                    static_cast<Eigen::Index>(free_idx[j]));
      const Eigen::VectorXd df = -(hf * gf);
      for (size_t i = 0; i < free_idx.size(); ++i)
        dir[free_idx[i]] = df[static_cast<Eigen::Index>(i)];
    }
    double descent = 0.0;
    for (size_t g = 0; g < n; ++g) descent += dir[g] * grad[g];
    if (!(descent < 0.0)) {
      h_inv.setIdentity();
      h_is_identity = true;
      first_update = true;
      for (size_t g = 0; g < n; ++g)
        dir[g] = (lambda[g] <= 0.0 && grad[g] > 0.0) ? 0.0 : -grad[g];
    }

    // Armijo backtracking on the projected path; a divergent trial counts as
    // +inf and just shrinks the step.
    double t = 1.0;
    bool accepted = false;
    std::vector<double> trial(n);
    detail::DualEval trial_eval;
    for (int halving = 0; halving < 50; ++halving, t *= 0.5) {
      bool moved = false;
      for (size_t g = 0; g < n; ++g) {
        trial[g] = std::max(0.0, lambda[g] + t * dir[g]);
        if (trial[g] != lambda[g]) moved = true;
      }
      if (!moved) break;
      try {
        trial_eval = detail::evaluate_dual(problem, trial, qopts);
      } catch (const DivergentIntegralError&) {
        continue;
      }
      double predicted = 0.0;
      for (size_t g = 0; g < n; ++g)
        predicted += grad[g] * (trial[g] - lambda[g]);
      if (trial_eval.objective <= cur.objective + 1e-4 * predicted) {
        accepted = true;
        break;
      }
    }

    if (!accepted) {
      if (h_is_identity && ++stalls >= 2) break;
      h_inv.setIdentity();
      h_is_identity = true;
      first_update = true;
      continue;
    }
    stalls = 0;

    const std::vector<double> g_new = gradient_of(trial_eval);
    Eigen::VectorXd s(static_cast<Eigen::Index>(n)),
        y(static_cast<Eigen::Index>(n));
    for (size_t g = 0; g < n; ++g) {
      s[static_cast<Eigen::Index>(g)] = trial[g] - lambda[g];
      y[static_cast<Eigen::Index>(g)] = g_new[g] - grad[g];
    }
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first_update) {
        h_inv = (sy / y.dot(y)) *
                Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(n));
        first_update = false;
      }
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(
          static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      const double rho = 1.0 / sy;
      h_inv = (eye - rho * s * y.transpose()) * h_inv *
                  (eye - rho * y * s.transpose()) +
              rho * s * s.transpose();
      h_is_identity = false;
    }
    lambda = trial;
    cur = trial_eval;
    grad = g_new;
    last_step = t;
  }

  sol.lambda = lambda;
  sol.alpha = cur.alpha;
  sol.alpha_error = cur.alpha_err;
  sol.fitted_moments = cur.moments;
  sol.iterations = std::min(iter, options.max_iter);
  sol.converged = converged;
  double pg = 0.0;
  for (size_t g = 0; g < n; ++g)
    if (lambda[g] > 0.0 || grad[g] < 0.0)
      pg = std::max(pg, std::abs(grad[g]));
  sol.projected_gradient_norm = pg;
  const double thresh = activation_threshold(lambda);
  sol.active_set.resize(n);
  sol.entropy = cur.alpha;
  sol.entropy_via_bounds = cur.alpha;
  sol.slackness_residual = 0.0;
  for (size_t g = 0; g < n; ++g) {
    const double u = problem.constraints()[g].u;
    sol.active_set[g] = lambda[g] > thresh;
    sol.entropy += lambda[g] * cur.moments[g];
    sol.entropy_via_bounds += lambda[g] * u;
    sol.slackness_residual += lambda[g] * (cur.moments[g] - u);
  }
  sol.entropy_identity_residual =
      std::abs(sol.entropy - sol.entropy_via_bounds);
  return sol;
}

// pi(x) = 1_S(x) exp(-alpha - sum lambda_g phi_g(x)).
inline double density_at(const DualSolution& solution,
                         const MomentProblem& problem,
                         std::span<const double> x) {
  validate_point(x, problem.dimension(), "density_at");
  if (!problem.support().contains(x)) return 0.0;
  double exponent = solution.alpha;
  for (size_t g = 0; g < problem.size(); ++g)
    if (solution.lambda[g] != 0.0)
      exponent += solution.lambda[g] * problem.constraints()[g].phi.value(x);
  return std::exp(-exponent);
}

}  // namespace maxent
