#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "maxent/common.hpp"
#include "maxent/dual_solver.hpp"
#include "maxent/problem.hpp"
#include "maxent/quadrature.hpp"
#include "maxent/stability.hpp"

namespace maxent {

struct CertificateTolerances {
  double feasibility = 0.0;
  double slackness = 0.0;
  double entropy = 0.0;
};

// Scale-aware defaults: residuals are compared against the magnitude of the
// bounds (resp. the entropy) they constrain, not against fixed absolutes.
inline CertificateTolerances default_tolerances(const MomentProblem& problem,
                                                const DualSolution& solution) {
  double u_max = 0.0;
  for (const auto& c : problem.constraints())
    u_max = std::max(u_max, std::abs(c.u));
  const double tol_moment = 1e-5 * (1.0 + u_max);
  return {tol_moment, tol_moment, 1e-4 * (1.0 + std::abs(solution.entropy))};
}

enum class CertificateVerdict { Certified, Rejected };

inline const char* to_string(CertificateVerdict v) {
  return v == CertificateVerdict::Certified ? "certified" : "rejected";
}

// Post-hoc check of a claimed solution against the optimality conditions,
// using an integration stream and budget unrelated to the solver's so that
// a quadrature artifact cannot confirm itself.
struct Certificate {
  std::vector<double> feasibility_residuals;  // max(0, E[phi] - u), per gamma
  double slackness_residual = 0.0;            // |sum lambda*(E[phi] - u)|
  bool support_assumption = true;   // density vanishes nowhere inside S
  double entropy_identity_residual = 0.0;  // |h - (alpha + sum lambda*E[phi])|
  CertificateVerdict verdict = CertificateVerdict::Rejected;
  std::string rejection_reason;
  CertificateTolerances tolerances;
  std::vector<double> recomputed_moments;
  double recomputed_alpha = 0.0;

  bool certified() const { return verdict == CertificateVerdict::Certified; }
};

inline Certificate certify(const MomentProblem& problem,
                           const DualSolution& solution,
                           const CertificateTolerances& tol,
                           const IntegrationOptions& opts) {
  const size_t m = problem.size();
  if (solution.lambda.size() != m)
    throw std::invalid_argument(
        "certify: multiplier count does not match the constraint count");
  for (double l : solution.lambda)
    if (!std::isfinite(l) || l < 0.0)
      throw std::invalid_argument(
          "certify: multipliers must be finite and nonnegative");

  Certificate cert;
  cert.tolerances = tol;
  // The exponential form never vanishes on S, so the support condition holds
  // by construction; it is recorded rather than re-measured.
  cert.support_assumption = true;

  IntegrationOptions recompute = opts;
  recompute.budget = opts.budget * 4;
  recompute.seed = derive_seed(opts.seed, 0xce47);

  std::vector<ExponentTerm> terms;
  std::vector<MeasurementFunction> weights;
  for (size_t g = 0; g < m; ++g) {
    terms.push_back({solution.lambda[g], problem.constraints()[g].phi});
    weights.push_back(problem.constraints()[g].phi);
  }
  BatchResult br;
  try {
    br = batch_integrate(problem.support(), terms, weights, recompute);
  } catch (const DivergentIntegralError& ex) {
    cert.verdict = CertificateVerdict::Rejected;
    cert.rejection_reason =
        std::string("partition integral diverged on recomputation: ") +
        ex.what();
    return cert;
  }
  cert.recomputed_alpha = br.log_z;
  cert.recomputed_moments = br.moments;

  cert.feasibility_residuals.resize(m);
  double slack = 0.0;
  double lambda_dot_moment = 0.0;
  for (size_t g = 0; g < m; ++g) {
    const double gap = br.moments[g] - problem.constraints()[g].u;
    cert.feasibility_residuals[g] = std::max(0.0, gap);
    slack += solution.lambda[g] * gap;
    lambda_dot_moment += solution.lambda[g] * br.moments[g];
  }
  cert.slackness_residual = std::abs(slack);
  cert.entropy_identity_residual =
      std::abs(solution.entropy - (br.log_z + lambda_dot_moment));

  std::ostringstream why;
  for (size_t g = 0; g < m; ++g) {
    if (cert.feasibility_residuals[g] > tol.feasibility) {
      why << "constraint " << g << " violated by "
          << cert.feasibility_residuals[g] << "; ";
    }
  }
  if (cert.slackness_residual > tol.slackness)
    why << "complementary slackness residual " << cert.slackness_residual
        << " exceeds " << tol.slackness << "; ";
  if (cert.entropy_identity_residual > tol.entropy)
    why << "entropy identity residual " << cert.entropy_identity_residual
        << " exceeds " << tol.entropy << "; ";

  cert.rejection_reason = why.str();
  cert.verdict = cert.rejection_reason.empty() ? CertificateVerdict::Certified
                                               : CertificateVerdict::Rejected;
  return cert;
}

inline Certificate certify(const MomentProblem& problem,
                           const DualSolution& solution,
                           const IntegrationOptions& opts = {}) {
  return certify(problem, solution, default_tolerances(problem, solution),
                 opts);
}

// Why a maximizer exists (or on what evidence it might not), before any
// solve: either the support has finite volume, or some constraint keeps the
// exponent integrable on its own.
struct ExistenceDiagnosis {
  enum class Route { FiniteVolume, Stabilizing, None };

  Route route = Route::None;
  bool c_nonzero_volume = false;  // feasible region has sampled mass
  std::vector<Point> c_witnesses;
  double c_volume_estimate = 0.0;
  std::optional<size_t> stabilizer_index;
  bool slater_found = false;
  std::string slater_description;
  double entropy_lower = -kInf;  // ln of the feasible-volume estimate
  double entropy_upper = kInf;   // ln|S|, or a dual value at a grid multiplier
  std::vector<std::string> notes;
};

inline const char* to_string(ExistenceDiagnosis::Route r) {
  switch (r) {
    case ExistenceDiagnosis::Route::FiniteVolume:
      return "finite-volume";
    case ExistenceDiagnosis::Route::Stabilizing:
      return "stabilizing";
    default:
      return "none";
  }
}

namespace detail {

// Quasi-random sweep of a clipped box for points satisfying every moment
// bound pointwise. Only points that clear every bound by a strict relative
// margin count as hits: a point sitting exactly on a boundary is consistent
// with a measure-zero feasible set and certifies no volume. Such grazes are
// tallied separately. Returns the hit count; fills witness points (up to 8),
// the box volume actually swept, and the per-constraint mean over hits.
inline size_t sweep_feasible(const MomentProblem& problem, double radius,
                             size_t n_points, std::vector<Point>* witnesses,
                             double* swept_volume,
                             std::vector<double>* hit_means,
                             size_t* boundary_grazes) {
  const size_t d = static_cast<size_t>(problem.dimension());
  const auto& support = problem.support();
  std::vector<double> lo(d), hi(d);
  double volume = 1.0;
  for (size_t i = 0; i < d; ++i) {
    lo[i] = std::max(support.lower()[i], -radius);
    hi[i] = std::min(support.upper()[i], radius);
    if (!(hi[i] > lo[i])) return 0;
    volume *= hi[i] - lo[i];
  }
  *swept_volume = volume;
  hit_means->assign(problem.size(), 0.0);
  *boundary_grazes = 0;
  size_t hits = 0;
  std::vector<double> x(d);
  for (size_t k = 0; k < n_points; ++k) {
    halton_point(k + 1, x);
    for (size_t i = 0; i < d; ++i) x[i] = lo[i] + x[i] * (hi[i] - lo[i]);
    if (!support.contains(x)) continue;
    bool feasible = true;
    bool strict = true;
    for (const auto& c : problem.constraints()) {
      const double v = c.phi.value(x);
      if (v > c.u) {
        feasible = false;
        break;
      }
      if (!(v < c.u - 1e-9 * (1.0 + std::abs(c.u)))) strict = false;
    }
    if (!feasible) continue;
    if (!strict) {
      ++*boundary_grazes;
      continue;
    }
    ++hits;
    for (size_t g = 0; g < problem.size(); ++g)
      (*hit_means)[g] += (problem.constraints()[g].phi.value(x) -
                          (*hit_means)[g]) /
                         static_cast<double>(hits);
    if (witnesses->size() < 8) witnesses->push_back(Point(x.begin(), x.end()));
  }
  return hits;
}

}  // namespace detail

inline ExistenceDiagnosis diagnose_existence(const MomentProblem& problem,
                                             size_t budget = 100000,
                                             uint64_t seed = 0) {
  ExistenceDiagnosis diag;
  const auto& support = problem.support();
  const size_t n_points = std::max<size_t>(budget, 1000);

  // Feasible-region sweep. Unbounded supports are clipped at growing radii;
  // the sweep stops at the first radius that finds mass, so the volume
  // estimate refers to a region the feasible set provably intersects.
  size_t hits = 0;
  size_t grazes = 0;
  double swept_volume = 0.0;
  std::vector<double> hit_means;
  const bool finite_box = support.box_is_finite();
  const std::vector<double> radii =
      finite_box ? std::vector<double>{kInf}
                 : std::vector<double>{16.0, 64.0, 256.0};
  for (double r : radii) {
    diag.c_witnesses.clear();
    size_t grazes_here = 0;
    hits = detail::sweep_feasible(problem, r, n_points, &diag.c_witnesses,
                                  &swept_volume, &hit_means, &grazes_here);
    grazes += grazes_here;
    if (hits > 0) break;
  }
  diag.c_nonzero_volume = hits > 0;
  if (hits > 0) {
    diag.c_volume_estimate =
        swept_volume * static_cast<double>(hits) /
        static_cast<double>(n_points);
    diag.entropy_lower = std::log(diag.c_volume_estimate);
  } else if (grazes > 0) {
    diag.notes.push_back(
        "feasible points found only on constraint boundaries: the feasible "
        "set appears to have zero volume, which no density can carry");
  } else {
    diag.notes.push_back(
        "no feasible point found: every swept point violates some moment "
        "bound, so the constraint set may have zero volume or be empty");
  }

  // Strict interior check: the uniform density on the sampled feasible
  // region has moments equal to the hit means; strict inequality there puts
  // a feasible density in the interior of the moment set.
  if (hits > 0) {
    if (problem.size() == 0) {
      diag.slater_found = true;
      diag.slater_description = "no constraints, interior point is automatic";
    } else {
      bool strict = true;
      for (size_t g = 0; g < problem.size(); ++g) {
        const double margin =
            1e-9 * (1.0 + std::abs(problem.constraints()[g].u));
        if (!(hit_means[g] < problem.constraints()[g].u - margin)) {
          strict = false;
          break;
        }
      }
      if (strict) {
        diag.slater_found = true;
        diag.slater_description =
            "uniform density on the sampled feasible region meets every "
            "moment bound strictly";
      }
    }
  }

  // Route selection: finite volume first, else a stabilizing constraint.
  const double s_volume = support.volume();
  if (std::isfinite(s_volume) && s_volume > 0.0) {
    diag.entropy_upper = std::log(s_volume);
    if (diag.c_nonzero_volume) diag.route = ExistenceDiagnosis::Route::FiniteVolume;
  } else {
    diag.notes.push_back(
        "support volume is infinite, so the finite-volume route is "
        "unavailable");
    static constexpr double kGrid[] = {0.0625, 0.125, 0.25, 0.5, 1.0,
                                       2.0,    4.0,   8.0,  16.0};
    const std::vector<double> grid(std::begin(kGrid), std::end(kGrid));
    const IntegrationOptions opts{std::max<size_t>(budget / 2, 1000), 1e-7,
                                  seed};
    for (size_t g = 0; g < problem.size() && !diag.stabilizer_index; ++g) {
      StabilityReport report;
      try {
        report = check_stable(problem.constraints()[g].phi, support, grid,
                              opts);
      } catch (const DeclarationError& ex) {
        diag.notes.push_back(std::string("constraint ") + std::to_string(g) +
                             ": " + ex.what());
        continue;
      }
      if (!report.all_stable()) continue;
      diag.stabilizer_index = g;
      // Each grid multiplier already yields a dual value, an upper bound on
      // the attainable entropy; keep the best one.
      double best = kInf;
      for (const auto& entry : report.entries) {
        if (!std::isfinite(entry.log_z)) continue;
        best = std::min(best,
                        entry.lambda * problem.constraints()[g].u + entry.log_z);
      }
      diag.entropy_upper = best;
    }
    if (diag.stabilizer_index) {
      if (diag.c_nonzero_volume)
        diag.route = ExistenceDiagnosis::Route::Stabilizing;
    } else {
      diag.notes.push_back(
          "no constraint keeps the exponent integrable on its own: none is "
          "declared or numerically verified stable over the support");
    }
  }
  return diag;
}

}  // namespace maxent
