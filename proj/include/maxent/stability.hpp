#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "maxent/common.hpp"
#include "maxent/measurement.hpp"
#include "maxent/quadrature.hpp"
#include "maxent/support.hpp"

namespace maxent {

enum class StabilityVerdict { Stable, Undetermined };

struct StabilityEntry {
  double lambda = 0.0;
  StabilityVerdict verdict = StabilityVerdict::Undetermined;
  bool structural = false;  // verdict already follows from declarations
  // ln int_S exp(-lambda*phi); +inf when the integral diverged.
  double log_z = -kInf;
  double log_z_err = 0.0;
};

struct StabilityReport {
  std::vector<StabilityEntry> entries;

  bool all_stable() const {
    for (const auto& e : entries)
      if (e.verdict != StabilityVerdict::Stable) return false;
    return !entries.empty();
  }
};

// Per-lambda verdict on whether exp(-lambda*phi) is integrable over the
// support. Convex+coercive or well-behaved declarations settle it without
// numerics; otherwise the verdict comes from the truncation schedule
// converging, and anything short of that stays "undetermined", never a false
// "stable". A declared-structural function whose integral still diverges is a
// mis-declaration and throws.
inline StabilityReport check_stable(const MeasurementFunction& phi,
                                    const SupportSet& support,
                                    std::span<const double> lambdas,
                                    const IntegrationOptions& opts) {
  if (lambdas.empty())
    throw std::invalid_argument("check_stable: need at least one multiplier");
  for (double l : lambdas)
    if (!(l > 0.0) || !std::isfinite(l))
      throw std::invalid_argument("check_stable: multipliers must be positive");
  const auto& a = phi.attributes();
  const bool structural = (a.is_convex && a.is_coercive) || a.is_well_behaved;

  StabilityReport report;
  for (double l : lambdas) {
    StabilityEntry e;
    e.lambda = l;
    e.structural = structural;
    const ExponentTerm term{l, phi};
    try {
      const BatchResult br =
          batch_integrate(support, std::span(&term, 1), {}, opts);
      e.log_z = br.log_z;
      e.log_z_err = br.log_z_err;
      e.verdict = (structural || br.tolerance_met) ? StabilityVerdict::Stable
                                                   : StabilityVerdict::Undetermined;
    } catch (const DivergentIntegralError& ex) {
      if (structural)
        throw DeclarationError(phi.label() +
                               ": declared stable by structure, but the "
                               "integral diverged numerically: " +
                               ex.what());
      e.log_z = kInf;
      e.verdict = StabilityVerdict::Undetermined;
    }
    report.entries.push_back(e);
  }
  return report;
}

struct SamplingPlan {
  size_t ball_samples = 2048;
  size_t rays = 64;
  size_t steps_per_ray = 16;
  double ray_reach = 64.0;  // rays sample radii up to about reach*(1+M)
  uint64_t seed = 0;
};

struct WellBehavedViolation {
  Point x;
  double value = 0.0;
  std::string what;
};

struct WellBehavedReport {
  double radius = 0.0;
  std::vector<WellBehavedViolation> violations;
  bool consistent() const { return violations.empty(); }
};

// Spot-validates a well-behaved (or convex+coercive) declaration: values on
// the ball of radius M must be finite, and growth along rays beyond M must
// show the at-least-linear trend a convex coercive minorant forces. Sampling
// can only find counterexamples, never prove the declaration.
inline WellBehavedReport check_well_behaved(const MeasurementFunction& phi,
                                            const SamplingPlan& plan = {}) {
  const auto& a = phi.attributes();
  if (!a.is_well_behaved && !(a.is_convex && a.is_coercive))
    throw std::invalid_argument(
        "check_well_behaved: " + phi.label() +
        " declares neither well-behaved nor convex and coercive");
  const double m_radius = a.is_well_behaved ? a.well_behaved_radius : 0.0;
  const size_t d = static_cast<size_t>(phi.dimension());

  WellBehavedReport report;
  report.radius = m_radius;
  Rng rng(derive_seed(plan.seed, 0x3b5du));

  auto unit_direction = [&] {
    std::vector<double> dir(d);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (auto& v : dir) {
        v = rng.next_normal();
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& v : dir) v /= norm;
    return dir;
  };

  std::vector<double> x(d);
  if (m_radius > 0.0) {
    for (size_t i = 0; i < plan.ball_samples; ++i) {
      const auto dir = unit_direction();
      const double r =
          m_radius * std::pow(rng.next_double(), 1.0 / static_cast<double>(d));
      for (size_t j = 0; j < d; ++j) x[j] = r * dir[j];
      const double v = phi.value(x);
      if (!std::isfinite(v))
        report.violations.push_back(
            {x, v, "non-finite value inside the declared radius"});
    }
  }

  const double t_lo = m_radius + 1.0;
  const double t_hi = t_lo * plan.ray_reach;
  for (size_t r = 0; r < plan.rays; ++r) {
    const auto dir = unit_direction();
    double v_first = 0.0, v_last = 0.0;
    bool finite = true;
    for (size_t s = 0; s < plan.steps_per_ray; ++s) {
      const double frac = static_cast<double>(s) /
                          static_cast<double>(plan.steps_per_ray - 1);
      const double t = t_lo * std::pow(t_hi / t_lo, frac);
      for (size_t j = 0; j < d; ++j) x[j] = t * dir[j];
      const double v = phi.value(x);
      if (!std::isfinite(v)) {
        report.violations.push_back({x, v, "non-finite value along a ray"});
        finite = false;
        break;
      }
      if (s == 0) v_first = v;
      v_last = v;
    }
    if (!finite) continue;
    // A convex coercive minorant forces at least linear growth along every
    // ray; require a tiny positive average slope.
    if (v_last < v_first + 1e-6 * (t_hi - t_lo)) {
      for (size_t j = 0; j < d; ++j) x[j] = t_hi * dir[j];
      report.violations.push_back(
          {x, v_last, "no growth along a ray beyond the declared radius"});
    }
  }

  if (a.is_convex) {
    const double box = std::max(2.0 * m_radius, 4.0);
    std::vector<double> y(d), mid(d);
    for (size_t i = 0; i < 256; ++i) {
      for (size_t j = 0; j < d; ++j) {
        x[j] = box * (2.0 * rng.next_double() - 1.0);
        y[j] = box * (2.0 * rng.next_double() - 1.0);
        mid[j] = 0.5 * (x[j] + y[j]);
      }
      const double vx = phi.value(x), vy = phi.value(y), vm = phi.value(mid);
      const double bound = 0.5 * (vx + vy);
      if (vm > bound + 1e-9 * (1.0 + std::abs(bound)))
        report.violations.push_back(
            {mid, vm, "midpoint value above the chord; not convex"});
    }
  }
  return report;
}

}  // namespace maxent
