#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxent/common.hpp"
#include "maxent/dual_solver.hpp"
#include "maxent/problem.hpp"
#include "maxent/quadrature.hpp"

namespace maxent {

// Raised when fewer than one trial in 10^4 is accepted over 10^5 trials;
// the proposal no longer resembles the density it envelopes.
class AcceptanceCollapseError : public std::runtime_error {
 public:
  explicit AcceptanceCollapseError(const std::string& what)
      : std::runtime_error(what) {}
};

namespace detail {

// Product proposal with Student-t3 factors. The t3 tail dominates every
// exp(-polynomial) tail, so a finite envelope constant always exists; a
// Gaussian proposal would make the density ratio unbounded for targets with
// exponential (or slower) decay, and no envelope would be valid.
struct ProductT3Proposal {
  std::vector<double> location;
  std::vector<double> scale;

  static constexpr double kLogC3 = -1.0008048107819652;  // ln(2/(pi*sqrt(3)))

  void draw(Rng& rng, std::span<double> out) const {
    for (size_t i = 0; i < location.size(); ++i)
      out[i] = location[i] + scale[i] * rng.next_t3();
  }

  double log_density(std::span<const double> x) const {
    double lq = 0.0;
    for (size_t i = 0; i < location.size(); ++i) {
      const double u = (x[i] - location[i]) / scale[i];
      lq += kLogC3 - 2.0 * std::log1p(u * u / 3.0) - std::log(scale[i]);
    }
    return lq;
  }
};

inline ProductT3Proposal fit_proposal(const DualSolution& solution,
                                      const MomentProblem& problem,
                                      uint64_t seed) {
  const size_t d = static_cast<size_t>(problem.dimension());
  ProductT3Proposal prop;
  prop.location.assign(d, 0.0);
  prop.scale.assign(d, 1.0);
  try {
    // First and second coordinate moments under pi locate and scale the
    // proposal where the mass is.
    std::vector<MeasurementFunction> weights;
    for (size_t i = 0; i < d; ++i) {
      weights.push_back(MeasurementFunction::power_moment(
          static_cast<int>(d), static_cast<int>(i), 1.0, false));
      weights.push_back(MeasurementFunction::power_moment(
          static_cast<int>(d), static_cast<int>(i), 2.0, false));
    }
    std::vector<ExponentTerm> terms;
    for (size_t g = 0; g < problem.size(); ++g)
      terms.push_back({solution.lambda[g], problem.constraints()[g].phi});
    const IntegrationOptions opts{100000, 1e-7, derive_seed(seed, 1)};
    const BatchResult br =
        batch_integrate(problem.support(), terms, weights, opts);
    for (size_t i = 0; i < d; ++i) {
      const double mean = br.moments[2 * i];
      const double var = br.moments[2 * i + 1] - mean * mean;
      prop.location[i] = mean;
      prop.scale[i] = std::sqrt(std::max(var, 1e-12));
    }
  } catch (const DivergentIntegralError&) {
    // Coordinate moments need not exist even when the density does; fall
    // back to unit scales around the support's projection of the origin.
    for (size_t i = 0; i < d; ++i)
      prop.location[i] = std::clamp(0.0, problem.support().lower()[i],
                                    problem.support().upper()[i]);
  }
  return prop;
}

}  // namespace detail

// n independent draws from pi = exp(-alpha - sum lambda*phi) on S by
// rejection against a moment-matched product-t3 proposal. Deterministic for
// a fixed seed. The envelope constant comes from a deterministic search and
// is enlarged and the batch restarted if a trial ever breaches it.
inline std::vector<Point> sample(const DualSolution& solution,
                                 const MomentProblem& problem, size_t n,
                                 uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: need n >= 1");
  const size_t d = static_cast<size_t>(problem.dimension());
  const auto proposal = detail::fit_proposal(solution, problem, seed);

  auto log_target = [&](std::span<const double> x) {
    if (!problem.support().contains(x)) return -kInf;
    double e = solution.alpha;
    for (size_t g = 0; g < problem.size(); ++g)
      if (solution.lambda[g] != 0.0)
        e += solution.lambda[g] * problem.constraints()[g].phi.value(x);
    return -e;
  };

  double envelope_log = -kInf;
  {
    Rng search_rng(derive_seed(seed, 2));
    std::vector<double> x(d);
    for (size_t k = 0; k < 4096; ++k) {
      proposal.draw(search_rng, x);
      const double r = log_target(x) - proposal.log_density(x);
      if (r > envelope_log) envelope_log = r;
    }
    const double r_center = log_target(proposal.location) -
                            proposal.log_density(proposal.location);
    envelope_log = std::max(envelope_log, r_center);
    if (envelope_log == -kInf)
      throw AcceptanceCollapseError(
          "sample: no proposal draw landed in the support");
    envelope_log += std::log(1.5);
  }

  Rng rng(derive_seed(seed, 3));
  std::vector<Point> out;
  std::vector<double> x(d);
  for (int attempt = 0; attempt < 3; ++attempt) {
    out.clear();
    out.reserve(n);
    size_t trials = 0;
    bool breached = false;
    while (out.size() < n) {
      proposal.draw(rng, x);
      ++trials;
      const double r = log_target(x) - proposal.log_density(x);
      if (r > envelope_log) {
        envelope_log = r + std::log(10.0);
        breached = true;
        break;
      }
      if (r != -kInf) {
        const double u = rng.next_double();
        if (u == 0.0 || std::log(u) <= r - envelope_log)
          out.push_back(Point(x.begin(), x.end()));
      }
      if (trials >= 100000 &&
          static_cast<double>(out.size()) < 1e-4 * static_cast<double>(trials))
        throw AcceptanceCollapseError(
            "sample: acceptance rate fell below 1e-4 over 1e5 trials; the "
            "proposal does not match the density");
    }
    if (!breached) return out;
  }
  throw AcceptanceCollapseError(
      "sample: envelope constant kept being breached after three restarts");
}

}  // namespace maxent
