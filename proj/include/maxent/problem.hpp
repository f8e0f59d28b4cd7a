#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maxent/common.hpp"
#include "maxent/measurement.hpp"
#include "maxent/support.hpp"

namespace maxent {

struct Constraint {
  MeasurementFunction phi;
  double u;
};

// The feasible set: densities on the support whose moments E[phi_g] stay at
// or below u_g. Construction enforces the admission rules; an instance is
// immutable afterwards.
class MomentProblem {
 public:
  MomentProblem(SupportSet support, std::vector<Constraint> constraints)
      : support_(std::move(support)), constraints_(std::move(constraints)) {
    if (constraints_.empty() && !support_.finite_volume())
      throw DeclarationError(
          "moment problem: no constraints requires a finite-volume support");
    for (size_t g = 0; g < constraints_.size(); ++g) {
      const auto& c = constraints_[g];
      const std::string name = "constraint " + std::to_string(g + 1);
      if (c.phi.dimension() != support_.dimension())
        throw DeclarationError(name + ": dimension " +
                               std::to_string(c.phi.dimension()) +
                               " does not match support dimension " +
                               std::to_string(support_.dimension()));
      if (!std::isfinite(c.u))
        throw DeclarationError(name + ": moment bound must be finite");
      const double lb = c.phi.support_lower_bound(support_);
      if (!std::isfinite(lb))
        throw DeclarationError(
            name + " (" + c.phi.label() +
            "): not bounded below on the support; declare a finite lower bound");
      lower_bounds_.push_back(lb);
      if (c.u < lb)
        throw DeclarationError(name + ": bound u = " + std::to_string(c.u) +
                               " lies below the function minimum " +
                               std::to_string(lb) + "; no density can satisfy it");
    }
  }

  int dimension() const { return support_.dimension(); }
  const SupportSet& support() const { return support_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  size_t size() const { return constraints_.size(); }

  // Certified lower bound of phi_g over the support.
  double lower_bound(size_t g) const { return lower_bounds_[g]; }

  double min_lower_bound() const {
    double m = kInf;
    for (double v : lower_bounds_) m = std::min(m, v);
    return m;
  }

 private:
  SupportSet support_;
  std::vector<Constraint> constraints_;
  std::vector<double> lower_bounds_;
};

// Nonnegative mixture of the problem's measurements. Appending the result
// (phi_mu, u_mu) as an extra constraint is redundant: any feasible density
// already satisfies it, so the solution is unchanged, but phi_mu may be
// stable or well-behaved when no single phi_g is.
inline std::pair<MeasurementFunction, double> combine_for_stability(
    const MomentProblem& problem, std::span<const double> weights) {
  if (weights.size() != problem.size())
    throw std::invalid_argument("combine_for_stability: weight count mismatch");
  double total = 0.0;
  for (double mu : weights) {
    if (!std::isfinite(mu) || mu < 0.0)
      throw std::invalid_argument(
          "combine_for_stability: weights must be >= 0 and finite");
    total += mu;
  }
  if (total == 0.0)
    throw std::invalid_argument("combine_for_stability: all weights zero");
  std::vector<double> w(weights.begin(), weights.end());
  std::vector<MeasurementFunction> parts;
  parts.reserve(problem.size());
  double u_mu = 0.0;
  for (size_t g = 0; g < problem.size(); ++g) {
    parts.push_back(problem.constraints()[g].phi);
    u_mu += w[g] * problem.constraints()[g].u;
  }
  return {MeasurementFunction::linear_combination(std::move(w), std::move(parts)),
          u_mu};
}

// Encodes E[phi] = u as the pair E[phi] <= u, E[-phi] <= -u. The negated side
// needs its own finite lower bound, which is -sup phi over the support; the
// caller must supply that supremum since no built-in kind certifies one.
inline std::vector<Constraint> equality_pair(const MeasurementFunction& phi,
                                             double u, double phi_upper_bound) {
  if (!std::isfinite(u))
    throw std::invalid_argument("equality_pair: target moment must be finite");
  if (!std::isfinite(phi_upper_bound))
    throw std::invalid_argument(
        "equality_pair: a finite upper bound of phi on the support is required");
  if (phi_upper_bound < u)
    throw std::invalid_argument(
        "equality_pair: declared upper bound lies below the target moment");
  return {{phi, u}, {MeasurementFunction::negated(phi, -phi_upper_bound), -u}};
}

}  // namespace maxent
