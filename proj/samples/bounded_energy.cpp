// Solves for the maximum entropy density on the plane under a single
// energy bound E[|x|^2] <= 2, prints the certificate, and draws a few
// samples from the result. The answer is the standard normal, so the
// printed multiplier should sit at 0.5 and the entropy at ln(2*pi*e).

#include <cstdio>

#include "maxent/maxent.hpp"

using namespace maxent;

int main() {
  const auto support = SupportSet::full_space(2);
  const MomentProblem problem(support,
                              {{MeasurementFunction::norm_power(2, 2.0),
                                2.0}});

  const auto diagnosis = diagnose_existence(problem);
  std::printf("route: %s\n", to_string(diagnosis.route));
  std::printf("entropy bracket: [%.6f, %.6f]\n", diagnosis.entropy_lower,
              diagnosis.entropy_upper);

  const DualSolution sol = solve(problem);
  std::printf("lambda = %.10f  (converged after %zu iterations)\n",
              sol.lambda[0], sol.iterations);
  std::printf("alpha  = %.10f\n", sol.alpha);
  std::printf("h      = %.10f\n", sol.entropy);

  const Certificate cert = certify(problem, sol);
  std::printf("certificate: %s\n", to_string(cert.verdict));

  const auto points = sample(sol, problem, 5, 7);
  for (const auto& p : points)
    std::printf("  sample (% .4f, % .4f)  density %.6f\n", p[0], p[1],
                density_at(sol, problem, p));
  return cert.certified() ? 0 : 1;
}
