// Walks one problem through each existence route: a box (finite volume),
// a half line with a mean bound (stabilizing constraint), and a bound that
// admits a single point (no route, with notes explaining why).

#include <cstdio>

#include "maxent/maxent.hpp"

using namespace maxent;

namespace {

void show(const char* title, const MomentProblem& problem) {
  std::printf("%s\n", title);
  const auto d = diagnose_existence(problem);
  std::printf("  route: %s\n", to_string(d.route));
  if (d.route != ExistenceDiagnosis::Route::None)
    std::printf("  entropy bracket: [%g, %g]\n", d.entropy_lower,
                d.entropy_upper);
  if (d.slater_found)
    std::printf("  interior point: %s\n", d.slater_description.c_str());
  for (const auto& note : d.notes) std::printf("  note: %s\n", note.c_str());
}

}  // namespace

int main() {
  show("mean bound on a box",
       MomentProblem(SupportSet::box({0.0}, {2.0}),
                     {{MeasurementFunction::power_moment(1, 0, 1.0, false), 0.8}}));

  show("mean bound on a half line",
       MomentProblem(SupportSet::box({0.0}, {kInf}),
                     {{MeasurementFunction::power_moment(1, 0, 1.0, false), 1.0}}));

  // u = 0 forces all mass onto the single point x = 0: the feasible set has
  // no density in its interior, so neither route applies.
  show("knife edge: second moment bounded by zero",
       MomentProblem(SupportSet::box({-1.0}, {1.0}),
                     {{MeasurementFunction::power_moment(1, 0, 2.0, false), 0.0}}));
  return 0;
}
