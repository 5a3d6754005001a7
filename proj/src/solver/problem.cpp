#include "itercomm/solver/problem.hpp"

#include <cmath>
#include <string>

#include "itercomm/errors.hpp"

namespace itercomm::solver {

void ProblemSpec::validate() const {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError("nu must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (n < 2) throw ConfigError("n must be at least 2");
  if (time_steps < 0) throw ConfigError("time_steps must be non-negative");
  for (double ai : a)
    if (!std::isfinite(ai)) throw ConfigError("convection velocity a must be finite");
  if (!std::isfinite(source)) throw ConfigError("source must be finite");
}

double Stencil::off_abs_sum() const noexcept {
  double s = 0.0;
  for (double c : off) s += std::fabs(c);
  return s;
}

DiscreteSystem discretize(const ProblemSpec& spec) {
  spec.validate();
  DiscreteSystem sys;
  sys.spec = spec;
  sys.h = spec.h();
  const double h = sys.h;
  const double diff = spec.nu / (h * h);
  for (int axis = 0; axis < 3; ++axis) {
    if (std::fabs(spec.a[axis]) * h / 2.0 >= spec.nu) {
      throw ConfigError("convection dominates diffusion on axis " + std::to_string(axis) +
                        " (|a| h / 2 >= nu); increase n to refine the grid");
    }
    const double conv = spec.a[axis] / (2.0 * h);
    sys.stencil.off[face_id(axis, -1)] = -diff - conv;
    sys.stencil.off[face_id(axis, +1)] = -diff + conv;
  }
  sys.stencil.diag = 1.0 / spec.dt + 6.0 * diff;
  return sys;
}

}  // namespace itercomm::solver
