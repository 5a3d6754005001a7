#pragma once

#include <array>

namespace itercomm::solver {

/// Unit-cube convection-diffusion u_t - nu*lap(u) + a.grad(u) = source with
/// homogeneous Dirichlet boundaries and zero initial state.
struct ProblemSpec {
  double nu = 0.5;
  std::array<double, 3> a{0.1, -0.2, 0.3};
  double dt = 0.01;
  int n = 10;  // interior points per axis
  int time_steps = 5;
  double source = 1.0;

  double h() const noexcept { return 1.0 / (n + 1); }
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Neighbor slots, shared by stencils, faces and halos.
enum Face : int { x_lo = 0, x_hi = 1, y_lo = 2, y_hi = 3, z_lo = 4, z_hi = 5 };
inline constexpr int face_id(int axis, int dir) noexcept { return 2 * axis + (dir > 0 ? 1 : 0); }

/// Seven-point backward-Euler stencil: diag*u + sum_f off[f]*u_f = rhs.
struct Stencil {
  double diag = 0.0;
  std::array<double, 6> off{};

  double off_abs_sum() const noexcept;
};

struct DiscreteSystem {
  ProblemSpec spec;
  double h = 0.0;
  Stencil stencil;

  /// Right-hand side value at a node whose previous-step value is u_prev.
  double rhs(double u_prev) const noexcept { return u_prev / spec.dt + spec.source; }
};

/// Central differences for convection. Throws ConfigError when the
/// off-diagonals would change sign (|a_i| h / 2 >= nu), which would break
/// diagonal dominance.
DiscreteSystem discretize(const ProblemSpec& spec);

}  // namespace itercomm::solver
