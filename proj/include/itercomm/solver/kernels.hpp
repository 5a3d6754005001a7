#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

#include "itercomm/solver/problem.hpp"

namespace itercomm::solver {

enum class KernelKind : std::uint8_t { serial, openmp };
std::string_view kernel_name(KernelKind k) noexcept;
KernelKind parse_kernel(std::string_view name);

/// What the residual block holds after a sweep.
enum class ResidualForm : std::uint8_t {
  algebraic,  // rhs - A*u_old, equal to diag*(u_new - u_old)
  update,     // u_new - u_old
};

/// One local Jacobi sweep over an ex*ey*ez block stored x fastest.
/// halo[f] holds the neighbor face values on face f (packed by
/// pack_face order) or nullptr on a Dirichlet boundary.
struct SweepArgs {
  std::array<int, 3> ext{};
  const double* u_old = nullptr;
  const double* rhs = nullptr;
  std::array<const double*, 6> halo{};
  Stencil stencil;
  ResidualForm form = ResidualForm::algebraic;
  double* u_new = nullptr;
  double* residual = nullptr;
};

void jacobi_sweep_serial(const SweepArgs& args);
void jacobi_sweep_openmp(const SweepArgs& args);
void jacobi_sweep(KernelKind kind, const SweepArgs& args);

/// Max-norm of rhs - A*u on the whole grid (n^3 nodes, x fastest, zero
/// Dirichlet boundary). Matrix-free, any n.
double global_residual_inf_serial(const DiscreteSystem& sys, const double* u, const double* rhs);
double global_residual_inf_openmp(const DiscreteSystem& sys, const double* u, const double* rhs);

/// Blocks below this many cells run the OpenMP sweep single-threaded.
inline constexpr std::size_t kOpenmpMinCells = 32768;

}  // namespace itercomm::solver
