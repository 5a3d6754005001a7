#include "itercomm/solver/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "itercomm/errors.hpp"

namespace itercomm::solver {

std::string_view kernel_name(KernelKind k) noexcept { return k == KernelKind::serial ? "serial" : "openmp"; }

KernelKind parse_kernel(std::string_view name) {
  if (name == "serial") return KernelKind::serial;
  if (name == "openmp" || name == "omp") return KernelKind::openmp;
  throw ConfigError("unknown kernel '" + std::string(name) + "' (expected serial or openmp)");
}

namespace {

// Shared per-cell update so both variants produce identical bits.
inline void sweep_cell(const SweepArgs& a, int i, int j, int k) {
  const int ex = a.ext[0], ey = a.ext[1], ez = a.ext[2];
  const std::size_t sx = 1, sy = static_cast<std::size_t>(ex), sz = sy * ey;
  const std::size_t idx = i * sx + j * sy + k * sz;
  const double* u = a.u_old;
  const auto& c = a.stencil.off;
  auto halo = [&](int f, std::size_t at) { return a.halo[f] ? a.halo[f][at] : 0.0; };

  const std::size_t fx = static_cast<std::size_t>(k) * ey + j;
  const std::size_t fy = static_cast<std::size_t>(k) * ex + i;
  const std::size_t fz = static_cast<std::size_t>(j) * ex + i;
  double s = c[x_lo] * (i > 0 ? u[idx - sx] : halo(x_lo, fx));
  s += c[x_hi] * (i + 1 < ex ? u[idx + sx] : halo(x_hi, fx));
  s += c[y_lo] * (j > 0 ? u[idx - sy] : halo(y_lo, fy));
  s += c[y_hi] * (j + 1 < ey ? u[idx + sy] : halo(y_hi, fy));
  s += c[z_lo] * (k > 0 ? u[idx - sz] : halo(z_lo, fz));
  s += c[z_hi] * (k + 1 < ez ? u[idx + sz] : halo(z_hi, fz));

  const double b = a.rhs[idx];
  const double un = (b - s) / a.stencil.diag;
  a.u_new[idx] = un;
  a.residual[idx] = a.form == ResidualForm::algebraic ? b - s - a.stencil.diag * u[idx] : un - u[idx];
}

inline double residual_cell(const DiscreteSystem& sys, const double* u, const double* rhs, int n, int i, int j,
                            int k) {
  const std::size_t sy = n, sz = static_cast<std::size_t>(n) * n;
  const std::size_t idx = i + j * sy + k * sz;
  const auto& c = sys.stencil.off;
  double s = sys.stencil.diag * u[idx];
  if (i > 0) s += c[x_lo] * u[idx - 1];
  if (i + 1 < n) s += c[x_hi] * u[idx + 1];
  if (j > 0) s += c[y_lo] * u[idx - sy];
  if (j + 1 < n) s += c[y_hi] * u[idx + sy];
  if (k > 0) s += c[z_lo] * u[idx - sz];
  if (k + 1 < n) s += c[z_hi] * u[idx + sz];
  return std::fabs(rhs[idx] - s);
}

}  // namespace

void jacobi_sweep_serial(const SweepArgs& a) {
  for (int k = 0; k < a.ext[2]; ++k)
    for (int j = 0; j < a.ext[1]; ++j)
      for (int i = 0; i < a.ext[0]; ++i) sweep_cell(a, i, j, k);
}

void jacobi_sweep_openmp(const SweepArgs& a) {
  const std::size_t cells = static_cast<std::size_t>(a.ext[0]) * a.ext[1] * a.ext[2];
  const int ez = a.ext[2], ey = a.ext[1], ex = a.ext[0];
#pragma omp parallel for collapse(2) schedule(static) if (cells >= kOpenmpMinCells)
  for (int k = 0; k < ez; ++k)
    for (int j = 0; j < ey; ++j)
      for (int i = 0; i < ex; ++i) sweep_cell(a, i, j, k);
}

void jacobi_sweep(KernelKind kind, const SweepArgs& args) {
  if (kind == KernelKind::serial)
    jacobi_sweep_serial(args);
  else
    jacobi_sweep_openmp(args);
}

double global_residual_inf_serial(const DiscreteSystem& sys, const double* u, const double* rhs) {
  const int n = sys.spec.n;
  double m = 0.0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double r = residual_cell(sys, u, rhs, n, i, j, k);
        if (std::isnan(r)) return r;
        m = std::max(m, r);
      }
  return m;
}

double global_residual_inf_openmp(const DiscreteSystem& sys, const double* u, const double* rhs) {
  const int n = sys.spec.n;
  double m = 0.0;
  bool nan = false;
  const std::size_t cells = static_cast<std::size_t>(n) * n * n;
#pragma omp parallel for collapse(2) reduction(max : m) reduction(|| : nan) if (cells >= kOpenmpMinCells)
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const double r = residual_cell(sys, u, rhs, n, i, j, k);
        if (std::isnan(r))
          nan = true;
        else
          m = std::max(m, r);
      }
  return nan ? NAN : m;
}

}  // namespace itercomm::solver
