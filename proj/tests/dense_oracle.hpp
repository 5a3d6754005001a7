#pragma once
// Dense reference assembly of the backward-Euler convection-diffusion
// matrix, written from the stencil formulas directly (no library code).

#include <cmath>
#include <stdexcept>
#include <vector>

#include "itercomm/solver/problem.hpp"

namespace dense {

struct Matrix {
  std::size_t m = 0;
  std::vector<double> a;  // row-major
  double at(std::size_t i, std::size_t j) const { return a[i * m + j]; }
};

inline Matrix assemble(const itercomm::solver::ProblemSpec& s) {
  if (s.n > 12) throw std::invalid_argument("dense oracle limited to n <= 12");
  const int n = s.n;
  const double h = 1.0 / (n + 1);
  Matrix A;
  A.m = static_cast<std::size_t>(n) * n * n;
  A.a.assign(A.m * A.m, 0.0);
  auto id = [n](int i, int j, int k) { return static_cast<std::size_t>(i + n * (j + n * k)); };
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t row = id(i, j, k);
        A.a[row * A.m + row] = 1.0 / s.dt + 6.0 * s.nu / (h * h);
        const int p[3] = {i, j, k};
        for (int axis = 0; axis < 3; ++axis)
          for (int dir : {-1, 1}) {
            int q[3] = {p[0], p[1], p[2]};
            q[axis] += dir;
            if (q[axis] < 0 || q[axis] >= n) continue;
            A.a[row * A.m + id(q[0], q[1], q[2])] = -s.nu / (h * h) + dir * s.a[axis] / (2.0 * h);
          }
      }
  return A;
}

inline std::vector<double> matvec(const Matrix& A, const std::vector<double>& x) {
  std::vector<double> y(A.m, 0.0);
  for (std::size_t i = 0; i < A.m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < A.m; ++j) s += A.a[i * A.m + j] * x[j];
    y[i] = s;
  }
  return y;
}

// ||A u - b||_inf
inline double residual_inf(const Matrix& A, const std::vector<double>& u, const std::vector<double>& b) {
  auto y = matvec(A, u);
  double r = 0.0;
  for (std::size_t i = 0; i < A.m; ++i) r = std::max(r, std::fabs(y[i] - b[i]));
  return r;
}

inline std::vector<double> jacobi_step(const Matrix& A, const std::vector<double>& b, const std::vector<double>& x) {
  std::vector<double> y(A.m);
  for (std::size_t i = 0; i < A.m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < A.m; ++j)
      if (j != i) s += A.a[i * A.m + j] * x[j];
    y[i] = (b[i] - s) / A.at(i, i);
  }
  return y;
}

inline std::vector<double> rhs(const itercomm::solver::ProblemSpec& s, const std::vector<double>& u_prev) {
  std::vector<double> b(u_prev.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = u_prev[i] / s.dt + s.source;
  return b;
}

}  // namespace dense
