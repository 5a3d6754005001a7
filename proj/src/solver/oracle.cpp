#include "itercomm/solver/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "itercomm/errors.hpp"

namespace itercomm::solver {

SequentialOracle::SequentialOracle(DiscreteSystem sys) : sys_(std::move(sys)), n_(sys_.spec.n) {
  if (n_ > kMaxN)
    throw ConfigError("sequential oracle refuses n = " + std::to_string(n_) + " (limit " + std::to_string(kMaxN) + ")");
  m_ = static_cast<std::size_t>(n_) * n_ * n_;
}

std::vector<double> SequentialOracle::rhs(const std::vector<double>& u_prev) const {
  std::vector<double> b(m_);
  for (std::size_t i = 0; i < m_; ++i) b[i] = sys_.rhs(u_prev[i]);
  return b;
}

void SequentialOracle::step(const std::vector<double>& u, const std::vector<double>& b, std::vector<double>& u_new,
                            std::vector<double>& r) const {
  // zero-padded copy: the boundary ring holds the Dirichlet values
  const int w = n_ + 2;
  std::vector<double> pad(static_cast<std::size_t>(w) * w * w, 0.0);
  auto P = [&](int i, int j, int k) -> double& { return pad[i + static_cast<std::size_t>(w) * (j + static_cast<std::size_t>(w) * k)]; };
  for (int k = 0; k < n_; ++k)
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) P(i + 1, j + 1, k + 1) = u[i + static_cast<std::size_t>(n_) * (j + static_cast<std::size_t>(n_) * k)];
  u_new.assign(m_, 0.0);
  r.assign(m_, 0.0);
  const auto& c = sys_.stencil.off;
  const double d = sys_.stencil.diag;
  std::size_t idx = 0;
  for (int k = 1; k <= n_; ++k)
    for (int j = 1; j <= n_; ++j)
      for (int i = 1; i <= n_; ++i, ++idx) {
        double s = c[x_lo] * P(i - 1, j, k);
        s += c[x_hi] * P(i + 1, j, k);
        s += c[y_lo] * P(i, j - 1, k);
        s += c[y_hi] * P(i, j + 1, k);
        s += c[z_lo] * P(i, j, k - 1);
        s += c[z_hi] * P(i, j, k + 1);
        u_new[idx] = (b[idx] - s) / d;
        r[idx] = b[idx] - s - d * u[idx];
      }
}

double SequentialOracle::residual_inf(const std::vector<double>& u, const std::vector<double>& b) const {
  std::vector<double> un, r;
  step(u, b, un, r);
  double m = 0.0;
  for (double x : r) m = std::max(m, std::fabs(x));
  return m;
}

SequentialOracle::Solve SequentialOracle::solve(const std::vector<double>& b, std::vector<double> u0,
                                                const convergence::NormSpec& norm, std::size_t max_iterations,
                                                bool keep_trajectory) const {
  Solve s;
  s.u = std::move(u0);
  std::vector<double> un, r;
  while (s.iterations < max_iterations) {
    step(s.u, b, un, r);
    s.u.swap(un);
    ++s.iterations;
    if (keep_trajectory) s.trajectory.push_back(s.u);
    double acc = 0.0;
    for (double x : r) acc = norm.is_max() ? std::max(acc, std::fabs(x)) : acc + std::pow(std::fabs(x), norm.q);
    const double value = norm.is_max() ? acc : std::pow(acc, 1.0 / norm.q);
    if (value < norm.threshold) {
      s.converged = true;
      break;
    }
  }
  return s;
}

SequentialOracle::Run SequentialOracle::run(const convergence::NormSpec& norm, std::size_t max_iterations,
                                            bool keep_trajectory) const {
  Run out;
  std::vector<double> u(m_, 0.0);
  for (int t = 0; t < sys_.spec.time_steps; ++t) {
    auto s = solve(rhs(u), u, norm, max_iterations, keep_trajectory);
    u = s.u;
    const bool ok = s.converged;
    out.steps.push_back(std::move(s));
    if (!ok) break;
  }
  return out;
}

}  // namespace itercomm::solver
