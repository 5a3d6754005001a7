#pragma once

#include <cstddef>
#include <vector>

#include "itercomm/convergence/norm.hpp"
#include "itercomm/solver/problem.hpp"

namespace itercomm::solver {

/// Single-process synchronous Jacobi on the whole grid, for testing.
/// Global vectors have n^3 entries, x fastest.
class SequentialOracle {
 public:
  static constexpr int kMaxN = 20;

  /// Throws ConfigError when n exceeds kMaxN.
  explicit SequentialOracle(DiscreteSystem sys);

  std::size_t size() const noexcept { return m_; }
  const DiscreteSystem& system() const noexcept { return sys_; }

  std::vector<double> rhs(const std::vector<double>& u_prev) const;
  /// One Jacobi step. `r` receives rhs - A*u.
  void step(const std::vector<double>& u, const std::vector<double>& b, std::vector<double>& u_new,
            std::vector<double>& r) const;
  double residual_inf(const std::vector<double>& u, const std::vector<double>& b) const;

  struct Solve {
    std::vector<double> u;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<std::vector<double>> trajectory;  // iterate after each step
  };
  /// Iterates until the norm of rhs - A*u_old drops below the threshold,
  /// the same stopping rule as the distributed solver.
  Solve solve(const std::vector<double>& b, std::vector<double> u0, const convergence::NormSpec& norm,
              std::size_t max_iterations, bool keep_trajectory = false) const;

  struct Run {
    std::vector<Solve> steps;
  };
  /// All time steps from a zero initial state with warm starts.
  Run run(const convergence::NormSpec& norm, std::size_t max_iterations, bool keep_trajectory = false) const;

 private:
  DiscreteSystem sys_;
  int n_ = 0;
  std::size_t m_ = 0;
};

}  // namespace itercomm::solver
