#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "itercomm/comm/communicator.hpp"
#include "itercomm/convergence/norm.hpp"
#include "itercomm/convergence/snapshot.hpp"
#include "itercomm/solver/kernels.hpp"
#include "itercomm/solver/problem.hpp"
#include "itercomm/topology/partition.hpp"
#include "itercomm/transport/endpoint.hpp"

namespace itercomm::solver {

struct SolverOptions {
  comm::Scheme scheme = comm::Scheme::overlap;
  std::size_t max_recv_requests = comm::kDefaultMaxRecvRequests;
  convergence::NormSpec norm{};
  KernelKind kernel = KernelKind::openmp;
  ResidualForm residual_form = ResidualForm::algebraic;
  std::size_t max_iterations = 100000;
  /// Simulated work units charged per owned cell and iteration.
  double cost_per_cell = 1.0;
  convergence::SnapshotObserver* observer = nullptr;
  /// Called after every local update with (rank, step, iteration, block).
  std::function<void(Rank, int, std::size_t, std::span<const double>)> on_iterate;
};

struct StepRecord {
  int step = 0;
  std::size_t iterations = 0;
  std::uint64_t snapshots = 0;
  bool converged = false;
  double residual_norm = 0.0;  // value the stopping test saw
  double loop_time = 0.0;      // endpoint clock: simulated ticks or seconds
  double wall_seconds = 0.0;
  std::vector<double> solution;
};

struct RankRun {
  Rank rank = 0;
  Box box;
  std::vector<StepRecord> steps;
  comm::CommStats comm;
  convergence::DetectorStats detector;
};

/// Runs every time step on this rank: right-hand side from the previous
/// solution, one iteration loop with the selected scheme, warm start.
/// Collective over all ranks of the partition. Stops after the first step
/// that hits the iteration cap.
RankRun time_step_loop(transport::Endpoint& ep, const Partition3D& part, const DiscreteSystem& sys,
                       const SolverOptions& opt);

}  // namespace itercomm::solver
