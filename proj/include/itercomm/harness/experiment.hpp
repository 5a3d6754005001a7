#pragma once

#include <vector>

#include "itercomm/convergence/snapshot.hpp"
#include "itercomm/harness/config.hpp"
#include "itercomm/harness/report.hpp"
#include "itercomm/solver/time_loop.hpp"
#include "itercomm/topology/partition.hpp"

namespace itercomm::harness {

struct ExperimentOutput {
  RunReport report;
  Partition3D partition;
  std::vector<solver::RankRun> ranks;
  /// Assembled global solution per reported step (x fastest).
  std::vector<std::vector<double>> solutions;
};

/// Spawns p logical processes on the configured backend, runs every time
/// step and audits each assembled solution. `observer` is only attached on
/// the simulated backend.
ExperimentOutput run_experiment_detailed(const RunConfig& cfg, convergence::SnapshotObserver* observer = nullptr);

RunReport run_experiment(const RunConfig& cfg);

}  // namespace itercomm::harness
