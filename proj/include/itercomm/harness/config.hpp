#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "itercomm/comm/communicator.hpp"
#include "itercomm/convergence/norm.hpp"
#include "itercomm/solver/kernels.hpp"
#include "itercomm/solver/problem.hpp"
#include "itercomm/transport/sim.hpp"

namespace itercomm::harness {

enum class Backend : std::uint8_t { sim, socket };
enum class Format : std::uint8_t { csv, json };

struct RunConfig {
  int p = 4;
  int n = 10;
  comm::Scheme scheme = comm::Scheme::overlap;
  double q = 0.5;
  double threshold = 1e-6;
  std::size_t max_recv_requests = comm::kDefaultMaxRecvRequests;

  // simulated delays and heterogeneity
  double latency = 1.0;
  double jitter = 0.0;
  std::vector<double> slowdown;  // per rank; empty means none
  int slow_rank = -1;
  double slow_factor = 1.0;
  double slowdown_max = 1.0;  // > 1: per-rank factors drawn from [1, max]
  double cost_per_cell = 1.0;
  double tick_seconds = 1e-6;  // reported seconds per simulated tick
  std::uint64_t seed = 1;

  int time_steps = 5;
  double dt = 0.01;
  double nu = 0.5;
  std::array<double, 3> a{0.1, -0.2, 0.3};
  double source = 1.0;
  std::size_t max_iterations = 100000;

  Backend backend = Backend::sim;
  solver::KernelKind kernel = solver::KernelKind::openmp;
  int deadlock_timeout_ms = 10000;
  std::string output;  // empty: stdout
  Format format = Format::csv;

  /// Throws ConfigError naming the offending key.
  void validate() const;

  solver::ProblemSpec problem() const;
  convergence::NormSpec norm() const { return {q, threshold}; }
  /// Resolves slowdown, slow_rank/slow_factor and slowdown_max into one
  /// per-rank table (deterministic in seed).
  transport::DelayModel delays() const;
};

/// Every key accepted by set_key, the config file and the CLI.
const std::vector<std::string>& config_keys();

/// Assigns one key. Unknown keys and malformed values throw ConfigError
/// naming the key. Lists use commas: a=0.1,-0.2,0.3.
void set_key(RunConfig& cfg, std::string_view key, std::string_view value);

/// key=value lines; '#' starts a comment; blank lines ignored. The result
/// is validated.
RunConfig parse_config_text(std::string_view text, RunConfig base = {});
RunConfig parse_config_file(const std::string& path, RunConfig base = {});

std::string_view backend_name(Backend b) noexcept;
std::string_view format_name(Format f) noexcept;

}  // namespace itercomm::harness
