#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "itercomm/harness/config.hpp"

namespace itercomm::harness {

/// One time step. `residual` is the audited max-norm of A*U - B on the
/// assembled solution; `iterations` is the largest per-rank count.
struct StepRow {
  int step = 0;
  std::string scheme;
  int p = 0;
  int n = 0;
  double time_s = 0.0;
  double residual = 0.0;
  std::size_t iterations = 0;
  std::uint64_t snapshots = 0;
  bool failed = false;
  std::vector<std::size_t> rank_iterations;

  bool operator==(const StepRow&) const = default;
};

struct RankSummary {
  int rank = 0;
  std::size_t iterations = 0;  // all steps
  std::uint64_t sends_posted = 0;
  std::uint64_t sends_discarded = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t messages_superseded = 0;
  std::uint64_t recv_element_copies = 0;
  std::size_t max_pending_sends_per_link = 0;
  std::size_t min_active_recvs_per_link = 0;
  std::size_t max_active_recvs_per_link = 0;
  std::uint64_t snapshot_rounds = 0;
  std::uint64_t snapshot_rounds_failed = 0;

  bool operator==(const RankSummary&) const = default;
};

struct RunReport {
  std::string scheme;
  std::string backend;
  int p = 0;
  int n = 0;
  std::uint64_t seed = 0;
  double q = 0.0;
  double threshold = 0.0;
  bool converged = false;
  double makespan_s = 0.0;
  std::vector<StepRow> rows;
  std::vector<RankSummary> ranks;

  bool operator==(const RunReport&) const = default;
};

inline constexpr std::string_view kCsvHeader = "step,scheme,p,n,time_s,residual,iterations,snapshots";

std::string to_csv(const RunReport& r);
std::string to_json(const RunReport& r);
RunReport report_from_json(std::string_view text);

/// Writes the report to `path` (stdout when empty). Throws IoError.
void emit_report(const RunReport& r, Format format, const std::string& path);

}  // namespace itercomm::harness
