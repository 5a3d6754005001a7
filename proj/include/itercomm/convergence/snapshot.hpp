#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "itercomm/comm/buffers.hpp"
#include "itercomm/convergence/norm.hpp"
#include "itercomm/topology/spanning_tree.hpp"
#include "itercomm/transport/endpoint.hpp"

namespace itercomm::convergence {

/// Global-observer hook. Called synchronously from inside the detector of
/// the acting rank; implementations shared across ranks must be thread-safe
/// unless ranks are serialized (the simulator serializes them).
class SnapshotObserver {
 public:
  virtual ~SnapshotObserver() = default;
  /// Rank sent its local-convergence notification (or, at the root,
  /// triggered the snapshot) in `round`.
  virtual void on_notify(Rank, std::uint32_t /*round*/) {}
  virtual void on_freeze(Rank, std::uint32_t /*round*/, Rank /*to*/, std::span<const double> /*payload*/) {}
  virtual void on_record(Rank, std::uint32_t /*round*/, Rank /*from*/, std::span<const double> /*payload*/) {}
  virtual void on_outcome(Rank, std::uint32_t /*round*/, double /*norm*/, bool /*detected*/) {}
};

struct DetectorStats {
  std::uint64_t notifications = 0;
  std::uint64_t snapshot_messages_sent = 0;
  std::uint64_t rounds_evaluated = 0;
  std::uint64_t rounds_failed = 0;
  std::uint64_t stale_messages = 0;   // from an earlier round, dropped
  std::uint64_t future_messages = 0;  // from a later round, dropped (never expected)
};

/// Termination detection for asynchronous iterations: leaves-to-root
/// notification of local convergence, a snapshot isolating a consistent
/// global vector, one extra local update on it, and a tree reduction of the
/// resulting residual. All progress happens inside begin_iteration() and
/// end_iteration(); nothing blocks.
class AsyncDetector {
 public:
  enum class Phase : std::uint8_t { iterating, coordinated, snapshotting, evaluating, reducing, terminated };

  AsyncDetector(transport::Endpoint& ep, LocalTree tree, NormSpec spec, comm::LinkBufferSet& bufs,
                const bool& local_flag);
  AsyncDetector(const AsyncDetector&) = delete;
  AsyncDetector& operator=(const AsyncDetector&) = delete;

  void set_observer(SnapshotObserver* obs) noexcept { observer_ = obs; }

  /// Top of an iteration. Returns true when the snapshot is complete and
  /// the solution and receive buffers now reference the frozen state, so
  /// the coming computation evaluates it (the caller must skip its drain).
  bool begin_iteration();
  /// After the computation wrote the residual block.
  void end_iteration();
  /// Next solve: clears the terminated state, keeps the round counter.
  void reset_for_solve();

  bool terminated() const noexcept { return done_; }
  /// Norm of the last evaluated snapshot, +inf before any.
  double published_norm() const noexcept { return published_; }
  std::uint32_t round() const noexcept { return round_; }
  Phase phase() const noexcept;
  bool notified() const noexcept { return notified_; }
  bool frozen() const noexcept { return frozen_; }
  bool snapshot_complete() const noexcept;
  std::size_t children_notified() const noexcept;
  const DetectorStats& stats() const noexcept { return stats_; }

 private:
  void progress();
  void reap_sends();
  void poll_children_notifications();
  void poll_snapshot_messages();
  void poll_children_partials();
  void poll_parent_outcome();
  void coordinate();
  void freeze_and_forward();
  void try_reduce();
  void apply_outcome(double norm, bool detected);
  void send_to(Rank peer, transport::Tag tag, PayloadBuffer body);
  bool classify(std::uint32_t msg_round);

  transport::Endpoint& ep_;
  LocalTree tree_;
  NormSpec spec_;
  comm::LinkBufferSet& bufs_;
  const bool& flag_;
  SnapshotObserver* observer_ = nullptr;

  std::uint32_t round_ = 0;
  bool done_ = false;
  double published_ = std::numeric_limits<double>::infinity();

  // coordination
  std::vector<bool> child_notified_;
  bool notified_ = false;

  // snapshot
  bool frozen_ = false;
  PayloadBuffer ss_sol_;
  std::vector<PayloadBuffer> ss_send_;
  std::vector<PayloadBuffer> ss_recv_;
  std::vector<bool> ss_recorded_;
  bool ss_seen_ = false;

  // evaluation and reduction
  bool eval_pending_ = false;
  bool evaluated_ = false;
  bool sent_up_ = false;
  PayloadBuffer candidate_;
  NormAccumulator partial_;
  std::vector<bool> child_partial_;

  // persistent receives
  std::vector<transport::Request> conv_reqs_;
  std::vector<transport::Request> up_reqs_;
  std::vector<transport::Request> snap_reqs_;
  transport::Request down_req_;
  transport::Request term_req_;
  std::vector<transport::Request> sends_;

  DetectorStats stats_;
};

}  // namespace itercomm::convergence
