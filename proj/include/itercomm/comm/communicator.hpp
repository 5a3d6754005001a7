#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "itercomm/comm/buffers.hpp"
#include "itercomm/convergence/norm.hpp"
#include "itercomm/convergence/snapshot.hpp"
#include "itercomm/topology/spanning_tree.hpp"
#include "itercomm/transport/endpoint.hpp"

namespace itercomm::comm {

enum class Scheme : std::uint8_t { trivial, overlap, async };

std::string_view scheme_name(Scheme s) noexcept;
/// "trivial", "overlap" or "async"; anything else throws ConfigError.
Scheme parse_scheme(std::string_view name);

inline constexpr std::size_t kDefaultMaxRecvRequests = 2;

/// Counters sampled at every recv/send call boundary.
struct CommStats {
  std::uint64_t sends_posted = 0;
  std::uint64_t sends_discarded = 0;
  std::uint64_t messages_delivered = 0;
  std::uint64_t messages_superseded = 0;  // drained, but a newer one arrived in the same call
  std::uint64_t stale_dropped = 0;        // data from an earlier solve
  std::uint64_t recv_element_copies = 0;  // payload element copies inside delivery
  std::size_t max_pending_sends_per_link = 0;
  std::size_t min_active_recvs_per_link = std::numeric_limits<std::size_t>::max();
  std::size_t max_active_recvs_per_link = 0;
};

/// Per-process front end: exchanges link buffers once per iteration in
/// synchronous or asynchronous mode and maintains the residual norm.
///
/// Setup order: init_graph, init_buffers, init_residual (collective: builds
/// the spanning tree), then optionally config_async and switch_async.
class Communicator {
 public:
  explicit Communicator(transport::Endpoint& ep);
  Communicator(const Communicator&) = delete;
  Communicator& operator=(const Communicator&) = delete;
  ~Communicator();

  void init_graph(std::vector<Rank> out_peers, std::vector<Rank> in_peers);
  void init_buffers(const std::vector<std::size_t>& send_sizes, const std::vector<std::size_t>& recv_sizes);
  void init_residual(std::size_t size, convergence::NormSpec spec);
  void init_residual(std::size_t size, convergence::NormSpec spec, LocalTree tree);
  bool initialized() const noexcept { return stage_ == 3; }

  /// Registers the solution block and the local-convergence flag read by
  /// the asynchronous detector. The flag must outlive the communicator.
  void config_async(std::size_t solution_size, const bool& local_flag);
  void switch_async(std::size_t max_recv_requests = kDefaultMaxRecvRequests);
  /// Trivial or overlapping synchronous exchange. Before the loop only.
  void set_sync_scheme(Scheme s);

  void recv();
  void send();
  void wait_completion();
  void update_residual();
  /// Starts a new solve (time step): residual norm back to +inf, data from
  /// the previous solve is dropped by asynchronous receives.
  void begin_solve();

  void set_observer(convergence::SnapshotObserver* obs);

  Scheme scheme() const noexcept { return scheme_; }
  bool is_async() const noexcept { return scheme_ == Scheme::async; }
  std::size_t max_recv_requests() const noexcept { return max_recv_; }
  const convergence::NormSpec& norm_spec() const noexcept { return spec_; }
  const LocalTree& tree() const noexcept { return tree_; }
  transport::Endpoint& endpoint() noexcept { return ep_; }

  const std::vector<Rank>& out_peers() const noexcept { return bufs_.out_peers; }
  const std::vector<Rank>& in_peers() const noexcept { return bufs_.in_peers; }
  std::span<double> send_buf(std::size_t i) { return bufs_.send.at(i).span(); }
  std::span<const double> recv_buf(std::size_t j) const { return bufs_.recv.at(j).span(); }
  std::span<double> residual() noexcept { return bufs_.residual.span(); }
  std::span<double> solution() noexcept { return bufs_.solution.span(); }
  std::span<const double> solution() const noexcept { return bufs_.solution.span(); }
  double residual_norm() const noexcept { return residual_norm_; }
  /// Asynchronous detection fired in the current solve.
  bool terminated() const noexcept;

  std::size_t active_recvs(std::size_t j) const { return active_recv_.at(j).size(); }
  std::size_t pending_sends(std::size_t i);
  bool exchange_pending() const noexcept { return exchange_pending_; }
  bool halos_current() const noexcept { return halos_current_; }
  const CommStats& stats() const noexcept { return stats_; }
  const convergence::AsyncDetector* detector() const noexcept { return detector_.get(); }

 private:
  void require_init(const char* what) const;
  void post_data_recv(std::size_t j);
  void deliver(std::size_t j, transport::Envelope& env);
  void sync_recv();
  void async_recv();
  void sync_send();
  void async_send();
  void sample_budgets();

  transport::Endpoint& ep_;
  int stage_ = 0;
  LinkBufferSet bufs_;
  std::vector<std::deque<transport::Request>> active_recv_;
  std::vector<std::optional<transport::Request>> inflight_;
  std::vector<transport::Request> sync_sends_;
  convergence::NormSpec spec_;
  LocalTree tree_;
  const bool* flag_ = nullptr;
  Scheme scheme_ = Scheme::overlap;
  std::size_t max_recv_ = 1;
  bool loop_started_ = false;
  bool exchange_pending_ = false;
  bool halos_current_ = false;
  double residual_norm_ = std::numeric_limits<double>::infinity();
  std::uint32_t epoch_ = 0;
  std::uint32_t sync_round_ = 0;
  std::unique_ptr<convergence::AsyncDetector> detector_;
  convergence::SnapshotObserver* observer_ = nullptr;
  CommStats stats_;
};

struct SchemeResult {
  std::size_t iterations = 0;
  bool converged = false;
};

/// Runs the iteration loop matching comm.scheme() until `stop` holds (by
/// default: residual norm below threshold) or `max_iterations` is reached.
/// `compute` reads recv buffers and the solution, and writes the solution,
/// the send buffers and the residual block.
SchemeResult run_scheme(Communicator& comm, const std::function<void()>& compute, std::size_t max_iterations,
                        const std::function<bool()>& stop = {});

}  // namespace itercomm::comm
