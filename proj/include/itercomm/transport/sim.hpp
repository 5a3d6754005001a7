#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <unordered_map>
#include <vector>

#include "itercomm/transport/endpoint.hpp"

namespace itercomm::transport {

/// Link latencies, per-rank compute slowdowns and seeded jitter for the
/// simulated backend. Times are abstract ticks.
struct DelayModel {
  double base_latency = 1.0;
  double jitter = 0.0;  // extra latency drawn uniformly from [0, jitter)
  std::uint64_t seed = 0;
  std::vector<double> slowdown;                          // missing entries mean 1
  std::map<std::pair<Rank, Rank>, double> link_latency;  // overrides base_latency

  double latency_of(Rank src, Rank dst) const;
  double slowdown_of(Rank r) const;
};

/// One message hand-off as seen by the global observer.
struct DeliveryEvent {
  double deliver_at = 0.0;
  Rank src = -1;
  Rank dst = -1;
  Tag tag = Tag::data;
  std::uint32_t round = 0;
  std::size_t size = 0;

  bool operator==(const DeliveryEvent&) const = default;
};

class SimEndpoint;

/// Deterministic discrete-delay transport. Logical processes run as threads
/// but only one executes at a time: the one with the smallest simulated
/// clock (ties go to the lowest rank). A message posted at sender time t
/// becomes deliverable at max(t + latency + jitter, previous delivery on
/// the same channel), which keeps every directed channel FIFO.
///
/// Outside run() the endpoints can be driven directly from one thread; a
/// blocking call then advances the caller's clock to the next completion.
class SimWorld {
 public:
  explicit SimWorld(CommGraph graph, DelayModel delays = {},
                    std::size_t channel_capacity = kDefaultChannelCapacity);
  ~SimWorld();
  SimWorld(const SimWorld&) = delete;
  SimWorld& operator=(const SimWorld&) = delete;

  int size() const noexcept { return graph_.size(); }
  const CommGraph& graph() const noexcept { return graph_; }
  const DelayModel& delays() const noexcept { return delays_; }

  /// Opens the channels of `rank`. A second open of the same rank is a
  /// usage error.
  Endpoint& open(Rank rank);

  /// Runs `body` once per rank as concurrent logical processes and joins.
  /// Ranks not yet opened are opened first. Returns one slot per rank,
  /// empty when that rank finished normally.
  std::vector<std::exception_ptr> run_collect(const std::function<void(Endpoint&)>& body);
  /// Like run_collect, rethrowing the lowest-rank failure.
  void run(const std::function<void(Endpoint&)>& body);

  const std::vector<DeliveryEvent>& events() const noexcept { return events_; }
  double clock(Rank r) const;
  double makespan() const;

  std::uint64_t posted_messages() const noexcept { return posted_; }
  std::uint64_t matched_messages() const noexcept { return matched_; }
  std::size_t queued_messages() const;

 private:
  friend class SimEndpoint;

  struct Record {
    bool is_send = false;
    Rank peer = -1;
    Tag tag = Tag::data;
    std::size_t expected = kAnySize;
    bool matched = false;
    double complete_at = 0.0;
    Envelope env;
    std::string error;
  };
  struct QueuedMessage {
    Envelope env;
    std::uint64_t send_serial = 0;
  };
  struct WaitingRecv {
    std::uint64_t recv_serial = 0;
    double posted_at = 0.0;
  };
  struct Stream {
    std::deque<QueuedMessage> unmatched;
    std::deque<WaitingRecv> waiting;
  };
  struct Channel {
    double last_deliver = 0.0;
    std::mt19937_64 rng;
    Stream streams[kTagCount];
    std::size_t unmatched = 0;
  };
  enum class State { ready, blocked, done };
  struct Proc {
    double clock = 0.0;
    State state = State::ready;
    std::function<double()> wake;
    std::condition_variable cv;
    std::unordered_map<std::uint64_t, Record> records;
    std::uint64_t next_serial = 1;
  };

  Channel& channel(Rank src, Rank dst);
  void match(Channel& ch, Stream& s, Rank src, Rank dst);
  void yield(Rank r);
  void block(Rank r, std::function<double()> wake);
  int pick();
  void hand_off(std::unique_lock<std::mutex>& lk, Rank self);

  CommGraph graph_;
  DelayModel delays_;
  std::size_t capacity_;
  std::unordered_map<long long, Channel> channels_;
  std::vector<std::unique_ptr<Proc>> procs_;
  std::vector<std::unique_ptr<SimEndpoint>> endpoints_;
  std::vector<DeliveryEvent> events_;
  std::uint64_t posted_ = 0;
  std::uint64_t matched_ = 0;

  std::mutex mu_;
  int active_ = -1;
  bool running_ = false;
  bool deadlock_ = false;
};

class SimEndpoint final : public Endpoint {
 public:
  SimEndpoint(SimWorld& world, Rank rank) : world_(world), rank_(rank) {}

  Rank rank() const noexcept override { return rank_; }
  int world_size() const noexcept override { return world_.size(); }
  const std::vector<Rank>& out_peers() const noexcept override { return world_.graph_.out[rank_]; }
  const std::vector<Rank>& in_peers() const noexcept override { return world_.graph_.in[rank_]; }

  Request post_send(Rank peer, Envelope env) override;
  Request post_recv(Rank peer, Tag tag, std::size_t expected_size = kAnySize) override;
  bool test(Request r) override;
  Envelope take(Request r) override;
  void release(Request r) override;
  void wait_all(std::span<const Request> rs) override;
  std::size_t wait_any(std::span<const Request> rs) override;
  void compute(double work) override;
  double now() const override;

 private:
  SimWorld::Record& record(Request r);
  bool done(const SimWorld::Record& rec) const;
  double completion_bound(std::span<const Request> rs) const;

  SimWorld& world_;
  Rank rank_;
};

}  // namespace itercomm::transport
