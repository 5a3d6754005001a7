#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "itercomm/transport/endpoint.hpp"

namespace itercomm::transport {

/// Frame layout on a TCP channel:
///   u32 LE  length of everything after this field (1 + 4 + body bytes)
///   u8      tag
///   u32 LE  source rank
///   body    u32 LE round, then the payload as IEEE-754 f64 LE values
/// The receiver answers every matched frame with a u64 LE ack carrying the
/// frame's index on that channel; the send completes when the ack arrives.
std::vector<std::uint8_t> encode_frame(const Envelope& env);

/// Decodes one frame starting at `bytes`. Returns the number of bytes
/// consumed, or 0 when the buffer does not yet hold a whole frame.
std::size_t decode_frame(std::span<const std::uint8_t> bytes, Rank dst, Envelope& out);

struct SocketOptions {
  std::chrono::milliseconds deadlock_timeout{10000};
  std::chrono::milliseconds connect_timeout{10000};
  std::size_t channel_capacity = kDefaultChannelCapacity;
};

/// Listening sockets for every rank of a graph, bound on 127.0.0.1 with
/// ephemeral ports. Create it before spawning threads or forking so every
/// rank knows every port.
class SocketMesh {
 public:
  explicit SocketMesh(CommGraph graph);
  ~SocketMesh();
  SocketMesh(const SocketMesh&) = delete;
  SocketMesh& operator=(const SocketMesh&) = delete;

  const CommGraph& graph() const noexcept { return graph_; }
  int port(Rank r) const { return ports_.at(r); }

  /// Connects rank `r`'s out-links and accepts its in-links. Blocks until
  /// every channel of `r` is up. Each rank may be opened once.
  std::unique_ptr<Endpoint> open(Rank r, SocketOptions opts = {});

  /// Closes the listeners of all ranks except `keep` (after fork).
  void close_listeners_except(Rank keep);

 private:
  CommGraph graph_;
  std::vector<int> listen_fds_;
  std::vector<int> ports_;
  std::vector<bool> opened_;
};

class SocketEndpoint final : public Endpoint {
 public:
  SocketEndpoint(const CommGraph& graph, Rank rank, std::map<Rank, int> out_fds, std::map<Rank, int> in_fds,
                 SocketOptions opts);
  ~SocketEndpoint() override;
  SocketEndpoint(const SocketEndpoint&) = delete;
  SocketEndpoint& operator=(const SocketEndpoint&) = delete;

  Rank rank() const noexcept override { return rank_; }
  int world_size() const noexcept override { return size_; }
  const std::vector<Rank>& out_peers() const noexcept override { return out_peers_; }
  const std::vector<Rank>& in_peers() const noexcept override { return in_peers_; }

  Request post_send(Rank peer, Envelope env) override;
  Request post_recv(Rank peer, Tag tag, std::size_t expected_size = kAnySize) override;
  bool test(Request r) override;
  Envelope take(Request r) override;
  void release(Request r) override;
  void wait_all(std::span<const Request> rs) override;
  std::size_t wait_any(std::span<const Request> rs) override;
  void compute(double) override {}
  double now() const override;

 private:
  struct Record {
    bool is_send = false;
    bool done = false;
    Rank peer = -1;
    Tag tag = Tag::data;
    std::size_t expected = kAnySize;
    Envelope env;
    std::string error;
  };
  struct Outgoing {
    std::uint64_t serial = 0;
    std::vector<std::uint8_t> bytes;
    std::size_t offset = 0;
  };
  struct InLink {
    int fd = -1;
    bool closed = false;
    std::vector<std::uint8_t> buffer;
    std::deque<std::pair<std::uint64_t, Envelope>> arrived[kTagCount];  // (frame index, envelope)
    std::deque<std::uint64_t> waiting[kTagCount];
    std::size_t unmatched = 0;
    std::uint64_t frames = 0;
    std::vector<std::uint8_t> acks;  // not yet written
  };
  struct OutLink {
    int fd = -1;
    bool broken = false;
    std::deque<Outgoing> queue;
    std::uint64_t frames = 0;
    std::unordered_map<std::uint64_t, std::uint64_t> unacked;  // frame index -> send serial
    std::vector<std::uint8_t> ack_buffer;
  };

  Record& record(Request r);
  void pump();
  void flush(OutLink& link);
  void read_available(Rank peer, InLink& link);
  void read_acks(OutLink& link);
  void flush_acks(InLink& link);
  void complete_send(std::uint64_t serial);
  void match(InLink& link, int tag);
  void poll_once(int timeout_ms);

  Rank rank_;
  int size_;
  std::vector<Rank> out_peers_;
  std::vector<Rank> in_peers_;
  std::map<Rank, OutLink> out_;
  std::map<Rank, InLink> in_;
  std::unordered_map<std::uint64_t, Record> records_;
  std::uint64_t next_serial_ = 1;
  SocketOptions opts_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace itercomm::transport
