#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "itercomm/payload.hpp"
#include "itercomm/topology/graph.hpp"

namespace itercomm::transport {

/// Message kind. Receivers decode the body purely from the tag.
enum class Tag : std::uint8_t {
  data = 0,
  snapshot_data = 1,
  local_conv = 2,
  norm_up = 3,
  norm_down = 4,
  control = 5,
  terminate = 6,
};
inline constexpr int kTagCount = 7;

std::string_view tag_name(Tag t) noexcept;

struct Envelope {
  Rank src = -1;
  Rank dst = -1;
  Tag tag = Tag::data;
  std::uint32_t round = 0;
  PayloadBuffer body;
  double deliver_at = 0.0;  // simulated backend only
};

/// Opaque request handle. Only meaningful to the endpoint that issued it.
struct Request {
  Rank owner = -1;
  std::uint64_t serial = 0;

  bool valid() const noexcept { return owner >= 0; }
  bool operator==(const Request&) const = default;
};

inline constexpr std::size_t kAnySize = std::numeric_limits<std::size_t>::max();

/// Default bound on arrived-but-unmatched messages per directed channel.
inline constexpr std::size_t kDefaultChannelCapacity = 64;

/// Per-rank view of the transport. Owned by exactly one logical process.
class Endpoint {
 public:
  virtual ~Endpoint() = default;

  virtual Rank rank() const noexcept = 0;
  virtual int world_size() const noexcept = 0;
  virtual const std::vector<Rank>& out_peers() const noexcept = 0;
  virtual const std::vector<Rank>& in_peers() const noexcept = 0;

  /// Non-blocking send. Completes once a matching receive has taken it.
  virtual Request post_send(Rank peer, Envelope env) = 0;
  /// Non-blocking receive of the next message from `peer` with `tag`.
  /// Receives on one (peer, tag) stream match messages in posting order.
  virtual Request post_recv(Rank peer, Tag tag, std::size_t expected_size = kAnySize) = 0;

  virtual bool test(Request r) = 0;
  /// Moves the delivered message out of a completed receive and releases it.
  virtual Envelope take(Request r) = 0;
  /// Releases a completed send.
  virtual void release(Request r) = 0;

  virtual void wait_all(std::span<const Request> rs) = 0;
  /// Blocks until at least one request is complete; returns the index of
  /// the first completed one in `rs`.
  virtual std::size_t wait_any(std::span<const Request> rs) = 0;

  /// Accounts `work` units of local computation (scaled by the rank's
  /// slowdown in the simulator; no-op on real transports).
  virtual void compute(double work) = 0;
  /// Local clock: simulated ticks, or seconds since open on real transports.
  virtual double now() const = 0;

  bool has_out(Rank peer) const noexcept;
  bool has_in(Rank peer) const noexcept;
};

}  // namespace itercomm::transport
