#include "itercomm/transport/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <thread>

#include "itercomm/errors.hpp"

namespace itercomm::transport {

namespace {

static_assert(std::endian::native == std::endian::little, "wire codec assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

[[noreturn]] void sys_fail(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

void write_all_blocking(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (n > 0) {
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

void read_all_blocking(int fd, void* data, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(data);
  while (n > 0) {
    ssize_t r = ::recv(fd, p, n, 0);
    if (r == 0) throw ProtocolError("peer closed during handshake");
    if (r < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    p += r;
    n -= static_cast<std::size_t>(r);
  }
}

void set_nonblocking(int fd) {
  int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) sys_fail("fcntl");
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Envelope& env) {
  const std::size_t body = 4 + 8 * env.body.size();
  std::vector<std::uint8_t> out;
  out.reserve(4 + 1 + 4 + body);
  put_u32(out, static_cast<std::uint32_t>(1 + 4 + body));
  out.push_back(static_cast<std::uint8_t>(env.tag));
  put_u32(out, static_cast<std::uint32_t>(env.src));
  put_u32(out, env.round);
  const std::size_t at = out.size();
  out.resize(at + 8 * env.body.size());
  if (!env.body.empty()) std::memcpy(out.data() + at, env.body.data(), 8 * env.body.size());
  return out;
}

std::size_t decode_frame(std::span<const std::uint8_t> bytes, Rank dst, Envelope& out) {
  if (bytes.size() < 4) return 0;
  const std::uint32_t len = get_u32(bytes.data());
  if (bytes.size() < 4 + static_cast<std::size_t>(len)) return 0;
  if (len < 1 + 4 + 4 || (len - 9) % 8 != 0) throw ProtocolError("malformed frame length " + std::to_string(len));
  const std::uint8_t tag = bytes[4];
  if (tag >= kTagCount) throw ProtocolError("unknown tag " + std::to_string(tag));
  out.tag = static_cast<Tag>(tag);
  out.src = static_cast<Rank>(get_u32(bytes.data() + 5));
  out.dst = dst;
  out.round = get_u32(bytes.data() + 9);
  std::vector<double> values((len - 9) / 8);
  if (!values.empty()) std::memcpy(values.data(), bytes.data() + 13, 8 * values.size());
  out.body = PayloadBuffer(std::move(values));
  out.deliver_at = 0.0;
  return 4 + static_cast<std::size_t>(len);
}

// ---------------------------------------------------------------------------

SocketMesh::SocketMesh(CommGraph graph) : graph_(std::move(graph)) {
  graph_.validate();
  const int p = graph_.size();
  listen_fds_.assign(p, -1);
  ports_.assign(p, 0);
  opened_.assign(p, false);
  for (int r = 0; r < p; ++r) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) sys_fail("bind");
    if (::listen(fd, 128) < 0) sys_fail("listen");
    socklen_t len = sizeof addr;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0) sys_fail("getsockname");
    listen_fds_[r] = fd;
    ports_[r] = ntohs(addr.sin_port);
  }
}

SocketMesh::~SocketMesh() {
  for (int fd : listen_fds_) {
    if (fd >= 0) ::close(fd);
  }
}

void SocketMesh::close_listeners_except(Rank keep) {
  for (int r = 0; r < graph_.size(); ++r) {
    if (r != keep && listen_fds_[r] >= 0) {
      ::close(listen_fds_[r]);
      listen_fds_[r] = -1;
    }
  }
}

std::unique_ptr<Endpoint> SocketMesh::open(Rank r, SocketOptions opts) {
  if (r < 0 || r >= graph_.size()) throw ConfigError("rank " + std::to_string(r) + " outside the graph");
  if (opened_[r]) throw UsageError("endpoint for rank " + std::to_string(r) + " already open");
  if (listen_fds_[r] < 0) throw UsageError("listener for rank " + std::to_string(r) + " was closed");
  opened_[r] = true;

  std::map<Rank, int> out_fds;
  const auto deadline = std::chrono::steady_clock::now() + opts.connect_timeout;
  for (Rank peer : graph_.out[r]) {
    int fd = -1;
    for (;;) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) sys_fail("socket");
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      addr.sin_port = htons(static_cast<std::uint16_t>(ports_[peer]));
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) break;
      ::close(fd);
      if (std::chrono::steady_clock::now() > deadline) sys_fail("connect to rank " + std::to_string(peer));
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    const std::uint32_t hello = static_cast<std::uint32_t>(r);
    std::uint8_t buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<std::uint8_t>(hello >> (8 * i));
    write_all_blocking(fd, buf, 4);
    out_fds[peer] = fd;
  }

  std::map<Rank, int> in_fds;
  while (in_fds.size() < graph_.in[r].size()) {
    pollfd pfd{listen_fds_[r], POLLIN, 0};
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw ProtocolDeadlock("rank " + std::to_string(r) + " timed out accepting channels");
    int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno != EINTR) sys_fail("poll");
    if (rc <= 0) continue;
    int fd = ::accept(listen_fds_[r], nullptr, nullptr);
    if (fd < 0) sys_fail("accept");
    std::uint8_t buf[4];
    read_all_blocking(fd, buf, 4);
    const Rank from = static_cast<Rank>(get_u32(buf));
    if (from < 0 || from >= graph_.size() || !graph_.has_edge(from, r) || in_fds.count(from)) {
      ::close(fd);
      throw ProtocolError("unexpected connection from rank " + std::to_string(from));
    }
    in_fds[from] = fd;
  }
  return std::make_unique<SocketEndpoint>(graph_, r, std::move(out_fds), std::move(in_fds), opts);
}

// ---------------------------------------------------------------------------

SocketEndpoint::SocketEndpoint(const CommGraph& graph, Rank rank, std::map<Rank, int> out_fds,
                               std::map<Rank, int> in_fds, SocketOptions opts)
    : rank_(rank),
      size_(graph.size()),
      out_peers_(graph.out[rank]),
      in_peers_(graph.in[rank]),
      opts_(opts),
      start_(std::chrono::steady_clock::now()) {
  for (auto [peer, fd] : out_fds) {
    set_nonblocking(fd);
    out_[peer].fd = fd;
  }
  for (auto [peer, fd] : in_fds) {
    set_nonblocking(fd);
    in_[peer].fd = fd;
  }
}

SocketEndpoint::~SocketEndpoint() {
  // Best effort: hand queued bytes to the kernel before closing.
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
  for (auto& [peer, link] : out_) {
    while (!link.queue.empty() && !link.broken && std::chrono::steady_clock::now() < deadline) {
      flush(link);
      if (!link.queue.empty()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    ::close(link.fd);
  }
  for (auto& [peer, link] : in_) ::close(link.fd);
}

double SocketEndpoint::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

SocketEndpoint::Record& SocketEndpoint::record(Request r) {
  if (r.owner != rank_) {
    throw UsageError("request owned by rank " + std::to_string(r.owner) + " used on rank " + std::to_string(rank_));
  }
  auto it = records_.find(r.serial);
  if (it == records_.end()) throw UsageError("unknown or released request");
  return it->second;
}

void SocketEndpoint::complete_send(std::uint64_t serial) {
  if (auto it = records_.find(serial); it != records_.end()) it->second.done = true;
}

void SocketEndpoint::flush(OutLink& link) {
  while (!link.queue.empty()) {
    Outgoing& o = link.queue.front();
    if (!link.broken) {
      ssize_t w = ::send(link.fd, o.bytes.data() + o.offset, o.bytes.size() - o.offset, MSG_NOSIGNAL | MSG_DONTWAIT);
      if (w < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return;
        // Peer went away: remaining traffic on this channel is dropped.
        link.broken = true;
      } else {
        o.offset += static_cast<std::size_t>(w);
        if (o.offset < o.bytes.size()) return;
      }
    }
    link.queue.pop_front();
  }
  if (link.broken) {
    for (auto [frame, serial] : link.unacked) complete_send(serial);
    link.unacked.clear();
  }
}

void SocketEndpoint::read_acks(OutLink& link) {
  if (link.broken || link.unacked.empty()) return;
  std::uint8_t buf[4096];
  for (;;) {
    ssize_t r = ::recv(link.fd, buf, sizeof buf, MSG_DONTWAIT);
    if (r > 0) {
      link.ack_buffer.insert(link.ack_buffer.end(), buf, buf + r);
      continue;
    }
    if (r < 0 && errno == EINTR) continue;
    if (r < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
    link.broken = true;
    break;
  }
  std::size_t pos = 0;
  for (; pos + 8 <= link.ack_buffer.size(); pos += 8) {
    const std::uint64_t frame =
        get_u32(&link.ack_buffer[pos]) | (static_cast<std::uint64_t>(get_u32(&link.ack_buffer[pos + 4])) << 32);
    auto it = link.unacked.find(frame);
    if (it == link.unacked.end()) throw ProtocolError("ack for unknown frame " + std::to_string(frame));
    complete_send(it->second);
    link.unacked.erase(it);
  }
  link.ack_buffer.erase(link.ack_buffer.begin(), link.ack_buffer.begin() + static_cast<std::ptrdiff_t>(pos));
  if (link.broken) {
    for (auto [frame, serial] : link.unacked) complete_send(serial);
    link.unacked.clear();
  }
}

void SocketEndpoint::flush_acks(InLink& link) {
  if (link.acks.empty() || link.closed) return;
  ssize_t w = ::send(link.fd, link.acks.data(), link.acks.size(), MSG_NOSIGNAL | MSG_DONTWAIT);
  if (w > 0) link.acks.erase(link.acks.begin(), link.acks.begin() + w);
  // errors surface as a closed channel on the next read
}

void SocketEndpoint::read_available(Rank peer, InLink& link) {
  if (link.closed) return;
  std::uint8_t buf[65536];
  for (;;) {
    ssize_t r = ::recv(link.fd, buf, sizeof buf, MSG_DONTWAIT);
    if (r > 0) {
      link.buffer.insert(link.buffer.end(), buf, buf + r);
      continue;
    }
    if (r == 0) {
      link.closed = true;
      break;
    }
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) break;
    link.closed = true;
    break;
  }
  std::size_t pos = 0;
  for (;;) {
    Envelope env;
    const std::size_t used = decode_frame(std::span(link.buffer).subspan(pos), rank_, env);
    if (used == 0) break;
    pos += used;
    if (env.src != peer) throw ProtocolError("frame on channel from " + std::to_string(peer) + " claims source " +
                                             std::to_string(env.src));
    if (link.unmatched >= opts_.channel_capacity) {
      throw ProtocolError("channel " + std::to_string(peer) + "->" + std::to_string(rank_) + " queue overflow");
    }
    const int tag = static_cast<int>(env.tag);
    link.arrived[tag].emplace_back(link.frames++, std::move(env));
    ++link.unmatched;
    match(link, tag);
  }
  if (pos > 0) link.buffer.erase(link.buffer.begin(), link.buffer.begin() + static_cast<std::ptrdiff_t>(pos));
}

void SocketEndpoint::match(InLink& link, int tag) {
  auto& arrived = link.arrived[tag];
  auto& waiting = link.waiting[tag];
  while (!arrived.empty() && !waiting.empty()) {
    Record& rec = records_.at(waiting.front());
    waiting.pop_front();
    const std::uint64_t frame = arrived.front().first;
    rec.env = std::move(arrived.front().second);
    arrived.pop_front();
    put_u32(link.acks, static_cast<std::uint32_t>(frame));
    put_u32(link.acks, static_cast<std::uint32_t>(frame >> 32));
    --link.unmatched;
    if (rec.expected != kAnySize && rec.env.body.size() != rec.expected) {
      rec.error = "message size mismatch on " + std::string(tag_name(rec.env.tag)) + " link " +
                  std::to_string(rec.peer) + "->" + std::to_string(rank_) + ": got " +
                  std::to_string(rec.env.body.size()) + ", expected " + std::to_string(rec.expected);
    }
    rec.done = true;
  }
}

void SocketEndpoint::pump() {
  for (auto& [peer, link] : out_) {
    flush(link);
    read_acks(link);
  }
  for (auto& [peer, link] : in_) {
    read_available(peer, link);
    flush_acks(link);
  }
}

void SocketEndpoint::poll_once(int timeout_ms) {
  std::vector<pollfd> fds;
  for (auto& [peer, link] : in_) {
    if (link.closed) continue;
    short ev = POLLIN;
    if (!link.acks.empty()) ev |= POLLOUT;
    fds.push_back({link.fd, ev, 0});
  }
  for (auto& [peer, link] : out_) {
    if (link.broken) continue;
    short ev = 0;
    if (!link.queue.empty()) ev |= POLLOUT;
    if (!link.unacked.empty()) ev |= POLLIN;
    if (ev != 0) fds.push_back({link.fd, ev, 0});
  }
  if (fds.empty()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(timeout_ms));
    return;
  }
  ::poll(fds.data(), fds.size(), timeout_ms);
}

Request SocketEndpoint::post_send(Rank peer, Envelope env) {
  auto it = out_.find(peer);
  if (it == out_.end()) {
    throw UsageError("rank " + std::to_string(rank_) + " has no channel to " + std::to_string(peer));
  }
  env.src = rank_;
  env.dst = peer;
  const std::uint64_t serial = next_serial_++;
  Record rec;
  rec.is_send = true;
  rec.peer = peer;
  rec.tag = env.tag;
  records_.emplace(serial, std::move(rec));
  if (it->second.broken) {
    complete_send(serial);
    return {rank_, serial};
  }
  it->second.unacked.emplace(it->second.frames++, serial);
  it->second.queue.push_back({serial, encode_frame(env), 0});
  flush(it->second);
  return {rank_, serial};
}

Request SocketEndpoint::post_recv(Rank peer, Tag tag, std::size_t expected_size) {
  auto it = in_.find(peer);
  if (it == in_.end()) {
    throw UsageError("rank " + std::to_string(rank_) + " has no channel from " + std::to_string(peer));
  }
  const std::uint64_t serial = next_serial_++;
  Record rec;
  rec.peer = peer;
  rec.tag = tag;
  rec.expected = expected_size;
  records_.emplace(serial, std::move(rec));
  it->second.waiting[static_cast<int>(tag)].push_back(serial);
  match(it->second, static_cast<int>(tag));
  return {rank_, serial};
}

bool SocketEndpoint::test(Request r) {
  record(r);
  pump();
  Record& rec = record(r);
  if (!rec.done) return false;
  if (!rec.error.empty()) throw ProtocolError(rec.error);
  return true;
}

Envelope SocketEndpoint::take(Request r) {
  Record& rec = record(r);
  if (rec.is_send) throw UsageError("take on a send request");
  if (!rec.done) throw UsageError("take on an incomplete receive");
  if (!rec.error.empty()) {
    std::string msg = std::move(rec.error);
    records_.erase(r.serial);
    throw ProtocolError(msg);
  }
  Envelope env = std::move(rec.env);
  records_.erase(r.serial);
  return env;
}

void SocketEndpoint::release(Request r) {
  Record& rec = record(r);
  if (!rec.is_send) throw UsageError("release on a receive request; use take");
  if (!rec.done) throw UsageError("release on an incomplete send");
  records_.erase(r.serial);
}

void SocketEndpoint::wait_all(std::span<const Request> rs) {
  for (const auto& r : rs) record(r);
  const auto deadline = std::chrono::steady_clock::now() + opts_.deadlock_timeout;
  for (;;) {
    pump();
    bool all = true;
    for (const auto& r : rs) {
      if (!record(r).done) {
        all = false;
        break;
      }
    }
    if (all) break;
    if (std::chrono::steady_clock::now() > deadline) {
      throw ProtocolDeadlock("protocol deadlock: rank " + std::to_string(rank_) + " timed out waiting");
    }
    poll_once(5);
  }
  for (const auto& r : rs) test(r);
}

std::size_t SocketEndpoint::wait_any(std::span<const Request> rs) {
  if (rs.empty()) throw UsageError("wait_any on an empty request list");
  for (const auto& r : rs) record(r);
  const auto deadline = std::chrono::steady_clock::now() + opts_.deadlock_timeout;
  for (;;) {
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (test(rs[i])) return i;
    }
    if (std::chrono::steady_clock::now() > deadline) {
      throw ProtocolDeadlock("protocol deadlock: rank " + std::to_string(rank_) + " timed out waiting");
    }
    poll_once(5);
  }
}

}  // namespace itercomm::transport
