#include "itercomm/transport/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "itercomm/errors.hpp"

namespace itercomm::transport {

namespace {
constexpr double kNever = std::numeric_limits<double>::infinity();

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

double DelayModel::latency_of(Rank src, Rank dst) const {
  if (auto it = link_latency.find({src, dst}); it != link_latency.end()) return it->second;
  return base_latency;
}

double DelayModel::slowdown_of(Rank r) const {
  if (r >= 0 && static_cast<std::size_t>(r) < slowdown.size()) return slowdown[r];
  return 1.0;
}

SimWorld::SimWorld(CommGraph graph, DelayModel delays, std::size_t channel_capacity)
    : graph_(std::move(graph)), delays_(std::move(delays)), capacity_(channel_capacity) {
  graph_.validate();
  if (delays_.base_latency < 0.0 || delays_.jitter < 0.0) throw ConfigError("latencies must be non-negative");
  for (const auto& [link, lat] : delays_.link_latency) {
    if (lat < 0.0) throw ConfigError("latencies must be non-negative");
    if (!graph_.has_edge(link.first, link.second)) {
      throw ConfigError("latency override for non-edge " + std::to_string(link.first) + "->" +
                        std::to_string(link.second));
    }
  }
  for (double s : delays_.slowdown) {
    if (!(s > 0.0)) throw ConfigError("slowdown factors must be positive");
  }
  procs_.reserve(graph_.size());
  endpoints_.resize(graph_.size());
  for (int r = 0; r < graph_.size(); ++r) procs_.push_back(std::make_unique<Proc>());
  const auto p = static_cast<long long>(graph_.size());
  for (Rank s = 0; s < graph_.size(); ++s) {
    for (Rank d : graph_.out[s]) {
      Channel& ch = channels_[s * p + d];
      ch.rng.seed(mix(delays_.seed ^ mix(static_cast<std::uint64_t>(s * p + d))));
    }
  }
}

SimWorld::~SimWorld() = default;

Endpoint& SimWorld::open(Rank rank) {
  if (rank < 0 || rank >= size()) {
    throw ConfigError("rank " + std::to_string(rank) + " outside 0.." + std::to_string(size() - 1));
  }
  if (endpoints_[rank]) throw UsageError("endpoint for rank " + std::to_string(rank) + " already open");
  endpoints_[rank] = std::make_unique<SimEndpoint>(*this, rank);
  return *endpoints_[rank];
}

SimWorld::Channel& SimWorld::channel(Rank src, Rank dst) {
  return channels_.at(static_cast<long long>(src) * size() + dst);
}

double SimWorld::clock(Rank r) const { return procs_.at(r)->clock; }

double SimWorld::makespan() const {
  double m = 0.0;
  for (const auto& p : procs_) m = std::max(m, p->clock);
  return m;
}

std::size_t SimWorld::queued_messages() const {
  std::size_t n = 0;
  for (const auto& [k, ch] : channels_) n += ch.unmatched;
  return n;
}

void SimWorld::match(Channel& ch, Stream& s, Rank src, Rank dst) {
  while (!s.unmatched.empty() && !s.waiting.empty()) {
    QueuedMessage msg = std::move(s.unmatched.front());
    s.unmatched.pop_front();
    WaitingRecv w = s.waiting.front();
    s.waiting.pop_front();
    --ch.unmatched;
    ++matched_;

    const double at = std::max(msg.env.deliver_at, w.posted_at);
    Record& sent = procs_[src]->records.at(msg.send_serial);
    sent.matched = true;
    sent.complete_at = at;

    Record& rec = procs_[dst]->records.at(w.recv_serial);
    if (rec.expected != kAnySize && msg.env.body.size() != rec.expected) {
      rec.error = "message size mismatch on " + std::string(tag_name(msg.env.tag)) + " link " +
                  std::to_string(src) + "->" + std::to_string(dst) + ": got " +
                  std::to_string(msg.env.body.size()) + ", expected " + std::to_string(rec.expected);
    }
    rec.matched = true;
    rec.complete_at = at;
    rec.env = std::move(msg.env);
  }
}

int SimWorld::pick() {
  int best = -1;
  double best_t = kNever;
  int first_blocked = -1;
  for (int r = 0; r < size(); ++r) {
    Proc& p = *procs_[r];
    if (p.state == State::done) continue;
    double t = p.clock;
    if (p.state == State::blocked) {
      if (first_blocked < 0) first_blocked = r;
      t = std::max(p.clock, p.wake());
    }
    if (t < best_t) {
      best_t = t;
      best = r;
    }
  }
  if (best < 0 && first_blocked >= 0) {
    deadlock_ = true;
    return first_blocked;
  }
  deadlock_ = false;
  return best;
}

void SimWorld::hand_off(std::unique_lock<std::mutex>& lk, Rank self) {
  const int next = pick();
  if (next == self) return;
  active_ = next;
  if (next >= 0) procs_[next]->cv.notify_one();
  procs_[self]->cv.wait(lk, [&] { return active_ == self; });
}

void SimWorld::yield(Rank r) {
  if (!running_) return;
  std::unique_lock lk(mu_);
  hand_off(lk, r);
}

void SimWorld::block(Rank r, std::function<double()> wake) {
  Proc& p = *procs_[r];
  if (!running_) {
    const double t = wake();
    if (!std::isfinite(t)) {
      throw ProtocolDeadlock("protocol deadlock: rank " + std::to_string(r) +
                             " waits on requests that no pending delivery can complete");
    }
    p.clock = std::max(p.clock, t);
    return;
  }
  std::unique_lock lk(mu_);
  p.state = State::blocked;
  p.wake = std::move(wake);
  hand_off(lk, r);
  p.state = State::ready;
  if (deadlock_) {
    p.wake = nullptr;
    throw ProtocolDeadlock("protocol deadlock: rank " + std::to_string(r) +
                           " waits on requests that no pending delivery can complete");
  }
  p.clock = std::max(p.clock, p.wake());
  p.wake = nullptr;
}

std::vector<std::exception_ptr> SimWorld::run_collect(const std::function<void(Endpoint&)>& body) {
  if (running_) throw UsageError("SimWorld::run is not reentrant");
  for (Rank r = 0; r < size(); ++r) {
    if (!endpoints_[r]) open(r);
    procs_[r]->state = State::ready;
  }
  std::vector<std::exception_ptr> errors(size());
  std::vector<std::thread> threads;
  running_ = true;
  deadlock_ = false;
  active_ = -1;
  threads.reserve(size());
  for (Rank r = 0; r < size(); ++r) {
    threads.emplace_back([this, r, &body, &errors] {
      {
        std::unique_lock lk(mu_);
        procs_[r]->cv.wait(lk, [&] { return active_ == r; });
      }
      try {
        body(*endpoints_[r]);
      } catch (...) {
        errors[r] = std::current_exception();
      }
      std::unique_lock lk(mu_);
      procs_[r]->state = State::done;
      const int next = pick();
      active_ = next;
      if (next >= 0) procs_[next]->cv.notify_one();
    });
  }
  {
    std::unique_lock lk(mu_);
    active_ = pick();
    if (active_ >= 0) procs_[active_]->cv.notify_one();
  }
  for (auto& t : threads) t.join();
  running_ = false;
  active_ = -1;
  return errors;
}

void SimWorld::run(const std::function<void(Endpoint&)>& body) {
  for (auto& e : run_collect(body)) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------

SimWorld::Record& SimEndpoint::record(Request r) {
  if (r.owner != rank_) {
    throw UsageError("request owned by rank " + std::to_string(r.owner) + " used on rank " + std::to_string(rank_));
  }
  auto& recs = world_.procs_[rank_]->records;
  auto it = recs.find(r.serial);
  if (it == recs.end()) throw UsageError("unknown or released request");
  return it->second;
}

bool SimEndpoint::done(const SimWorld::Record& rec) const {
  return rec.matched && rec.complete_at <= world_.procs_[rank_]->clock;
}

Request SimEndpoint::post_send(Rank peer, Envelope env) {
  if (!has_out(peer)) {
    throw UsageError("rank " + std::to_string(rank_) + " has no channel to " + std::to_string(peer));
  }
  auto& proc = *world_.procs_[rank_];
  auto& ch = world_.channel(rank_, peer);
  if (ch.unmatched >= world_.capacity_) {
    throw ProtocolError("channel " + std::to_string(rank_) + "->" + std::to_string(peer) + " queue overflow (" +
                        std::to_string(world_.capacity_) + " unmatched messages)");
  }
  double latency = world_.delays_.latency_of(rank_, peer);
  if (world_.delays_.jitter > 0.0) {
    latency += std::uniform_real_distribution<double>(0.0, world_.delays_.jitter)(ch.rng);
  }
  const double deliver = std::max(proc.clock + latency, ch.last_deliver);
  ch.last_deliver = deliver;

  env.src = rank_;
  env.dst = peer;
  env.deliver_at = deliver;
  world_.events_.push_back({deliver, rank_, peer, env.tag, env.round, env.body.size()});
  ++world_.posted_;

  const std::uint64_t serial = proc.next_serial++;
  SimWorld::Record rec;
  rec.is_send = true;
  rec.peer = peer;
  rec.tag = env.tag;
  proc.records.emplace(serial, std::move(rec));

  auto& stream = ch.streams[static_cast<int>(env.tag)];
  stream.unmatched.push_back({std::move(env), serial});
  ++ch.unmatched;
  world_.match(ch, stream, rank_, peer);
  return {rank_, serial};
}

Request SimEndpoint::post_recv(Rank peer, Tag tag, std::size_t expected_size) {
  if (!has_in(peer)) {
    throw UsageError("rank " + std::to_string(rank_) + " has no channel from " + std::to_string(peer));
  }
  auto& proc = *world_.procs_[rank_];
  const std::uint64_t serial = proc.next_serial++;
  SimWorld::Record rec;
  rec.peer = peer;
  rec.tag = tag;
  rec.expected = expected_size;
  proc.records.emplace(serial, std::move(rec));

  auto& ch = world_.channel(peer, rank_);
  auto& stream = ch.streams[static_cast<int>(tag)];
  stream.waiting.push_back({serial, proc.clock});
  world_.match(ch, stream, peer, rank_);
  return {rank_, serial};
}

bool SimEndpoint::test(Request r) {
  auto& rec = record(r);
  if (!done(rec)) return false;
  if (!rec.error.empty()) throw ProtocolError(rec.error);
  return true;
}

Envelope SimEndpoint::take(Request r) {
  auto& rec = record(r);
  if (rec.is_send) throw UsageError("take on a send request");
  if (!done(rec)) throw UsageError("take on an incomplete receive");
  auto& recs = world_.procs_[rank_]->records;
  if (!rec.error.empty()) {
    std::string msg = std::move(rec.error);
    recs.erase(r.serial);
    throw ProtocolError(msg);
  }
  Envelope env = std::move(rec.env);
  recs.erase(r.serial);
  return env;
}

void SimEndpoint::release(Request r) {
  auto& rec = record(r);
  if (!rec.is_send) throw UsageError("release on a receive request; use take");
  if (!done(rec)) throw UsageError("release on an incomplete send");
  world_.procs_[rank_]->records.erase(r.serial);
}

double SimEndpoint::completion_bound(std::span<const Request> rs) const {
  double t = kNever;
  const auto& recs = world_.procs_[rank_]->records;
  for (const auto& r : rs) {
    const auto& rec = recs.at(r.serial);
    if (rec.matched) t = std::min(t, rec.complete_at);
  }
  return t;
}

void SimEndpoint::wait_all(std::span<const Request> rs) {
  for (const auto& r : rs) record(r);
  for (;;) {
    std::vector<Request> pending;
    for (const auto& r : rs) {
      if (!done(record(r))) pending.push_back(r);
    }
    if (pending.empty()) break;
    world_.block(rank_, [this, &pending] { return completion_bound(pending); });
  }
  for (const auto& r : rs) test(r);
}

std::size_t SimEndpoint::wait_any(std::span<const Request> rs) {
  if (rs.empty()) throw UsageError("wait_any on an empty request list");
  for (const auto& r : rs) record(r);
  for (;;) {
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (test(rs[i])) return i;
    }
    world_.block(rank_, [this, rs] { return completion_bound(rs); });
  }
}

void SimEndpoint::compute(double work) {
  if (work < 0.0) throw UsageError("negative compute work");
  world_.procs_[rank_]->clock += work * world_.delays_.slowdown_of(rank_);
  world_.yield(rank_);
}

double SimEndpoint::now() const { return world_.procs_[rank_]->clock; }

}  // namespace itercomm::transport
