#include "itercomm/comm/communicator.hpp"

#include <algorithm>
#include <string>

#include "itercomm/errors.hpp"

namespace itercomm::comm {

using transport::Envelope;
using transport::Request;
using transport::Tag;

std::string_view scheme_name(Scheme s) noexcept {
  switch (s) {
    case Scheme::trivial: return "trivial";
    case Scheme::overlap: return "overlap";
    case Scheme::async: return "async";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "trivial") return Scheme::trivial;
  if (name == "overlap") return Scheme::overlap;
  if (name == "async") return Scheme::async;
  throw ConfigError("unknown scheme '" + std::string(name) + "' (expected trivial, overlap or async)");
}

Communicator::Communicator(transport::Endpoint& ep) : ep_(ep) {}

Communicator::~Communicator() = default;

void Communicator::require_init(const char* what) const {
  if (stage_ != 3) throw UsageError(std::string(what) + " before the communicator is initialized");
}

void Communicator::init_graph(std::vector<Rank> out_peers, std::vector<Rank> in_peers) {
  if (stage_ != 0) throw UsageError("communicator graph already initialized");
  auto check = [&](const std::vector<Rank>& peers, bool out) {
    std::vector<Rank> sorted = peers;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw ConfigError("duplicate neighbor in communicator graph");
    for (Rank r : peers) {
      if (out ? !ep_.has_out(r) : !ep_.has_in(r))
        throw ConfigError("rank " + std::to_string(r) + " is not a " + (out ? "outgoing" : "incoming") +
                          " channel of rank " + std::to_string(ep_.rank()));
    }
  };
  check(out_peers, true);
  check(in_peers, false);
  bufs_.out_peers = std::move(out_peers);
  bufs_.in_peers = std::move(in_peers);
  stage_ = 1;
}

void Communicator::init_buffers(const std::vector<std::size_t>& send_sizes,
                                const std::vector<std::size_t>& recv_sizes) {
  if (stage_ != 1) throw UsageError(stage_ == 0 ? "buffers before graph" : "communicator buffers already initialized");
  if (send_sizes.size() != bufs_.out_peers.size() || recv_sizes.size() != bufs_.in_peers.size())
    throw ConfigError("one buffer size per link is required");
  for (auto s : send_sizes) bufs_.send.emplace_back(s);
  for (auto s : recv_sizes) bufs_.recv.emplace_back(s);
  active_recv_.resize(bufs_.in_peers.size());
  inflight_.resize(bufs_.out_peers.size());
  for (std::size_t j = 0; j < bufs_.in_peers.size(); ++j) post_data_recv(j);
  stage_ = 2;
}

void Communicator::init_residual(std::size_t size, convergence::NormSpec spec) {
  if (stage_ != 2) throw UsageError(stage_ < 2 ? "residual before buffers" : "communicator already initialized");
  spec.validate();
  init_residual(size, spec, build_spanning_tree(ep_));
}

void Communicator::init_residual(std::size_t size, convergence::NormSpec spec, LocalTree tree) {
  if (stage_ != 2) throw UsageError(stage_ < 2 ? "residual before buffers" : "communicator already initialized");
  spec.validate();
  if (tree.self != ep_.rank()) throw ConfigError("spanning tree belongs to another rank");
  spec_ = spec;
  tree_ = std::move(tree);
  bufs_.residual = PayloadBuffer(size);
  stage_ = 3;
}

void Communicator::config_async(std::size_t solution_size, const bool& local_flag) {
  require_init("config_async");
  if (flag_) throw UsageError("solution already registered");
  bufs_.solution = PayloadBuffer(solution_size);
  flag_ = &local_flag;
}

void Communicator::switch_async(std::size_t max_recv_requests) {
  require_init("switch_async");
  if (!flag_) throw UsageError("switch_async requires config_async first");
  if (max_recv_requests == 0) throw UsageError("at least one receive request per link is required");
  if (scheme_ != Scheme::async) {
    if (loop_started_) throw UsageError("mode can only change before the iteration loop");
    if (!sync_sends_.empty()) throw UsageError("synchronous sends still pending");
    scheme_ = Scheme::async;
    detector_ = std::make_unique<convergence::AsyncDetector>(ep_, tree_, spec_, bufs_, *flag_);
    detector_->set_observer(observer_);
  }
  max_recv_ = std::max(max_recv_, max_recv_requests);
  for (std::size_t j = 0; j < active_recv_.size(); ++j)
    while (active_recv_[j].size() < max_recv_) post_data_recv(j);
}

void Communicator::set_sync_scheme(Scheme s) {
  require_init("set_sync_scheme");
  if (s == Scheme::async) throw UsageError("use switch_async for the asynchronous scheme");
  if (scheme_ == Scheme::async) throw UsageError("communicator is already asynchronous");
  if (loop_started_ && s != scheme_) throw UsageError("mode can only change before the iteration loop");
  scheme_ = s;
}

void Communicator::set_observer(convergence::SnapshotObserver* obs) {
  observer_ = obs;
  if (detector_) detector_->set_observer(obs);
}

bool Communicator::terminated() const noexcept { return detector_ && detector_->terminated(); }

void Communicator::post_data_recv(std::size_t j) {
  active_recv_[j].push_back(ep_.post_recv(bufs_.in_peers[j], Tag::data, bufs_.recv[j].size()));
}

// Address exchange: the delivered storage becomes the user buffer.
void Communicator::deliver(std::size_t j, Envelope& env) {
  const auto before = PayloadBuffer::element_copies();
  swap(bufs_.recv[j], env.body);
  stats_.recv_element_copies += PayloadBuffer::element_copies() - before;
  ++stats_.messages_delivered;
}

std::size_t Communicator::pending_sends(std::size_t i) {
  if (is_async()) return inflight_.at(i) && !ep_.test(*inflight_[i]) ? 1 : 0;
  std::size_t n = 0;
  for (auto r : sync_sends_)
    if (!ep_.test(r)) ++n;
  return n;
}

void Communicator::sample_budgets() {
  if (!is_async()) return;
  for (std::size_t i = 0; i < inflight_.size(); ++i)
    stats_.max_pending_sends_per_link = std::max(stats_.max_pending_sends_per_link, pending_sends(i));
  for (const auto& q : active_recv_) {
    stats_.min_active_recvs_per_link = std::min(stats_.min_active_recvs_per_link, q.size());
    stats_.max_active_recvs_per_link = std::max(stats_.max_active_recvs_per_link, q.size());
  }
}

void Communicator::recv() {
  require_init("recv");
  loop_started_ = true;
  if (is_async()) {
    sample_budgets();
    async_recv();
    sample_budgets();
  } else {
    sync_recv();
  }
}

void Communicator::sync_recv() {
  if (scheme_ == Scheme::trivial) {
    // Only posts; delivery happens in wait_completion.
    for (std::size_t j = 0; j < active_recv_.size(); ++j)
      if (active_recv_[j].empty()) post_data_recv(j);
    return;
  }
  std::vector<Request> fronts;
  for (std::size_t j = 0; j < active_recv_.size(); ++j) {
    if (active_recv_[j].empty()) post_data_recv(j);
    fronts.push_back(active_recv_[j].front());
  }
  ep_.wait_all(fronts);
  for (std::size_t j = 0; j < active_recv_.size(); ++j) {
    Envelope env = ep_.take(active_recv_[j].front());
    active_recv_[j].pop_front();
    deliver(j, env);
    post_data_recv(j);
  }
  exchange_pending_ = false;
}

void Communicator::async_recv() {
  if (detector_->begin_iteration()) return;
  for (std::size_t j = 0; j < active_recv_.size(); ++j) {
    auto& q = active_recv_[j];
    bool got = false;
    while (!q.empty() && ep_.test(q.front())) {
      Envelope env = ep_.take(q.front());
      q.pop_front();
      if (env.round < epoch_) {
        ++stats_.stale_dropped;
        continue;
      }
      if (got) ++stats_.messages_superseded;
      deliver(j, env);
      if (got) --stats_.messages_delivered;
      got = true;
    }
    while (q.size() < max_recv_) post_data_recv(j);
  }
}

void Communicator::send() {
  require_init("send");
  loop_started_ = true;
  if (is_async()) {
    sample_budgets();
    async_send();
    sample_budgets();
  } else {
    sync_send();
  }
}

void Communicator::sync_send() {
  for (std::size_t i = 0; i < bufs_.out_peers.size(); ++i) {
    Envelope env;
    env.tag = Tag::data;
    env.round = epoch_;
    env.body = PayloadBuffer::stage(bufs_.send[i].span());
    sync_sends_.push_back(ep_.post_send(bufs_.out_peers[i], std::move(env)));
    ++stats_.sends_posted;
  }
  exchange_pending_ = true;
}

void Communicator::async_send() {
  for (std::size_t i = 0; i < bufs_.out_peers.size(); ++i) {
    auto& slot = inflight_[i];
    if (slot) {
      if (!ep_.test(*slot)) {
        ++stats_.sends_discarded;
        continue;
      }
      ep_.release(*slot);
      slot.reset();
    }
    Envelope env;
    env.tag = Tag::data;
    env.round = epoch_;
    env.body = PayloadBuffer::stage(bufs_.send[i].span());
    slot = ep_.post_send(bufs_.out_peers[i], std::move(env));
    ++stats_.sends_posted;
  }
}

void Communicator::wait_completion() {
  require_init("wait_completion");
  if (is_async()) throw UsageError("wait_completion is not available in asynchronous mode");
  std::vector<Request> all = sync_sends_;
  const bool trivial = scheme_ == Scheme::trivial;
  if (trivial)
    for (const auto& q : active_recv_)
      if (!q.empty()) all.push_back(q.front());
  ep_.wait_all(all);
  for (auto r : sync_sends_) ep_.release(r);
  sync_sends_.clear();
  if (trivial) {
    bool all_links = true;
    for (std::size_t j = 0; j < active_recv_.size(); ++j) {
      if (active_recv_[j].empty()) {
        all_links = false;
        continue;
      }
      Envelope env = ep_.take(active_recv_[j].front());
      active_recv_[j].pop_front();
      deliver(j, env);
    }
    halos_current_ = all_links;
  }
}

void Communicator::update_residual() {
  require_init("update_residual");
  if (is_async()) {
    detector_->end_iteration();
    residual_norm_ = detector_->published_norm();
  } else {
    residual_norm_ = convergence::tree_norm(ep_, tree_, convergence::local_accumulate(bufs_.residual.span(), spec_),
                                            spec_, sync_round_++);
  }
}

void Communicator::begin_solve() {
  require_init("begin_solve");
  ++epoch_;
  residual_norm_ = std::numeric_limits<double>::infinity();
  if (detector_) detector_->reset_for_solve();
}

SchemeResult run_scheme(Communicator& comm, const std::function<void()>& compute, std::size_t max_iterations,
                        const std::function<bool()>& stop) {
  auto done = [&] {
    if (stop) return stop();
    return comm.is_async() ? comm.terminated() : comm.residual_norm() < comm.norm_spec().threshold;
  };
  SchemeResult res;
  if (done()) {
    res.converged = true;
    return res;
  }
  switch (comm.scheme()) {
    case Scheme::trivial:
      if (!comm.halos_current()) {
        comm.recv();
        comm.send();
        comm.wait_completion();
      }
      while (!(res.converged = done()) && res.iterations < max_iterations) {
        compute();
        comm.recv();
        comm.send();
        comm.wait_completion();
        comm.update_residual();
        ++res.iterations;
      }
      break;
    case Scheme::overlap:
      if (!comm.exchange_pending()) {
        comm.send();
        comm.wait_completion();
      }
      while (!(res.converged = done()) && res.iterations < max_iterations) {
        comm.recv();
        compute();
        comm.send();
        comm.wait_completion();
        comm.update_residual();
        ++res.iterations;
      }
      break;
    case Scheme::async:
      comm.send();
      while (!(res.converged = done()) && res.iterations < max_iterations) {
        comm.recv();
        compute();
        comm.send();
        comm.update_residual();
        ++res.iterations;
      }
      break;
  }
  return res;
}

}  // namespace itercomm::comm
