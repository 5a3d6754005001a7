#include "itercomm/convergence/snapshot.hpp"

#include <algorithm>
#include <cmath>

#include "itercomm/errors.hpp"

namespace itercomm::convergence {

using transport::Envelope;
using transport::Request;
using transport::Tag;

AsyncDetector::AsyncDetector(transport::Endpoint& ep, LocalTree tree, NormSpec spec, comm::LinkBufferSet& bufs,
                             const bool& local_flag)
    : ep_(ep), tree_(std::move(tree)), spec_(spec), bufs_(bufs), flag_(local_flag) {
  const auto nc = tree_.children.size();
  child_notified_.assign(nc, false);
  child_partial_.assign(nc, false);
  partial_ = NormAccumulator::neutral(spec_);
  ss_send_.resize(bufs_.out_peers.size());
  ss_recv_.resize(bufs_.in_peers.size());
  ss_recorded_.assign(bufs_.in_peers.size(), false);

  for (Rank c : tree_.children) {
    conv_reqs_.push_back(ep_.post_recv(c, Tag::local_conv, 0));
    up_reqs_.push_back(ep_.post_recv(c, Tag::norm_up, 3));
  }
  for (std::size_t j = 0; j < bufs_.in_peers.size(); ++j)
    snap_reqs_.push_back(ep_.post_recv(bufs_.in_peers[j], Tag::snapshot_data, bufs_.recv[j].size()));
  if (tree_.parent) {
    down_req_ = ep_.post_recv(*tree_.parent, Tag::norm_down, 1);
    term_req_ = ep_.post_recv(*tree_.parent, Tag::terminate, 1);
  }
}

AsyncDetector::Phase AsyncDetector::phase() const noexcept {
  if (done_) return Phase::terminated;
  if (evaluated_) return Phase::reducing;
  if (eval_pending_) return Phase::evaluating;
  if (frozen_ || ss_seen_) return Phase::snapshotting;
  if (notified_) return Phase::coordinated;
  return Phase::iterating;
}

bool AsyncDetector::snapshot_complete() const noexcept {
  return frozen_ && std::all_of(ss_recorded_.begin(), ss_recorded_.end(), [](bool b) { return b; });
}

std::size_t AsyncDetector::children_notified() const noexcept {
  return static_cast<std::size_t>(std::count(child_notified_.begin(), child_notified_.end(), true));
}

bool AsyncDetector::begin_iteration() {
  progress();
  if (done_ || eval_pending_ || evaluated_ || !snapshot_complete()) return false;
  swap(bufs_.solution, ss_sol_);
  for (std::size_t j = 0; j < ss_recv_.size(); ++j) swap(bufs_.recv[j], ss_recv_[j]);
  eval_pending_ = true;
  return true;
}

void AsyncDetector::end_iteration() {
  if (eval_pending_) {
    partial_.combine(local_accumulate(bufs_.residual.span(), spec_));
    candidate_ = PayloadBuffer::stage(bufs_.solution.span());
    for (std::size_t j = 0; j < ss_recv_.size(); ++j) swap(bufs_.recv[j], ss_recv_[j]);
    eval_pending_ = false;
    evaluated_ = true;
  }
  progress();
}

void AsyncDetector::reset_for_solve() {
  done_ = false;
  published_ = std::numeric_limits<double>::infinity();
}

void AsyncDetector::progress() {
  reap_sends();
  poll_children_notifications();
  poll_snapshot_messages();
  poll_children_partials();
  poll_parent_outcome();
  if (done_) return;
  coordinate();
  if (!tree_.is_root() && !frozen_ && ss_seen_ && flag_) freeze_and_forward();
  try_reduce();
}

void AsyncDetector::reap_sends() {
  std::erase_if(sends_, [&](Request r) {
    if (!ep_.test(r)) return false;
    ep_.release(r);
    return true;
  });
}

// True when the message belongs to the current round; counts the rest.
bool AsyncDetector::classify(std::uint32_t msg_round) {
  if (msg_round == round_) return true;
  if (msg_round < round_)
    ++stats_.stale_messages;
  else
    ++stats_.future_messages;
  return false;
}

void AsyncDetector::poll_children_notifications() {
  for (std::size_t c = 0; c < conv_reqs_.size(); ++c) {
    while (ep_.test(conv_reqs_[c])) {
      Envelope env = ep_.take(conv_reqs_[c]);
      conv_reqs_[c] = ep_.post_recv(tree_.children[c], Tag::local_conv, 0);
      if (classify(env.round)) child_notified_[c] = true;
    }
  }
}

void AsyncDetector::poll_snapshot_messages() {
  for (std::size_t j = 0; j < snap_reqs_.size(); ++j) {
    while (ep_.test(snap_reqs_[j])) {
      Envelope env = ep_.take(snap_reqs_[j]);
      snap_reqs_[j] = ep_.post_recv(bufs_.in_peers[j], Tag::snapshot_data, bufs_.recv[j].size());
      if (!classify(env.round)) continue;
      if (ss_recorded_[j]) throw ProtocolError("duplicate snapshot message on one link in one round");
      ss_recv_[j] = std::move(env.body);
      ss_recorded_[j] = true;
      ss_seen_ = true;
      if (observer_) observer_->on_record(ep_.rank(), round_, bufs_.in_peers[j], ss_recv_[j].span());
    }
  }
}

void AsyncDetector::poll_children_partials() {
  for (std::size_t c = 0; c < up_reqs_.size(); ++c) {
    while (ep_.test(up_reqs_[c])) {
      Envelope env = ep_.take(up_reqs_[c]);
      up_reqs_[c] = ep_.post_recv(tree_.children[c], Tag::norm_up, 3);
      if (!classify(env.round)) continue;
      if (child_partial_[c]) throw ProtocolError("duplicate norm partial from one child");
      partial_.combine(decode_partial(env.body, spec_));
      child_partial_[c] = true;
    }
  }
}

void AsyncDetector::poll_parent_outcome() {
  if (!tree_.parent) return;
  for (Tag tag : {Tag::norm_down, Tag::terminate}) {
    Request& req = tag == Tag::terminate ? term_req_ : down_req_;
    while (ep_.test(req)) {
      Envelope env = ep_.take(req);
      req = ep_.post_recv(*tree_.parent, tag, 1);
      if (!classify(env.round)) continue;
      const double norm = env.body[0];
      for (Rank c : tree_.children) send_to(c, tag, PayloadBuffer(1, norm));
      apply_outcome(norm, tag == Tag::terminate);
    }
  }
}

void AsyncDetector::coordinate() {
  if (notified_ || !flag_) return;
  if (!std::all_of(child_notified_.begin(), child_notified_.end(), [](bool b) { return b; })) return;
  notified_ = true;
  ++stats_.notifications;
  if (observer_) observer_->on_notify(ep_.rank(), round_);
  if (tree_.is_root())
    freeze_and_forward();
  else
    send_to(*tree_.parent, Tag::local_conv, PayloadBuffer());
}

void AsyncDetector::freeze_and_forward() {
  if (frozen_) return;
  frozen_ = true;
  ss_sol_ = PayloadBuffer::stage(bufs_.solution.span());
  for (std::size_t i = 0; i < bufs_.out_peers.size(); ++i) {
    ss_send_[i] = PayloadBuffer::stage(bufs_.send[i].span());
    if (observer_) observer_->on_freeze(ep_.rank(), round_, bufs_.out_peers[i], ss_send_[i].span());
    send_to(bufs_.out_peers[i], Tag::snapshot_data, PayloadBuffer::stage(ss_send_[i].span()));
    ++stats_.snapshot_messages_sent;
  }
}

void AsyncDetector::try_reduce() {
  if (!evaluated_ || sent_up_) return;
  if (!std::all_of(child_partial_.begin(), child_partial_.end(), [](bool b) { return b; })) return;
  sent_up_ = true;
  if (!tree_.is_root()) {
    send_to(*tree_.parent, Tag::norm_up, encode_partial(partial_));
    return;
  }
  const double norm = partial_.finalize(spec_);
  const bool detected = norm < spec_.threshold;  // false for NaN
  const Tag tag = detected ? Tag::terminate : Tag::norm_down;
  for (Rank c : tree_.children) send_to(c, tag, PayloadBuffer(1, norm));
  apply_outcome(norm, detected);
}

void AsyncDetector::apply_outcome(double norm, bool detected) {
  if (!evaluated_) throw ProtocolError("round outcome before local snapshot evaluation");
  ++stats_.rounds_evaluated;
  if (observer_) observer_->on_outcome(ep_.rank(), round_, norm, detected);
  published_ = norm;
  if (detected) {
    done_ = true;
    swap(bufs_.solution, candidate_);
  } else {
    ++stats_.rounds_failed;
  }
  ++round_;
  std::fill(child_notified_.begin(), child_notified_.end(), false);
  std::fill(child_partial_.begin(), child_partial_.end(), false);
  std::fill(ss_recorded_.begin(), ss_recorded_.end(), false);
  notified_ = frozen_ = ss_seen_ = false;
  eval_pending_ = evaluated_ = sent_up_ = false;
  partial_ = NormAccumulator::neutral(spec_);
  candidate_ = PayloadBuffer();
  ss_sol_ = PayloadBuffer();
}

void AsyncDetector::send_to(Rank peer, Tag tag, PayloadBuffer body) {
  Envelope env;
  env.tag = tag;
  env.round = round_;
  env.body = std::move(body);
  sends_.push_back(ep_.post_send(peer, std::move(env)));
}

}  // namespace itercomm::convergence
