#include "itercomm/convergence/norm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "itercomm/errors.hpp"

namespace itercomm::convergence {

void NormSpec::validate() const {
  if (!std::isfinite(q)) throw ConfigError("norm type q must be finite");
  if (!(threshold > 0.0) || !std::isfinite(threshold)) throw ConfigError("threshold must be a positive number");
}

NormAccumulator NormAccumulator::neutral(const NormSpec& spec) {
  NormAccumulator a;
  a.kind = spec.is_max() ? Kind::running_max : Kind::sum_of_powers;
  return a;
}

void NormAccumulator::combine(const NormAccumulator& other) {
  if (other.kind != kind) throw ProtocolError("combining accumulators of different norm kinds");
  invalid = invalid || other.invalid;
  value = kind == Kind::running_max ? std::max(value, other.value) : value + other.value;
  contributions += other.contributions;
}

double NormAccumulator::finalize(const NormSpec& spec) const {
  if (invalid) return std::numeric_limits<double>::quiet_NaN();
  if (kind == Kind::running_max) return value;
  if (spec.q == 1.0) return value;
  if (spec.q == 2.0) return std::sqrt(value);
  return std::pow(value, 1.0 / spec.q);
}

NormAccumulator local_accumulate(std::span<const double> block, const NormSpec& spec) {
  NormAccumulator a = NormAccumulator::neutral(spec);
  a.contributions = 1;
  for (double x : block) {
    if (std::isnan(x)) {
      a.invalid = true;
      continue;
    }
    const double m = std::fabs(x);
    if (a.kind == NormAccumulator::Kind::running_max) {
      a.value = std::max(a.value, m);
    } else if (spec.q == 1.0) {
      a.value += m;
    } else if (spec.q == 2.0) {
      a.value += m * m;
    } else {
      a.value += std::pow(m, spec.q);
    }
  }
  if (a.invalid) a.value = std::numeric_limits<double>::quiet_NaN();
  return a;
}

PayloadBuffer encode_partial(const NormAccumulator& acc) {
  PayloadBuffer b(3);
  b[0] = acc.invalid ? std::numeric_limits<double>::quiet_NaN() : acc.value;
  b[1] = static_cast<double>(acc.contributions);
  b[2] = acc.invalid ? 1.0 : 0.0;
  return b;
}

NormAccumulator decode_partial(const PayloadBuffer& body, const NormSpec& spec) {
  if (body.size() != 3) throw ProtocolError("malformed norm partial");
  NormAccumulator a = NormAccumulator::neutral(spec);
  a.value = body[0];
  a.contributions = static_cast<std::size_t>(body[1]);
  a.invalid = body[2] != 0.0;
  return a;
}

double tree_norm(transport::Endpoint& ep, const LocalTree& tree, const NormAccumulator& acc, const NormSpec& spec,
                 std::uint32_t round) {
  using transport::Tag;
  NormAccumulator total = acc;
  std::vector<transport::Request> ups;
  for (Rank c : tree.children) ups.push_back(ep.post_recv(c, Tag::norm_up, 3));
  ep.wait_all(ups);
  for (auto r : ups) {
    auto env = ep.take(r);
    if (env.round != round) throw ProtocolError("norm-up from another round");
    total.combine(decode_partial(env.body, spec));
  }

  std::vector<transport::Request> sends;
  double result = 0.0;
  if (tree.is_root()) {
    result = total.finalize(spec);
  } else {
    transport::Envelope up;
    up.tag = Tag::norm_up;
    up.round = round;
    up.body = encode_partial(total);
    sends.push_back(ep.post_send(*tree.parent, std::move(up)));
    auto down = ep.post_recv(*tree.parent, Tag::norm_down, 1);
    ep.wait_all(std::span(&down, 1));
    auto env = ep.take(down);
    if (env.round != round) throw ProtocolError("norm-down from another round");
    result = env.body[0];
  }
  for (Rank c : tree.children) {
    transport::Envelope down;
    down.tag = Tag::norm_down;
    down.round = round;
    down.body = PayloadBuffer(1, result);
    sends.push_back(ep.post_send(c, std::move(down)));
  }
  ep.wait_all(sends);
  for (auto s : sends) ep.release(s);
  return result;
}

}  // namespace itercomm::convergence
