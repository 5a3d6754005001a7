#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "itercomm/topology/spanning_tree.hpp"
#include "itercomm/transport/endpoint.hpp"

namespace itercomm::convergence {

/// Norm selector plus stopping threshold. q >= 1 selects the q-norm,
/// q < 1 the maximum norm.
struct NormSpec {
  double q = 0.5;
  double threshold = 1e-6;

  bool is_max() const noexcept { return q < 1.0; }
  /// Throws ConfigError unless threshold > 0 and q is finite.
  void validate() const;
};

/// Partial reduction of a distributed vector: sum of |x_i|^q, or running
/// max of |x_i|. Combining is associative and commutative.
struct NormAccumulator {
  enum class Kind : std::uint8_t { sum_of_powers, running_max };

  Kind kind = Kind::running_max;
  double value = 0.0;
  std::size_t contributions = 0;
  bool invalid = false;  // a NaN was seen

  static NormAccumulator neutral(const NormSpec& spec);
  void combine(const NormAccumulator& other);
  /// q-th root for q-norms, identity for the max norm.
  double finalize(const NormSpec& spec) const;
};

NormAccumulator local_accumulate(std::span<const double> block, const NormSpec& spec);

inline double local_norm(std::span<const double> block, const NormSpec& spec) {
  return local_accumulate(block, spec).finalize(spec);
}

/// Blocking convergecast of `acc` to the tree root followed by a broadcast
/// of the finalized norm. Every rank returns the same value. `round` is
/// carried in the message bodies and must agree across ranks.
double tree_norm(transport::Endpoint& ep, const LocalTree& tree, const NormAccumulator& acc, const NormSpec& spec,
                 std::uint32_t round = 0);

/// Encodings shared by the blocking and the non-blocking reductions.
PayloadBuffer encode_partial(const NormAccumulator& acc);
NormAccumulator decode_partial(const PayloadBuffer& body, const NormSpec& spec);

}  // namespace itercomm::convergence
