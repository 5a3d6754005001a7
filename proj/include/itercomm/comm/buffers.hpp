#pragma once

#include <vector>

#include "itercomm/payload.hpp"
#include "itercomm/topology/graph.hpp"

namespace itercomm::comm {

/// Per-link payload storage owned by a communicator. The user reads and
/// writes through spans; delivery swaps storage, it never copies elements.
struct LinkBufferSet {
  std::vector<Rank> out_peers;
  std::vector<Rank> in_peers;
  std::vector<PayloadBuffer> send;  // one per out-link
  std::vector<PayloadBuffer> recv;  // one per in-link
  PayloadBuffer residual;
  PayloadBuffer solution;
};

}  // namespace itercomm::comm
