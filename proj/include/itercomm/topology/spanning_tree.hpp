#pragma once

#include <optional>
#include <string>
#include <vector>

#include "itercomm/topology/graph.hpp"
#include "itercomm/transport/endpoint.hpp"

namespace itercomm {

/// What one rank knows about the spanning tree: its parent and children.
struct LocalTree {
  Rank self = 0;
  Rank root = 0;
  std::optional<Rank> parent;
  std::vector<Rank> children;

  bool is_root() const noexcept { return !parent.has_value(); }
  bool is_leaf() const noexcept { return children.empty(); }
};

/// Global view, assembled from every rank's LocalTree.
struct SpanningTree {
  Rank root = 0;
  std::vector<std::optional<Rank>> parent;
  std::vector<std::vector<Rank>> children;

  static SpanningTree assemble(const std::vector<LocalTree>& locals);
  /// Empty string when this is a spanning tree of `g` rooted at `root`
  /// (p-1 edges, all ranks reached, edges in g, parent/children agree).
  std::string check(const CommGraph& g) const;
  /// Local knowledge of rank `r`.
  LocalTree local(Rank r) const;
};

/// Distributed flooding from rank 0 over control-tagged messages. Every
/// non-root adopts the lowest-ranked inviter among the invitations it holds
/// when it first wakes, accepts it, and invites all other neighbors; it then
/// collects exactly one message from each neighbor, and those that accepted
/// become its children. Requires a symmetric graph. Call on every rank; on
/// a disconnected graph unreachable ranks never terminate (the simulator
/// reports ProtocolDeadlock).
LocalTree build_spanning_tree(transport::Endpoint& ep);

}  // namespace itercomm
