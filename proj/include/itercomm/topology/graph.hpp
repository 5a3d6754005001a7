#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace itercomm {

using Rank = int;

/// Directed logical network: per-rank outgoing and incoming neighbor lists.
struct CommGraph {
  std::vector<std::vector<Rank>> out;  // sneighb_rank per rank
  std::vector<std::vector<Rank>> in;   // rneighb_rank per rank

  CommGraph() = default;
  explicit CommGraph(int p) : out(static_cast<std::size_t>(p)), in(static_cast<std::size_t>(p)) {}

  /// Builds a symmetric graph from undirected edges. Lists come out sorted.
  static CommGraph undirected(int p, const std::vector<std::pair<Rank, Rank>>& edges);

  int size() const noexcept { return static_cast<int>(out.size()); }
  bool has_edge(Rank from, Rank to) const;
  std::size_t edge_count() const;
  bool symmetric() const;
  bool connected() const;

  /// Throws ConfigError on self loops, out-of-range ranks, duplicates, or
  /// out/in lists that disagree (j in out(i) iff i in in(j)).
  void validate() const;

  bool operator==(const CommGraph&) const = default;
};

}  // namespace itercomm
