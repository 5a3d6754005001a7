#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "itercomm/topology/graph.hpp"

namespace itercomm {

using Index3 = std::array<int, 3>;

/// Half-open box [lo, hi) of global interior grid indices.
struct Box {
  Index3 lo{};
  Index3 hi{};

  int extent(int axis) const noexcept { return hi[axis] - lo[axis]; }
  Index3 extents() const noexcept { return {extent(0), extent(1), extent(2)}; }
  std::size_t volume() const noexcept {
    return static_cast<std::size_t>(extent(0)) * extent(1) * extent(2);
  }
  bool contains(const Index3& g) const noexcept {
    for (int a = 0; a < 3; ++a) {
      if (g[a] < lo[a] || g[a] >= hi[a]) return false;
    }
    return true;
  }
};

/// Block decomposition of an nx x ny x nz interior grid over a px x py x pz
/// process grid. Rank order is x fastest: rank = ix + px * (iy + py * iz).
struct Partition3D {
  Index3 global{};
  Index3 procs{};
  std::vector<Box> boxes;

  int size() const noexcept { return static_cast<int>(boxes.size()); }
  Index3 coords_of(Rank r) const;
  Rank rank_of(const Index3& c) const;
  /// Neighbor across the face on `axis` in direction `dir` (-1 or +1).
  std::optional<Rank> face_neighbor(Rank r, int axis, int dir) const;
  Rank owner_of(const Index3& g) const;
};

/// Extents of `n` split into `parts` near-equal pieces; the first n % parts
/// pieces are one larger.
std::vector<int> balanced_split(int n, int parts);

/// Picks the process grid minimizing total interface area among all
/// factorizations of p that fit the grid (ties: larger factor on x, then y).
/// Throws InfeasibleError when p exceeds the number of grid points or no
/// factorization fits.
Partition3D build_partition(int nx, int ny, int nz, int p);

/// Face-adjacency graph of the partition (6-neighborhood), symmetric.
CommGraph partition_to_graph(const Partition3D& part);

}  // namespace itercomm
