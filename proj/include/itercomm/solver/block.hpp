#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "itercomm/topology/partition.hpp"

namespace itercomm::solver {

/// A face shared with a neighbor rank. `link` is the index of the peer in
/// the sorted neighbor list, which is also the communicator link index.
struct FaceLink {
  int face = 0;
  Rank peer = -1;
  std::size_t link = 0;
  std::size_t size = 0;
};

/// Geometry of one rank's sub-box: owned cells (x fastest) and faces.
class LocalBlock {
 public:
  LocalBlock(const Partition3D& part, Rank rank);

  const Box& box() const noexcept { return box_; }
  const std::array<int, 3>& extents() const noexcept { return ext_; }
  std::size_t cells() const noexcept { return box_.volume(); }
  const std::vector<FaceLink>& faces() const noexcept { return faces_; }
  const std::vector<Rank>& peers() const noexcept { return peers_; }
  std::vector<std::size_t> link_sizes() const;

  /// Copies the boundary layer of `u` on `face` into `out`, in the order
  /// the neighbor reads it as a halo.
  void pack(int face, std::span<const double> u, std::span<double> out) const;

  void scatter(std::span<const double> block, std::span<double> global, int n) const;
  std::vector<double> gather(std::span<const double> global, int n) const;

 private:
  Box box_;
  std::array<int, 3> ext_{};
  std::vector<FaceLink> faces_;
  std::vector<Rank> peers_;
};

}  // namespace itercomm::solver
