#include "itercomm/topology/partition.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "itercomm/errors.hpp"

namespace itercomm {

std::vector<int> balanced_split(int n, int parts) {
  std::vector<int> ext(parts, n / parts);
  for (int i = 0; i < n % parts; ++i) ++ext[i];
  return ext;
}

Index3 Partition3D::coords_of(Rank r) const {
  return {r % procs[0], (r / procs[0]) % procs[1], r / (procs[0] * procs[1])};
}

Rank Partition3D::rank_of(const Index3& c) const { return c[0] + procs[0] * (c[1] + procs[1] * c[2]); }

std::optional<Rank> Partition3D::face_neighbor(Rank r, int axis, int dir) const {
  Index3 c = coords_of(r);
  c[axis] += dir;
  if (c[axis] < 0 || c[axis] >= procs[axis]) return std::nullopt;
  return rank_of(c);
}

Rank Partition3D::owner_of(const Index3& g) const {
  for (Rank r = 0; r < size(); ++r) {
    if (boxes[r].contains(g)) return r;
  }
  throw UsageError("grid point outside the partitioned domain");
}

Partition3D build_partition(int nx, int ny, int nz, int p) {
  if (nx < 1 || ny < 1 || nz < 1 || p < 1) throw InfeasibleError("grid sizes and process count must be positive");
  const long long points = static_cast<long long>(nx) * ny * nz;
  if (p > points) {
    throw InfeasibleError(std::to_string(p) + " processes exceed the " + std::to_string(points) + " grid points");
  }
  const Index3 n{nx, ny, nz};
  std::optional<Index3> best;
  long long best_area = 0;
  for (int px = 1; px <= p; ++px) {
    if (p % px) continue;
    for (int py = 1; py <= p / px; ++py) {
      if ((p / px) % py) continue;
      const int pz = p / px / py;
      const Index3 g{px, py, pz};
      if (px > nx || py > ny || pz > nz) continue;
      const long long area = static_cast<long long>(px - 1) * ny * nz + static_cast<long long>(py - 1) * nx * nz +
                             static_cast<long long>(pz - 1) * nx * ny;
      if (!best || area < best_area || (area == best_area && g > *best)) {
        best = g;
        best_area = area;
      }
    }
  }
  if (!best) {
    throw InfeasibleError("no factorization of " + std::to_string(p) + " fits a " + std::to_string(nx) + "x" +
                          std::to_string(ny) + "x" + std::to_string(nz) + " grid");
  }

  Partition3D part;
  part.global = n;
  part.procs = *best;
  std::array<std::vector<int>, 3> offsets;
  for (int a = 0; a < 3; ++a) {
    const auto ext = balanced_split(n[a], part.procs[a]);
    offsets[a].assign(1, 0);
    for (int e : ext) offsets[a].push_back(offsets[a].back() + e);
  }
  part.boxes.resize(p);
  for (Rank r = 0; r < p; ++r) {
    const Index3 c = part.coords_of(r);
    for (int a = 0; a < 3; ++a) {
      part.boxes[r].lo[a] = offsets[a][c[a]];
      part.boxes[r].hi[a] = offsets[a][c[a] + 1];
    }
  }
  return part;
}

CommGraph partition_to_graph(const Partition3D& part) {
  std::vector<std::pair<Rank, Rank>> edges;
  for (Rank r = 0; r < part.size(); ++r) {
    for (int a = 0; a < 3; ++a) {
      if (auto nb = part.face_neighbor(r, a, +1)) edges.emplace_back(r, *nb);
    }
  }
  return CommGraph::undirected(part.size(), edges);
}

}  // namespace itercomm
