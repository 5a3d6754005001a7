#include "itercomm/solver/block.hpp"

#include <algorithm>

#include "itercomm/errors.hpp"
#include "itercomm/solver/problem.hpp"

namespace itercomm::solver {

LocalBlock::LocalBlock(const Partition3D& part, Rank rank) : box_(part.boxes.at(rank)), ext_(box_.extents()) {
  for (int axis = 0; axis < 3; ++axis)
    for (int dir : {-1, 1})
      if (auto nb = part.face_neighbor(rank, axis, dir)) {
        FaceLink f;
        f.face = face_id(axis, dir);
        f.peer = *nb;
        f.size = box_.volume() / static_cast<std::size_t>(ext_[axis]);
        faces_.push_back(f);
      }
  std::sort(faces_.begin(), faces_.end(), [](const FaceLink& a, const FaceLink& b) { return a.peer < b.peer; });
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    faces_[i].link = i;
    peers_.push_back(faces_[i].peer);
  }
}

std::vector<std::size_t> LocalBlock::link_sizes() const {
  std::vector<std::size_t> s;
  for (const auto& f : faces_) s.push_back(f.size);
  return s;
}

void LocalBlock::pack(int face, std::span<const double> u, std::span<double> out) const {
  const int axis = face / 2;
  const int layer = face % 2 == 0 ? 0 : ext_[axis] - 1;
  const int ex = ext_[0], ey = ext_[1], ez = ext_[2];
  auto at = [&](int i, int j, int k) { return u[i + static_cast<std::size_t>(ex) * (j + static_cast<std::size_t>(ey) * k)]; };
  std::size_t o = 0;
  if (out.size() != cells() / static_cast<std::size_t>(ext_[axis])) throw UsageError("face buffer size mismatch");
  switch (axis) {
    case 0:
      for (int k = 0; k < ez; ++k)
        for (int j = 0; j < ey; ++j) out[o++] = at(layer, j, k);
      break;
    case 1:
      for (int k = 0; k < ez; ++k)
        for (int i = 0; i < ex; ++i) out[o++] = at(i, layer, k);
      break;
    default:
      for (int j = 0; j < ey; ++j)
        for (int i = 0; i < ex; ++i) out[o++] = at(i, j, layer);
  }
}

void LocalBlock::scatter(std::span<const double> block, std::span<double> global, int n) const {
  std::size_t o = 0;
  for (int k = box_.lo[2]; k < box_.hi[2]; ++k)
    for (int j = box_.lo[1]; j < box_.hi[1]; ++j)
      for (int i = box_.lo[0]; i < box_.hi[0]; ++i)
        global[i + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(n) * k)] = block[o++];
}

std::vector<double> LocalBlock::gather(std::span<const double> global, int n) const {
  std::vector<double> out;
  out.reserve(cells());
  for (int k = box_.lo[2]; k < box_.hi[2]; ++k)
    for (int j = box_.lo[1]; j < box_.hi[1]; ++j)
      for (int i = box_.lo[0]; i < box_.hi[0]; ++i)
        out.push_back(global[i + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(n) * k)]);
  return out;
}

}  // namespace itercomm::solver
