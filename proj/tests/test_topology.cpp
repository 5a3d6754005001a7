#include <algorithm>
#include <queue>
#include <random>

#include "doctest.h"
#include "itercomm/errors.hpp"
#include "itercomm/topology/partition.hpp"
#include "itercomm/topology/spanning_tree.hpp"
#include "itercomm/transport/sim.hpp"

using namespace itercomm;
using transport::DelayModel;
using transport::SimWorld;

namespace {

// Two boxes share a face iff they touch along one axis and overlap with
// positive area on the other two.
bool boxes_share_face(const Box& a, const Box& b) {
  for (int axis = 0; axis < 3; ++axis) {
    if (a.hi[axis] != b.lo[axis] && b.hi[axis] != a.lo[axis]) continue;
    bool overlap = true;
    for (int o = 0; o < 3; ++o) {
      if (o == axis) continue;
      if (std::min(a.hi[o], b.hi[o]) - std::max(a.lo[o], b.lo[o]) <= 0) overlap = false;
    }
    if (overlap) return true;
  }
  return false;
}

// Sequential BFS; among parents at the same depth the lowest rank wins.
std::vector<std::optional<Rank>> bfs_parents(const CommGraph& g) {
  std::vector<int> depth(g.size(), -1);
  std::vector<std::optional<Rank>> parent(g.size());
  depth[0] = 0;
  std::vector<Rank> frontier{0};
  while (!frontier.empty()) {
    std::vector<Rank> next;
    std::sort(frontier.begin(), frontier.end());
    for (Rank u : frontier) {
      for (Rank v : g.out[u]) {
        if (depth[v] == -1) {
          depth[v] = depth[u] + 1;
          parent[v] = u;
          next.push_back(v);
        } else if (depth[v] == depth[u] + 1 && u < *parent[v]) {
          parent[v] = u;
        }
      }
    }
    frontier = std::move(next);
  }
  return parent;
}

SpanningTree run_tree(const CommGraph& g, DelayModel delays = {}) {
  SimWorld world(g, delays);
  std::vector<LocalTree> locals(g.size());
  world.run([&](transport::Endpoint& ep) { locals[ep.rank()] = build_spanning_tree(ep); });
  return SpanningTree::assemble(locals);
}

CommGraph random_connected(int p, std::mt19937_64& rng) {
  std::vector<std::pair<Rank, Rank>> edges;
  for (Rank r = 1; r < p; ++r) edges.emplace_back(static_cast<Rank>(rng() % r), r);
  const int extra = static_cast<int>(rng() % (2 * p + 1));
  for (int e = 0; e < extra; ++e) {
    Rank a = static_cast<Rank>(rng() % p), b = static_cast<Rank>(rng() % p);
    if (a != b) edges.emplace_back(a, b);
  }
  return CommGraph::undirected(p, edges);
}

}  // namespace

TEST_CASE("partition: exact and remainder splits") {
  auto part = build_partition(4, 4, 4, 8);
  CHECK(part.procs == Index3{2, 2, 2});
  for (const auto& b : part.boxes) CHECK(b.extents() == Index3{2, 2, 2});

  auto two = build_partition(5, 4, 4, 2);
  CHECK(two.procs == Index3{2, 1, 1});
  CHECK(two.boxes[0].extent(0) == 3);
  CHECK(two.boxes[1].extent(0) == 2);

  CHECK(balanced_split(7, 3) == std::vector<int>{3, 2, 2});
}

TEST_CASE("partition: 16 sub-domains on a cube pick the minimal-surface grid") {
  // Oracle: enumerate every ordered triple with product 16 and keep the one
  // with the smallest interface area, ties to the larger x then y factor.
  const int n = 12;
  Index3 best{};
  long long best_area = -1;
  for (int a = 1; a <= 16; ++a) {
    for (int b = 1; b <= 16; ++b) {
      for (int c = 1; c <= 16; ++c) {
        if (a * b * c != 16) continue;
        const long long area = static_cast<long long>(a - 1 + b - 1 + c - 1) * n * n;
        if (best_area < 0 || area < best_area || (area == best_area && Index3{a, b, c} > best)) {
          best = {a, b, c};
          best_area = area;
        }
      }
    }
  }
  CHECK(best == Index3{4, 2, 2});
  CHECK(build_partition(n, n, n, 16).procs == best);
}

TEST_CASE("partition: infeasible requests") {
  CHECK_THROWS_AS(build_partition(2, 2, 2, 9), InfeasibleError);
  CHECK_THROWS_AS(build_partition(4, 4, 4, 7), InfeasibleError);
  CHECK_THROWS_AS(build_partition(4, 4, 4, 0), InfeasibleError);
}

TEST_CASE("partition property: boxes tile the grid and stay balanced") {
  for (int nx = 1; nx <= 6; ++nx) {
    for (int ny = 1; ny <= 6; ++ny) {
      for (int nz = 1; nz <= 6; nz += 2) {
        for (int p = 1; p <= 27 && p <= nx * ny * nz; ++p) {
          Partition3D part;
          try {
            part = build_partition(nx, ny, nz, p);
          } catch (const InfeasibleError&) {
            continue;
          }
          REQUIRE(part.size() == p);
          std::vector<int> owners(nx * ny * nz, 0);
          for (const auto& b : part.boxes) {
            for (int k = b.lo[2]; k < b.hi[2]; ++k)
              for (int j = b.lo[1]; j < b.hi[1]; ++j)
                for (int i = b.lo[0]; i < b.hi[0]; ++i) ++owners[i + nx * (j + ny * k)];
          }
          CHECK(std::all_of(owners.begin(), owners.end(), [](int c) { return c == 1; }));
          for (int a = 0; a < 3; ++a) {
            int lo = 1 << 30, hi = 0;
            for (const auto& b : part.boxes) {
              lo = std::min(lo, b.extent(a));
              hi = std::max(hi, b.extent(a));
            }
            CHECK(hi - lo <= 1);
          }

          const CommGraph g = partition_to_graph(part);
          CHECK(g.symmetric());
          for (Rank r = 0; r < p; ++r) {
            for (Rank s = 0; s < p; ++s) {
              if (r != s) CHECK(g.has_edge(r, s) == boxes_share_face(part.boxes[r], part.boxes[s]));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("partition_to_graph: neighbor counts") {
  const auto g2 = partition_to_graph(build_partition(4, 2, 2, 2));
  CHECK(g2.out[0].size() == 1);
  CHECK(g2.out[1].size() == 1);

  const auto g8 = partition_to_graph(build_partition(4, 4, 4, 8));
  for (Rank r = 0; r < 8; ++r) CHECK(g8.out[r].size() == 3);

  const auto part = build_partition(8, 8, 8, 16);
  REQUIRE(part.procs == Index3{4, 2, 2});
  const auto g16 = partition_to_graph(part);
  for (Rank r = 0; r < 16; ++r) {
    const int ix = part.coords_of(r)[0];
    std::size_t brute = 0;
    for (Rank s = 0; s < 16; ++s) brute += (s != r && boxes_share_face(part.boxes[r], part.boxes[s])) ? 1 : 0;
    CHECK(g16.out[r].size() == brute);
    if (ix == 1 || ix == 2) CHECK(brute == 4);
  }
}

TEST_CASE("spanning tree: line and star") {
  auto line = run_tree(CommGraph::undirected(3, {{0, 1}, {1, 2}}));
  CHECK(line.check(CommGraph::undirected(3, {{0, 1}, {1, 2}})).empty());
  CHECK(line.parent[1] == 0);
  CHECK(line.parent[2] == 1);
  CHECK_FALSE(line.parent[0].has_value());

  const auto star = CommGraph::undirected(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  auto t = run_tree(star);
  CHECK(t.children[0] == std::vector<Rank>{1, 2, 3, 4});

  auto single = run_tree(CommGraph(1));
  CHECK(single.check(CommGraph(1)).empty());
}

TEST_CASE("spanning tree: 2x2 grid with zero delay matches BFS") {
  const auto g = CommGraph::undirected(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  DelayModel zero;
  zero.base_latency = 0.0;
  auto t = run_tree(g, zero);
  CHECK(t.check(g).empty());
  CHECK(t.parent == bfs_parents(g));
  CHECK(t.parent[3] == 1);
}

TEST_CASE("spanning tree property: BFS under uniform latency, valid under jitter") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const int p = 1 + static_cast<int>(rng() % 16);
    const auto g = random_connected(p, rng);
    auto uniform = run_tree(g);
    CHECK(uniform.check(g).empty());
    CHECK(uniform.parent == bfs_parents(g));

    DelayModel jitter;
    jitter.jitter = 3.0;
    jitter.seed = rng();
    auto t = run_tree(g, jitter);
    CHECK(t.check(g).empty());
  }
  const auto grid = partition_to_graph(build_partition(6, 6, 6, 27));
  CHECK(run_tree(grid).check(grid).empty());
}

TEST_CASE("spanning tree: disconnected graph fails") {
  const auto g = CommGraph::undirected(4, {{0, 1}, {2, 3}});
  CHECK_THROWS_AS(run_tree(g), ProtocolDeadlock);
}
