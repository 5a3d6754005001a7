#include "itercomm/topology/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <string>

#include "itercomm/errors.hpp"

namespace itercomm {

CommGraph CommGraph::undirected(int p, const std::vector<std::pair<Rank, Rank>>& edges) {
  CommGraph g(p);
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= p || b >= p) {
      throw ConfigError("edge (" + std::to_string(a) + "," + std::to_string(b) + ") names a rank outside 0.." +
                        std::to_string(p - 1));
    }
    g.out[a].push_back(b);
    g.in[b].push_back(a);
    g.out[b].push_back(a);
    g.in[a].push_back(b);
  }
  for (auto* lists : {&g.out, &g.in}) {
    for (auto& l : *lists) {
      std::sort(l.begin(), l.end());
      l.erase(std::unique(l.begin(), l.end()), l.end());
    }
  }
  return g;
}

bool CommGraph::has_edge(Rank from, Rank to) const {
  if (from < 0 || from >= size()) return false;
  const auto& l = out[from];
  return std::find(l.begin(), l.end(), to) != l.end();
}

std::size_t CommGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& l : out) n += l.size();
  return n;
}

bool CommGraph::symmetric() const {
  for (Rank i = 0; i < size(); ++i) {
    for (Rank j : out[i]) {
      if (!has_edge(j, i)) return false;
    }
  }
  return true;
}

bool CommGraph::connected() const {
  if (size() == 0) return true;
  std::vector<bool> seen(out.size(), false);
  std::queue<Rank> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    Rank r = q.front();
    q.pop();
    for (Rank n : out[r]) {
      if (!seen[n]) {
        seen[n] = true;
        ++count;
        q.push(n);
      }
    }
  }
  return count == out.size();
}

void CommGraph::validate() const {
  const int p = size();
  if (static_cast<int>(in.size()) != p) throw ConfigError("graph out/in list counts differ");
  auto check_list = [p](Rank self, const std::vector<Rank>& l, const char* what) {
    std::set<Rank> seen;
    for (Rank r : l) {
      if (r < 0 || r >= p) {
        throw ConfigError("rank " + std::to_string(self) + " lists " + what + " neighbor " + std::to_string(r) +
                          " outside 0.." + std::to_string(p - 1));
      }
      if (r == self) throw ConfigError("rank " + std::to_string(self) + " lists itself as a neighbor");
      if (!seen.insert(r).second) {
        throw ConfigError("rank " + std::to_string(self) + " lists " + what + " neighbor " + std::to_string(r) +
                          " twice");
      }
    }
  };
  for (Rank i = 0; i < p; ++i) {
    check_list(i, out[i], "outgoing");
    check_list(i, in[i], "incoming");
  }
  for (Rank i = 0; i < p; ++i) {
    for (Rank j : out[i]) {
      if (std::find(in[j].begin(), in[j].end(), i) == in[j].end()) {
        throw ConfigError("edge " + std::to_string(i) + "->" + std::to_string(j) + " missing from in-list of " +
                          std::to_string(j));
      }
    }
    for (Rank j : in[i]) {
      if (std::find(out[j].begin(), out[j].end(), i) == out[j].end()) {
        throw ConfigError("edge " + std::to_string(j) + "->" + std::to_string(i) + " missing from out-list of " +
                          std::to_string(j));
      }
    }
  }
}

}  // namespace itercomm
