#include "itercomm/topology/spanning_tree.hpp"

#include <algorithm>
#include <queue>

#include "itercomm/errors.hpp"

namespace itercomm {

namespace {
constexpr double kInvite = 1.0;
constexpr double kAccept = 2.0;

transport::Envelope control(double kind) {
  transport::Envelope e;
  e.tag = transport::Tag::control;
  e.body = PayloadBuffer(1, kind);
  return e;
}
}  // namespace

LocalTree build_spanning_tree(transport::Endpoint& ep) {
  auto in = ep.in_peers();
  auto out = ep.out_peers();
  std::sort(in.begin(), in.end());
  std::sort(out.begin(), out.end());
  if (in != out) throw ConfigError("spanning tree construction needs a symmetric graph");

  LocalTree tree;
  tree.self = ep.rank();
  tree.root = 0;
  const auto& nbrs = ep.in_peers();
  std::vector<transport::Request> recvs;
  for (Rank n : nbrs) recvs.push_back(ep.post_recv(n, transport::Tag::control, 1));
  std::vector<bool> heard(nbrs.size(), false);

  if (ep.rank() != tree.root) {
    ep.wait_any(recvs);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      if (!ep.test(recvs[i])) continue;
      heard[i] = true;
      const auto env = ep.take(recvs[i]);
      if (env.body[0] != kInvite) throw ProtocolError("spanning tree: acceptance from a rank never invited");
      if (!tree.parent || nbrs[i] < *tree.parent) tree.parent = nbrs[i];
    }
  }

  std::vector<transport::Request> sends;
  for (Rank n : ep.out_peers()) sends.push_back(ep.post_send(n, control(tree.parent == n ? kAccept : kInvite)));

  std::vector<transport::Request> rest;
  std::vector<Rank> rest_from;
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    if (!heard[i]) {
      rest.push_back(recvs[i]);
      rest_from.push_back(nbrs[i]);
    }
  }
  ep.wait_all(rest);
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (ep.take(rest[i]).body[0] == kAccept) tree.children.push_back(rest_from[i]);
  }
  ep.wait_all(sends);
  for (auto s : sends) ep.release(s);
  std::sort(tree.children.begin(), tree.children.end());
  return tree;
}

SpanningTree SpanningTree::assemble(const std::vector<LocalTree>& locals) {
  SpanningTree t;
  t.root = locals.empty() ? 0 : locals.front().root;
  t.parent.resize(locals.size());
  t.children.resize(locals.size());
  for (const auto& l : locals) {
    t.parent.at(l.self) = l.parent;
    t.children.at(l.self) = l.children;
  }
  return t;
}

LocalTree SpanningTree::local(Rank r) const {
  return {r, root, parent.at(r), children.at(r)};
}

std::string SpanningTree::check(const CommGraph& g) const {
  const int p = g.size();
  if (static_cast<int>(parent.size()) != p) return "tree size differs from graph size";
  int roots = 0;
  std::size_t edges = 0;
  for (Rank r = 0; r < p; ++r) {
    if (!parent[r]) {
      ++roots;
      if (r != root) return "rank " + std::to_string(r) + " has no parent but is not the root";
      continue;
    }
    ++edges;
    const Rank q = *parent[r];
    if (!g.has_edge(r, q) || !g.has_edge(q, r)) return "tree edge " + std::to_string(r) + "-" + std::to_string(q) + " not in graph";
    const auto& ch = children.at(q);
    if (std::find(ch.begin(), ch.end(), r) == ch.end()) {
      return "rank " + std::to_string(q) + " does not list child " + std::to_string(r);
    }
  }
  if (roots != 1) return "expected exactly one root, found " + std::to_string(roots);
  std::size_t child_links = 0;
  for (Rank r = 0; r < p; ++r) {
    for (Rank c : children[r]) {
      ++child_links;
      if (c < 0 || c >= p || parent[c] != r) return "child list of " + std::to_string(r) + " disagrees with parents";
    }
  }
  if (edges != static_cast<std::size_t>(p - 1) || child_links != edges) return "tree does not have p-1 edges";
  std::vector<bool> seen(p, false);
  std::queue<Rank> q;
  q.push(root);
  seen[root] = true;
  int reached = 1;
  while (!q.empty()) {
    Rank r = q.front();
    q.pop();
    for (Rank c : children[r]) {
      if (seen[c]) return "cycle through rank " + std::to_string(c);
      seen[c] = true;
      ++reached;
      q.push(c);
    }
  }
  if (reached != p) return "tree does not reach every rank";
  return {};
}

}  // namespace itercomm
