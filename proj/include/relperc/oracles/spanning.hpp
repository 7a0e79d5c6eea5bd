#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "relperc/ball.hpp"
#include "relperc/error.hpp"
#include "relperc/hash.hpp"
#include "relperc/union_find.hpp"

namespace relperc::oracles {

struct SimpleGraph {
  std::uint32_t vertices = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
};

inline SimpleGraph graph_from_ball(const BallGraph& ball) {
  SimpleGraph g;
  g.vertices = static_cast<std::uint32_t>(ball.size());
  g.edges.assign(ball.edges().begin(), ball.edges().end());
  return g;
}

/// A partition as a label per vertex.
using Partition = std::vector<std::uint32_t>;

struct NestedSpanningTree {
  /// Connected refinements Lambda_i of the input partitions (dense labels).
  std::vector<Partition> cells;
  /// levels[i]: edge indices of T_{i+1}, sorted; each contains the previous.
  std::vector<std::vector<std::size_t>> levels;

  const std::vector<std::size_t>& tree() const { return levels.back(); }
};

/// Splits every cell of `pi` into the components of the subgraph it induces.
inline Partition connected_refinement(const SimpleGraph& g, const Partition& pi) {
  UnionFind uf;
  uf.reset(g.vertices);
  for (const auto& [a, b] : g.edges) {
    if (pi[a] == pi[b]) uf.unite(a, b);
  }
  Partition out(g.vertices);
  std::map<std::uint32_t, std::uint32_t> dense;
  for (std::uint32_t v = 0; v < g.vertices; ++v) {
    out[v] = dense.try_emplace(uf.find(v), static_cast<std::uint32_t>(dense.size())).first->second;
  }
  return out;
}

namespace detail {

/// Uniform spanning tree of a connected multigraph (Wilson's algorithm).
/// Returns the indices into `edges` of the chosen tree edges.
inline std::vector<std::size_t> wilson_tree(std::uint32_t nodes,
                                            const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                                            std::uint64_t seed, std::uint64_t stream) {
  std::vector<std::vector<std::size_t>> incident(nodes);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    incident[edges[e].first].push_back(e);
    incident[edges[e].second].push_back(e);
  }
  std::vector<char> in_tree(nodes, 0);
  std::vector<std::size_t> next_edge(nodes, 0);
  std::uint64_t draws = 0;
  if (nodes == 0) return {};
  in_tree[0] = 1;
  std::vector<std::size_t> chosen;
  for (std::uint32_t start = 1; start < nodes; ++start) {
    if (in_tree[start]) continue;
    // Random walk until the tree; remembering the last exit erases loops.
    std::uint32_t u = start;
    while (!in_tree[u]) {
      if (incident[u].empty()) throw ConfigError("spanning tree: disconnected cell");
      const std::size_t e = incident[u][bounded(keyed_draw(seed, stream, draws++), incident[u].size())];
      next_edge[u] = e;
      u = edges[e].first == u ? edges[e].second : edges[e].first;
    }
    for (u = start; !in_tree[u];) {
      in_tree[u] = 1;
      const std::size_t e = next_edge[u];
      chosen.push_back(e);
      u = edges[e].first == u ? edges[e].second : edges[e].first;
    }
  }
  return chosen;
}

}  // namespace detail

/// Nested spanning trees from a coarsening partition sequence. Level 1 takes a
/// uniform spanning tree of every connected cell; level i + 1 takes, in each
/// cell, a uniform spanning tree among those containing the level-i trees
/// (a uniform spanning tree of the cell with level-i trees contracted).
inline NestedSpanningTree spanning_tree_from_partitions(const SimpleGraph& g, const std::vector<Partition>& pis,
                                                        std::uint64_t seed) {
  if (pis.empty()) throw ConfigError("spanning tree: empty partition sequence");
  for (const auto& pi : pis) {
    if (pi.size() != g.vertices) throw ConfigError("spanning tree: partition size mismatch");
  }
  for (std::size_t i = 0; i + 1 < pis.size(); ++i) {
    std::map<std::uint32_t, std::uint32_t> up;
    for (std::uint32_t v = 0; v < g.vertices; ++v) {
      auto [it, inserted] = up.try_emplace(pis[i][v], pis[i + 1][v]);
      if (!inserted && it->second != pis[i + 1][v]) {
        throw ConfigError("spanning tree: partition " + std::to_string(i + 2) + " does not coarsen its predecessor");
      }
    }
  }
  for (std::uint32_t v = 1; v < g.vertices; ++v) {
    if (pis.back()[v] != pis.back()[0]) throw ConfigError("spanning tree: the last partition must be a single cell");
  }
  NestedSpanningTree out;
  for (const auto& pi : pis) out.cells.push_back(connected_refinement(g, pi));
  if (g.vertices > 0 && *std::max_element(out.cells.back().begin(), out.cells.back().end()) != 0) {
    throw ConfigError("spanning tree: the final cell induces a disconnected subgraph");
  }
  // Components of the current forest.
  UnionFind forest;
  forest.reset(g.vertices);
  std::vector<std::size_t> tree;
  for (std::size_t level = 0; level < out.cells.size(); ++level) {
    const Partition& cell = out.cells[level];
    // Contracted multigraph per cell: nodes are forest components.
    std::map<std::uint32_t, std::vector<std::size_t>> cell_edges;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const auto [a, b] = g.edges[e];
      if (cell[a] != cell[b]) continue;
      if (forest.find(a) == forest.find(b)) continue;
      cell_edges[cell[a]].push_back(e);
    }
    std::vector<std::size_t> added;
    for (const auto& [c, es] : cell_edges) {
      std::map<std::uint32_t, std::uint32_t> node;
      std::vector<std::pair<std::uint32_t, std::uint32_t>> contracted;
      for (auto e : es) {
        const auto ra = forest.find(g.edges[e].first), rb = forest.find(g.edges[e].second);
        const auto na = node.try_emplace(ra, static_cast<std::uint32_t>(node.size())).first->second;
        const auto nb = node.try_emplace(rb, static_cast<std::uint32_t>(node.size())).first->second;
        contracted.emplace_back(na, nb);
      }
      const auto pick = detail::wilson_tree(static_cast<std::uint32_t>(node.size()), contracted, seed,
                                            hash_combine(level, c));
      for (auto i : pick) added.push_back(es[i]);
    }
    for (auto e : added) {
      forest.unite(g.edges[e].first, g.edges[e].second);
      tree.push_back(e);
    }
    std::sort(tree.begin(), tree.end());
    out.levels.push_back(tree);
  }
  return out;
}

/// Nesting invariants: T_i ⊆ T_{i+1}; T_i has (cell size - 1) edges inside each
/// Lambda_i cell, spans it, and has no edges between cells.
inline bool check_nesting(const SimpleGraph& g, const NestedSpanningTree& t, std::string* why = nullptr) {
  auto fail = [&](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  for (std::size_t i = 0; i < t.levels.size(); ++i) {
    const auto& edges = t.levels[i];
    if (i > 0 && !std::includes(edges.begin(), edges.end(), t.levels[i - 1].begin(), t.levels[i - 1].end())) {
      return fail("level " + std::to_string(i + 1) + " drops edges");
    }
    const Partition& cell = t.cells[i];
    std::map<std::uint32_t, std::int64_t> size, count;
    for (std::uint32_t v = 0; v < g.vertices; ++v) ++size[cell[v]];
    UnionFind uf;
    uf.reset(g.vertices);
    for (auto e : edges) {
      const auto [a, b] = g.edges[e];
      if (cell[a] != cell[b]) return fail("edge between cells at level " + std::to_string(i + 1));
      if (!uf.unite(a, b).second) return fail("cycle at level " + std::to_string(i + 1));
      ++count[cell[a]];
    }
    for (const auto& [c, n] : size) {
      if (count[c] != n - 1) return fail("cell without a spanning tree at level " + std::to_string(i + 1));
    }
  }
  return true;
}

}  // namespace relperc::oracles
