#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "relperc/ball.hpp"
#include "relperc/error.hpp"
#include "relperc/hash.hpp"
#include "relperc/parallel.hpp"
#include "relperc/stats.hpp"
#include "relperc/union_find.hpp"

namespace relperc {

/// Uniform edge labels keyed by (seed, edge key). Edge e is open at p iff
/// value(e) < p, which couples all p monotonically on one field.
struct CouplingField {
  std::uint64_t seed = 0;

  double value(std::uint64_t key) const noexcept { return to_unit(splitmix64(hash_combine(seed, key))); }
  bool open(std::uint64_t key, double p) const noexcept { return value(key) < p; }
};

/// Field of the i-th Monte Carlo sample; seeds expand as base + i.
inline CouplingField sample_field(std::uint64_t base_seed, std::uint64_t index) {
  return {base_seed + index};
}

/// The open-edge set of a field at one p on a materialized ball.
struct Configuration {
  const BallGraph* ball = nullptr;
  double p = 0.0;
  std::vector<char> open;

  std::size_t open_count() const { return static_cast<std::size_t>(std::count(open.begin(), open.end(), 1)); }
};

inline Configuration sample(const BallGraph& ball, const CouplingField& field, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
  Configuration c;
  c.ball = &ball;
  c.p = p;
  c.open.resize(ball.edge_count());
  for (std::size_t e = 0; e < ball.edge_count(); ++e) c.open[e] = field.open(ball.key(e), p) ? 1 : 0;
  return c;
}

struct ClusterRecord {
  std::uint32_t size = 0;
  std::vector<std::uint32_t> count_in_H;  // one entry per registered mask
  bool touches_boundary = false;
  std::uint32_t representative = 0;  // smallest vertex index in the cluster
};

/// Open-edge components of a configuration. Cluster ids are dense and ordered
/// by representative, so they are reproducible.
class ClusterPartition {
 public:
  std::uint32_t find(std::uint32_t v) const { return label_[v]; }
  std::size_t cluster_count() const { return records_.size(); }
  const ClusterRecord& cluster(std::uint32_t id) const { return records_[id]; }
  const std::vector<ClusterRecord>& clusters() const { return records_; }
  const std::vector<std::uint32_t>& labels() const { return label_; }
  std::size_t vertex_count() const { return label_.size(); }

  /// Builds the partition from per-vertex union-find roots.
  static ClusterPartition from_union_find(const BallGraph& ball, UnionFind& uf,
                                          std::span<const std::vector<char>> masks) {
    ClusterPartition cp;
    const std::size_t n = ball.size();
    cp.label_.assign(n, 0);
    std::vector<std::uint32_t> id_of_root(n, UINT32_MAX);
    for (std::uint32_t v = 0; v < n; ++v) {
      const std::uint32_t r = uf.find(v);
      if (id_of_root[r] == UINT32_MAX) {
        id_of_root[r] = static_cast<std::uint32_t>(cp.records_.size());
        ClusterRecord rec;
        rec.representative = v;
        rec.count_in_H.assign(masks.size(), 0);
        cp.records_.push_back(std::move(rec));
      }
      const std::uint32_t id = id_of_root[r];
      cp.label_[v] = id;
      auto& rec = cp.records_[id];
      rec.size += 1;
      rec.touches_boundary |= ball.is_boundary(v);
      for (std::size_t k = 0; k < masks.size(); ++k) rec.count_in_H[k] += masks[k][v] ? 1 : 0;
    }
    return cp;
  }

 private:
  std::vector<std::uint32_t> label_;
  std::vector<ClusterRecord> records_;
};

/// Union-find labelling of the open edges of `field` at p.
inline void union_open_edges(const BallGraph& ball, const CouplingField& field, double p, UnionFind& uf) {
  uf.reset(ball.size());
  const auto& edges = ball.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (field.open(ball.key(e), p)) uf.unite(edges[e].first, edges[e].second);
  }
}

inline ClusterPartition clusters(const Configuration& config, std::span<const std::vector<char>> masks = {}) {
  const BallGraph& ball = *config.ball;
  UnionFind uf(ball.size());
  const auto& edges = ball.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (config.open[e]) uf.unite(edges[e].first, edges[e].second);
  }
  return ClusterPartition::from_union_find(ball, uf, masks);
}

/// Clusters with count_in_H >= m (mask index `h`) that reach the boundary:
/// the finite-volume stand-in for H-infinite clusters.
inline std::size_t relative_cluster_counts(const ClusterPartition& cp, std::size_t h, std::uint32_t m) {
  if (m < 1) throw ConfigError("relative_cluster_counts: m must be >= 1");
  std::size_t count = 0;
  for (const auto& rec : cp.clusters()) {
    if (rec.touches_boundary && rec.count_in_H.at(h) >= m) ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Exploration on any view (BallGraph or ImplicitBall).

/// Edge filter that admits everything.
struct AllEdges {
  template <class V>
  bool operator()(const V&, const V&) const noexcept {
    return true;
  }
};

/// Breadth-first exploration of the open cluster of `source` at p. visit(v)
/// returns false to stop early; returns true iff the cluster was exhausted.
/// `seen` is caller-owned scratch and is cleared here.
template <class View, class Visit, class Filter = AllEdges>
bool explore_cluster(const View& g, const CouplingField& field, double p, const typename View::vertex& source,
                     typename View::template vertex_map<char>& seen, Visit&& visit, Filter&& admit = {}) {
  using V = typename View::vertex;
  seen.clear();
  std::vector<V> queue;
  seen.try_emplace(source, 1);
  queue.push_back(source);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const V v = queue[head];
    if (!visit(v)) return false;
    g.for_each_neighbor(v, [&](const V& w, std::uint64_t key) {
      if (!field.open(key, p) || !admit(v, w)) return;
      if (seen.try_emplace(w, 1).second) queue.push_back(w);
    });
  }
  return true;
}

/// Prim-style exploration by bottleneck threshold: each vertex v joins the
/// cluster of `source` exactly for p > thr(v), where thr is the minimax edge
/// value over paths from the source (thr(source) = -1). Vertices are visited
/// in nondecreasing thr; only thresholds below p_max are explored.
/// visit(v, thr) returns false to stop.
template <class View, class Visit, class Filter = AllEdges>
void bottleneck_explore(const View& g, const CouplingField& field, const typename View::vertex& source, double p_max,
                        typename View::template vertex_map<char>& done, Visit&& visit, Filter&& admit = {}) {
  using V = typename View::vertex;
  struct Item {
    double thr;
    std::uint64_t order;
    V v;
    bool operator>(const Item& o) const { return thr != o.thr ? thr > o.thr : order > o.order; }
  };
  done.clear();
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  std::uint64_t order = 0;
  heap.push({-1.0, order++, source});
  while (!heap.empty()) {
    Item it = heap.top();
    heap.pop();
    if (!done.try_emplace(it.v, 1).second) continue;
    if (!visit(it.v, it.thr)) return;
    g.for_each_neighbor(it.v, [&](const V& w, std::uint64_t key) {
      if (done.contains(w) || !admit(it.v, w)) return;
      const double t = std::max(it.thr, field.value(key));
      if (t < p_max) heap.push({t, order++, w});
    });
  }
}

// ---------------------------------------------------------------------------
// Two-point function.

/// Precomputed connection test between two fixed vertices: on tree models the
/// unique path's edge keys, otherwise a search on the view.
template <class View>
class PairProbe {
 public:
  PairProbe(const View& g, const GroupElement& x, const GroupElement& y) : g_(&g), x_(x), y_(y) {
    if (x == y) {
      same_ = true;
      return;
    }
    const GroupModel& m = g.model();
    if (m.is_tree()) {
      const auto path = m.geodesic(x, y);
      for (std::size_t i = 0; i + 1 < path.size(); ++i) keys_.push_back(edge_key(path[i], path[i + 1]));
      tree_ = true;
    } else {
      auto vx = g.locate(x);
      auto vy = g.locate(y);
      if (!vx || !vy) throw ConfigError("two_point: vertex outside the ball");
      vx_ = *vx;
      vy_ = *vy;
    }
  }

  std::size_t distance_hint() const { return keys_.size(); }
  bool tree_path() const { return tree_; }

  /// x <-> y inside the ball under `field` at p.
  bool connected(const CouplingField& field, double p, typename View::template vertex_map<char>& scratch) const {
    if (same_) return true;
    if (tree_) {
      for (auto k : keys_) {
        if (!field.open(k, p)) return false;
      }
      return true;
    }
    bool hit = false;
    explore_cluster(*g_, field, p, *vx_, scratch, [&](const typename View::vertex& v) {
      hit = v == *vy_;
      return !hit;
    });
    return hit;
  }

  /// Largest p threshold below which the pair is disconnected, for tree paths.
  double path_threshold(const CouplingField& field) const {
    double t = -1.0;
    for (auto k : keys_) t = std::max(t, field.value(k));
    return t;
  }

 private:
  const View* g_;
  GroupElement x_, y_;
  bool same_ = false;
  bool tree_ = false;
  std::vector<std::uint64_t> keys_;
  std::optional<typename View::vertex> vx_, vy_;
};

/// Graph distance between two vertices of a model, when cheaply available.
inline std::optional<int> model_distance(const GroupModel& m, const GroupElement& x, const GroupElement& y) {
  if (const auto* t = dynamic_cast<const OrientedTree*>(&m)) {
    auto [up, down] = t->relative_position(x, y);
    return up + down;
  }
  if (!m.is_group()) return std::nullopt;
  return m.word_length(m.multiply(m.invert(x), y));
}

struct TwoPointOptions {
  std::uint64_t base_seed = 1;
  std::size_t samples = 1000;
  /// Endpoints must lie within radius R - margin; negative means d(x, y).
  int margin = -1;
  unsigned threads = 1;
};

/// Frequency estimate of P_p(x <-> y) over fields base_seed + i, i < samples.
template <class View>
Proportion two_point(const View& g, double p, const GroupElement& x, const GroupElement& y,
                     const TwoPointOptions& opt) {
  const GroupModel& m = g.model();
  int margin = opt.margin;
  if (margin < 0) {
    auto d = model_distance(m, x, y);
    margin = d ? *d : 0;
  }
  auto dist_of = [&](const GroupElement& v) -> std::optional<int> {
    if (auto w = m.word_length(v)) return *w;
    if (auto loc = g.locate(v)) return g.dist(*loc);
    return std::nullopt;
  };
  const auto dx = dist_of(x), dy = dist_of(y);
  if (!dx || !dy || *dx > g.radius() - margin || *dy > g.radius() - margin) {
    throw ConfigError("two_point: endpoints must lie within radius R - margin = " +
                      std::to_string(g.radius() - margin));
  }
  PairProbe<View> probe(g, x, y);
  const std::size_t chunks = std::min<std::size_t>(opt.samples, 256);
  std::vector<std::uint64_t> hits(chunks, 0);
  parallel_for(
      chunks, opt.threads, [&] { return g.template make_vertex_map<char>(); },
      [&](auto& scratch, std::size_t c) {
        const std::size_t lo = opt.samples * c / chunks, hi = opt.samples * (c + 1) / chunks;
        for (std::size_t i = lo; i < hi; ++i) {
          if (probe.connected(sample_field(opt.base_seed, i), p, scratch)) ++hits[c];
        }
      });
  Proportion r;
  r.trials = opt.samples;
  for (auto h : hits) r.successes += h;
  return r;
}

// ---------------------------------------------------------------------------

/// Edges of the ball sorted by field value, for Newman-Ziff style sweeps that
/// add edges in the order they open as p increases.
inline std::vector<std::uint32_t> edges_by_threshold(const BallGraph& ball, const CouplingField& field,
                                                     std::vector<double>& values) {
  values.resize(ball.edge_count());
  for (std::size_t e = 0; e < ball.edge_count(); ++e) values[e] = field.value(ball.key(e));
  std::vector<std::uint32_t> order(ball.edge_count());
  for (std::uint32_t e = 0; e < order.size(); ++e) order[e] = e;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return values[a] != values[b] ? values[a] < values[b] : a < b;
  });
  return order;
}

}  // namespace relperc
