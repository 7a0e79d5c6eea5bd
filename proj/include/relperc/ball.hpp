#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relperc/error.hpp"
#include "relperc/groups.hpp"
#include "relperc/subgroup.hpp"

namespace relperc {

/// Map from dense vertex indices to T, cleared in O(touched) so one instance
/// can be reused across Monte Carlo samples.
template <class T>
class DenseVertexMap {
 public:
  explicit DenseVertexMap(std::size_t n) : values_(n), stamp_(n, 0) {}

  T* find(std::uint32_t v) { return stamp_[v] == epoch_ ? &values_[v] : nullptr; }
  const T* find(std::uint32_t v) const { return stamp_[v] == epoch_ ? &values_[v] : nullptr; }
  bool contains(std::uint32_t v) const { return stamp_[v] == epoch_; }
  /// Returns (slot, inserted).
  std::pair<T*, bool> try_emplace(std::uint32_t v, T value) {
    if (stamp_[v] == epoch_) return {&values_[v], false};
    stamp_[v] = epoch_;
    values_[v] = std::move(value);
    ++size_;
    return {&values_[v], true};
  }
  std::size_t size() const { return size_; }
  void clear() {
    size_ = 0;
    if (++epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      epoch_ = 1;
    }
  }

 private:
  std::vector<T> values_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 1;
  std::size_t size_ = 0;
};

template <class T>
class HashVertexMap {
 public:
  T* find(const GroupElement& v) {
    auto it = map_.find(v);
    return it == map_.end() ? nullptr : &it->second;
  }
  const T* find(const GroupElement& v) const {
    auto it = map_.find(v);
    return it == map_.end() ? nullptr : &it->second;
  }
  bool contains(const GroupElement& v) const { return map_.count(v) > 0; }
  std::pair<T*, bool> try_emplace(const GroupElement& v, T value) {
    auto [it, inserted] = map_.try_emplace(v, std::move(value));
    return {&it->second, inserted};
  }
  std::size_t size() const { return map_.size(); }
  void clear() { map_.clear(); }

 private:
  std::unordered_map<GroupElement, T> map_;
};

// ---------------------------------------------------------------------------

/// Materialized ball B_R(o) of a Cayley graph. Vertices are in BFS order with
/// each distance layer sorted by normal form, so build_ball(R) is a prefix of
/// build_ball(R + 1). Adjacency is CSR; every edge carries its canonical key.
class BallGraph {
 public:
  using vertex = std::uint32_t;
  template <class T>
  using vertex_map = DenseVertexMap<T>;

  BallGraph() = default;

  const GroupModel& model() const { return *model_; }
  const ModelPtr& model_ptr() const { return model_; }
  int radius() const { return radius_; }
  std::size_t size() const { return elements_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  vertex root() const { return 0; }
  int dist(vertex v) const { return dist_[v]; }
  bool is_boundary(vertex v) const { return dist_[v] == radius_; }
  const GroupElement& element(vertex v) const { return elements_[v]; }
  const std::vector<GroupElement>& elements() const { return elements_; }
  const std::vector<std::pair<vertex, vertex>>& edges() const { return edges_; }
  std::uint64_t key(std::size_t e) const { return keys_[e]; }
  const std::vector<std::uint64_t>& keys() const { return keys_; }

  std::optional<vertex> locate(const GroupElement& g) const {
    auto it = index_.find(g);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const GroupElement& g) const { return index_.count(g) > 0; }

  template <class F>
  void for_each_neighbor(vertex v, F&& f) const {
    for (std::uint32_t i = offsets_[v]; i < offsets_[v + 1]; ++i) f(adj_[i], keys_[adj_edge_[i]]);
  }
  /// Neighbour/edge-index pairs of v.
  template <class F>
  void for_each_incident(vertex v, F&& f) const {
    for (std::uint32_t i = offsets_[v]; i < offsets_[v + 1]; ++i) f(adj_[i], adj_edge_[i]);
  }
  std::uint32_t degree(vertex v) const { return offsets_[v + 1] - offsets_[v]; }

  template <class T>
  vertex_map<T> make_vertex_map() const {
    return vertex_map<T>(size());
  }

  /// Membership mask of a vertex set over the ball.
  std::vector<char> mask(const SubgroupSpec& h) const {
    std::vector<char> m(size());
    for (std::size_t i = 0; i < size(); ++i) m[i] = h.contains(elements_[i]) ? 1 : 0;
    return m;
  }

  friend BallGraph build_ball(ModelPtr model, int radius, std::size_t max_vertices,
                              const std::function<bool(const GroupElement&)>& admit);

 private:
  ModelPtr model_;
  int radius_ = 0;
  std::vector<GroupElement> elements_;
  std::vector<int> dist_;
  std::vector<std::pair<vertex, vertex>> edges_;
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> offsets_, adj_, adj_edge_;
  std::unordered_map<GroupElement, vertex> index_;
};

/// BFS closure of the identity under the generators to depth `radius`.
/// Throws ResourceError when the ball would exceed `max_vertices`. A non-empty
/// `admit` restricts the ball to the vertices it accepts (the caller is
/// responsible for distances staying exact, e.g. geodesically closed sets).
inline BallGraph build_ball(ModelPtr model, int radius, std::size_t max_vertices = 20'000'000,
                            const std::function<bool(const GroupElement&)>& admit = {}) {
  if (radius < 0) throw ConfigError("ball radius must be >= 0");
  BallGraph b;
  b.model_ = model;
  b.radius_ = radius;
  std::vector<GroupElement> layer{model->identity()};
  std::vector<GroupElement> nb;
  for (int r = 0; r <= radius; ++r) {
    std::sort(layer.begin(), layer.end());
    for (auto& g : layer) {
      b.index_.emplace(g, static_cast<BallGraph::vertex>(b.elements_.size()));
      b.elements_.push_back(std::move(g));
      b.dist_.push_back(r);
    }
    if (b.elements_.size() > max_vertices) {
      throw ResourceError("ball of " + model->name() + " with radius " + std::to_string(radius) +
                          " exceeds the vertex cap of " + std::to_string(max_vertices));
    }
    if (r == radius) break;
    const std::size_t begin = b.elements_.size() - (layer.empty() ? 0 : layer.size());
    std::vector<GroupElement> next;
    std::unordered_map<GroupElement, char> pending;
    for (std::size_t i = begin; i < b.elements_.size(); ++i) {
      model->neighbors(b.elements_[i], nb);
      for (auto& x : nb) {
        if (admit && !admit(x)) continue;
        if (!b.index_.count(x) && pending.try_emplace(x, 1).second) next.push_back(std::move(x));
      }
    }
    layer = std::move(next);
  }

  const std::size_t n = b.elements_.size();
  std::vector<std::vector<std::pair<BallGraph::vertex, std::uint32_t>>> adj(n);
  for (BallGraph::vertex v = 0; v < n; ++v) {
    model->neighbors(b.elements_[v], nb);
    for (const auto& x : nb) {
      auto it = b.index_.find(x);
      if (it == b.index_.end()) continue;
      const BallGraph::vertex w = it->second;
      if (w == v) throw ConfigError(model->name() + ": Cayley graph has a loop");
      if (v < w) {
        const auto e = static_cast<std::uint32_t>(b.edges_.size());
        b.edges_.emplace_back(v, w);
        b.keys_.push_back(edge_key(b.elements_[v], b.elements_[w]));
        adj[v].emplace_back(w, e);
        adj[w].emplace_back(v, e);
      }
    }
  }
  b.offsets_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) {
    std::sort(adj[v].begin(), adj[v].end());
    for (std::size_t i = 1; i < adj[v].size(); ++i) {
      if (adj[v][i].first == adj[v][i - 1].first) throw ConfigError(model->name() + ": Cayley graph has a multi-edge");
    }
    b.offsets_[v + 1] = b.offsets_[v] + static_cast<std::uint32_t>(adj[v].size());
  }
  b.adj_.reserve(b.offsets_[n]);
  b.adj_edge_.reserve(b.offsets_[n]);
  for (auto& list : adj) {
    for (auto [w, e] : list) {
      b.adj_.push_back(w);
      b.adj_edge_.push_back(e);
    }
  }
  return b;
}

/// |B_n(o) ∩ H| for n = 0..R.
inline std::vector<std::size_t> subgroup_ball_count(const BallGraph& ball, const SubgroupSpec& h) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(ball.radius()) + 1, 0);
  for (BallGraph::vertex v = 0; v < ball.size(); ++v) {
    if (h.contains(ball.element(v))) counts[ball.dist(v)] += 1;
  }
  for (std::size_t r = 1; r < counts.size(); ++r) counts[r] += counts[r - 1];
  return counts;
}

// ---------------------------------------------------------------------------

/// The ball B_R(o) explored lazily through the group model; needs a model
/// with exact word lengths (lattices, free groups, finite groups, the oriented
/// tree). Vertices are group elements.
class ImplicitBall {
 public:
  using vertex = GroupElement;
  template <class T>
  using vertex_map = HashVertexMap<T>;

  ImplicitBall(ModelPtr model, int radius) : model_(std::move(model)), radius_(radius) {
    if (radius < 0) throw ConfigError("ball radius must be >= 0");
    if (!model_->word_length(model_->identity())) {
      throw ConfigError(model_->name() + " has no cheap word length; build a materialized ball");
    }
  }

  const GroupModel& model() const { return *model_; }
  const ModelPtr& model_ptr() const { return model_; }
  int radius() const { return radius_; }
  vertex root() const { return model_->identity(); }
  int dist(const vertex& v) const { return *model_->word_length(v); }
  bool is_boundary(const vertex& v) const { return dist(v) == radius_; }
  const GroupElement& element(const vertex& v) const { return v; }
  std::optional<vertex> locate(const GroupElement& g) const {
    if (dist(g) > radius_) return std::nullopt;
    return g;
  }
  bool contains(const GroupElement& g) const { return dist(g) <= radius_; }

  template <class F>
  void for_each_neighbor(const vertex& v, F&& f) const {
    std::vector<GroupElement> nb;
    model_->neighbors(v, nb);
    for (auto& w : nb) {
      if (dist(w) > radius_) continue;
      const std::uint64_t k = edge_key(v, w);
      f(std::move(w), k);
    }
  }

  template <class T>
  vertex_map<T> make_vertex_map() const {
    return vertex_map<T>();
  }

 private:
  ModelPtr model_;
  int radius_;
};

}  // namespace relperc
