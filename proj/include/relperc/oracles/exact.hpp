#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "relperc/ball.hpp"
#include "relperc/error.hpp"
#include "relperc/hash.hpp"
#include "relperc/parallel.hpp"

namespace relperc::oracles {

using Rational = boost::multiprecision::cpp_rational;
using HighFloat = boost::multiprecision::cpp_bin_float_50;

/// Exact value of a double as a rational (every finite double is dyadic).
inline Rational to_rational(double x) {
  if (!std::isfinite(x)) throw ConfigError("oracle parameters must be finite");
  int exp = 0;
  const double mant = std::frexp(x, &exp);
  // mant * 2^53 is an integer for any double.
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  Rational r(scaled);
  exp -= 53;
  const boost::multiprecision::cpp_int two_pow = boost::multiprecision::cpp_int(1) << std::abs(exp);
  return exp >= 0 ? Rational(r * two_pow) : Rational(r / two_pow);
}

/// Compensated (Neumaier) summation.
class NeumaierSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// counts[k][j]: configurations with k open edges and j ghost bits set.
class CountTable {
 public:
  CountTable() = default;
  CountTable(std::size_t edges, std::size_t ghosts)
      : edges_(edges), ghosts_(ghosts), counts_((edges + 1) * (ghosts + 1), 0) {}

  void add(std::size_t k, std::size_t j, std::uint64_t c = 1) { counts_[k * (ghosts_ + 1) + j] += c; }
  std::uint64_t at(std::size_t k, std::size_t j) const { return counts_[k * (ghosts_ + 1) + j]; }
  std::size_t edges() const { return edges_; }
  std::size_t ghosts() const { return ghosts_; }

  CountTable& operator+=(const CountTable& o) {
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  /// Probability under Bernoulli(p) edges and Bernoulli(q) ghost bits.
  template <class Scalar>
  Scalar probability(const Scalar& p, const Scalar& q) const {
    const auto pp = powers(p, edges_), qp = powers(Scalar(1 - p), edges_);
    const auto gp = powers(q, ghosts_), gq = powers(Scalar(1 - q), ghosts_);
    Scalar total = 0;
    for (std::size_t k = 0; k <= edges_; ++k) {
      for (std::size_t j = 0; j <= ghosts_; ++j) {
        const std::uint64_t c = at(k, j);
        if (c) total += Scalar(c) * pp[k] * qp[edges_ - k] * gp[j] * gq[ghosts_ - j];
      }
    }
    return total;
  }

  /// d/dp of the probability (ghost law held fixed).
  template <class Scalar>
  Scalar derivative(const Scalar& p, const Scalar& q) const {
    const std::size_t m = edges_;
    const auto pp = powers(p, m), qp = powers(Scalar(1 - p), m);
    const auto gp = powers(q, ghosts_), gq = powers(Scalar(1 - q), ghosts_);
    Scalar total = 0;
    for (std::size_t k = 0; k <= m; ++k) {
      Scalar dk = 0;
      if (k > 0) dk += Scalar(k) * pp[k - 1] * qp[m - k];
      if (k < m) dk -= Scalar(m - k) * pp[k] * qp[m - k - 1];
      for (std::size_t j = 0; j <= ghosts_; ++j) {
        const std::uint64_t c = at(k, j);
        if (c) total += Scalar(c) * dk * gp[j] * gq[ghosts_ - j];
      }
    }
    return total;
  }

 private:
  template <class Scalar>
  static std::vector<Scalar> powers(const Scalar& x, std::size_t n) {
    std::vector<Scalar> out(n + 1, Scalar(1));
    for (std::size_t i = 1; i <= n; ++i) out[i] = out[i - 1] * x;
    return out;
  }

  std::size_t edges_ = 0, ghosts_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Small graph with a distinguished vertex set A.
struct FiniteSystem {
  std::string name;
  std::uint32_t vertices = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<std::uint32_t> A;

  void validate(std::size_t max_edges = 20) const {
    if (vertices == 0 || vertices > 64) throw ConfigError(name + ": need 1..64 vertices");
    if (edges.size() > max_edges) throw ConfigError(name + ": too many edges to enumerate");
    for (auto [a, b] : edges) {
      if (a >= vertices || b >= vertices) throw ConfigError(name + ": edge endpoint out of range");
    }
    for (auto a : A) {
      if (a >= vertices) throw ConfigError(name + ": A vertex out of range");
    }
  }
};

/// Component labels (smallest vertex of each component) of the open subgraph.
inline void component_labels(const FiniteSystem& s, std::uint64_t open, std::vector<std::uint32_t>& label) {
  label.resize(s.vertices);
  std::iota(label.begin(), label.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (label[x] != x) x = label[x] = label[label[x]];
    return x;
  };
  for (std::size_t e = 0; e < s.edges.size(); ++e) {
    if (!((open >> e) & 1)) continue;
    auto a = find(s.edges[e].first), b = find(s.edges[e].second);
    if (a != b) label[std::max(a, b)] = std::min(a, b);
  }
  for (std::uint32_t v = 0; v < s.vertices; ++v) label[v] = find(v);
}

inline int popcount(std::uint64_t x) { return __builtin_popcountll(x); }

/// Enumerates all 2^bits configurations in fixed chunks; per-chunk
/// accumulators are merged in chunk order.
template <class Acc, class Make, class Body>
Acc enumerate_configurations(unsigned bits, unsigned threads, Make&& make, Body&& body) {
  if (bits > 30) throw ResourceError("enumeration over 2^" + std::to_string(bits) + " configurations refused");
  const std::uint64_t total = std::uint64_t(1) << bits;
  const std::size_t chunks = std::size_t(std::min<std::uint64_t>(total, 64));
  std::vector<Acc> part;
  part.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) part.push_back(make());
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::uint64_t lo = total * c / chunks, hi = total * (c + 1) / chunks;
    for (std::uint64_t w = lo; w < hi; ++w) body(part[c], w);
  });
  Acc acc = make();
  for (auto& p : part) acc += p;
  return acc;
}

// ---------------------------------------------------------------------------
// Instances.

inline FiniteSystem path_system(std::uint32_t n) {
  FiniteSystem s{"path" + std::to_string(n), n, {}, {}};
  for (std::uint32_t i = 0; i + 1 < n; ++i) s.edges.emplace_back(i, i + 1);
  return s;
}

inline FiniteSystem cycle_system(std::uint32_t n) {
  FiniteSystem s = path_system(n);
  s.name = "cycle" + std::to_string(n);
  s.edges.emplace_back(n - 1, 0);
  return s;
}

/// Connected random graph: a random spanning tree plus extra random edges.
inline FiniteSystem random_system(std::uint64_t seed, std::uint32_t vertices, std::uint32_t edges) {
  if (vertices < 2 || edges + 1 < vertices || edges > vertices * (vertices - 1) / 2) {
    throw ConfigError("random_system: inconsistent sizes");
  }
  FiniteSystem s{"random-v" + std::to_string(vertices) + "-e" + std::to_string(edges) + "-s" + std::to_string(seed),
                 vertices,
                 {},
                 {}};
  std::uint64_t n = 0;
  auto draw = [&](std::uint64_t bound) { return bounded(keyed_draw(seed, 0x5157, n++), bound); };
  std::vector<std::vector<char>> used(vertices, std::vector<char>(vertices, 0));
  for (std::uint32_t v = 1; v < vertices; ++v) {
    const auto u = static_cast<std::uint32_t>(draw(v));
    s.edges.emplace_back(u, v);
    used[u][v] = used[v][u] = 1;
  }
  while (s.edges.size() < edges) {
    const auto a = static_cast<std::uint32_t>(draw(vertices)), b = static_cast<std::uint32_t>(draw(vertices));
    if (a == b || used[a][b]) continue;
    used[a][b] = used[b][a] = 1;
    s.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  for (std::uint32_t v = 0; v < vertices; ++v) {
    if (draw(2)) s.A.push_back(v);
  }
  if (s.A.empty()) s.A.push_back(0);
  return s;
}

/// The whole ball as a finite system (e.g. a finite Cayley graph).
inline FiniteSystem system_from_ball(const BallGraph& ball, std::string name) {
  FiniteSystem s;
  s.name = std::move(name);
  s.vertices = static_cast<std::uint32_t>(ball.size());
  for (const auto& [a, b] : ball.edges()) s.edges.emplace_back(a, b);
  return s;
}

}  // namespace relperc::oracles
