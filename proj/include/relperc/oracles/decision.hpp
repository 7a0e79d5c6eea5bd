#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "relperc/oracles/exact.hpp"
#include "relperc/oracles/report.hpp"

namespace relperc::oracles {

/// Function of a configuration word: bit e < |E| is edge e, bit |E| + i is
/// the ghost bit of A[i].
using Event = std::function<bool(std::uint64_t)>;

inline Event edge_event(std::size_t e) {
  return [e](std::uint64_t w) { return ((w >> e) & 1) != 0; };
}

inline Event constant_event(bool value) {
  return [value](std::uint64_t) { return value; };
}

inline Event connection_event(const FiniteSystem& s, std::uint32_t x, std::uint32_t y) {
  return [&s, x, y](std::uint64_t w) {
    thread_local std::vector<std::uint32_t> label;
    component_labels(s, w, label);
    return label[x] == label[y];
  };
}

/// |K_x ∩ A| >= n.
inline Event cluster_mass_event(const FiniteSystem& s, std::uint32_t x, std::uint32_t n) {
  return [&s, x, n](std::uint64_t w) {
    thread_local std::vector<std::uint32_t> label;
    component_labels(s, w, label);
    std::uint32_t c = 0;
    for (auto a : s.A) c += label[a] == label[x];
    return c >= n;
  };
}

/// Some u in K_x ∩ A carries a ghost.
inline Event ghost_hit_event(const FiniteSystem& s, std::uint32_t x) {
  return [&s, x](std::uint64_t w) {
    thread_local std::vector<std::uint32_t> label;
    component_labels(s, w, label);
    for (std::size_t i = 0; i < s.A.size(); ++i) {
      if (label[s.A[i]] == label[x] && ((w >> (s.edges.size() + i)) & 1)) return true;
    }
    return false;
  };
}

/// Cluster exploration from `start`: optionally query a ghost bit first and
/// stop if it is 0; then query edges with an endpoint known to connect to
/// start, FIFO over the frontier, each new vertex's edges in edge-index order.
struct ExplorationTree {
  std::uint32_t start = 0;
  std::optional<std::size_t> ghost_bit;
  /// Stop as soon as this vertex is reached.
  std::optional<std::uint32_t> target;
};

using DecisionForest = std::vector<ExplorationTree>;

class ForestRunner {
 public:
  explicit ForestRunner(const FiniteSystem& s) : s_(&s), incident_(s.vertices) {
    for (std::size_t e = 0; e < s.edges.size(); ++e) {
      incident_[s.edges[e].first].push_back(e);
      if (s.edges[e].second != s.edges[e].first) incident_[s.edges[e].second].push_back(e);
    }
  }

  /// Bits queried by one tree.
  std::uint64_t revealed(const ExplorationTree& t, std::uint64_t w) const {
    std::uint64_t seen = 0;
    if (t.ghost_bit) {
      seen |= std::uint64_t(1) << *t.ghost_bit;
      if (!((w >> *t.ghost_bit) & 1)) return seen;
    }
    std::vector<char> known(s_->vertices, 0);
    std::deque<std::size_t> frontier;
    auto join = [&](std::uint32_t v) {
      known[v] = 1;
      for (auto e : incident_[v]) frontier.push_back(e);
    };
    join(t.start);
    if (t.target && *t.target == t.start) return seen;
    while (!frontier.empty()) {
      const std::size_t e = frontier.front();
      frontier.pop_front();
      if ((seen >> e) & 1) continue;
      seen |= std::uint64_t(1) << e;
      if (!((w >> e) & 1)) continue;
      const auto [a, b] = s_->edges[e];
      const std::uint32_t other = known[a] ? b : a;
      if (known[other]) continue;
      join(other);
      if (t.target && other == *t.target) break;
    }
    return seen;
  }

  std::uint64_t revealed(const DecisionForest& f, std::uint64_t w) const {
    std::uint64_t seen = 0;
    for (const auto& t : f) seen |= revealed(t, w);
    return seen;
  }

 private:
  const FiniteSystem* s_;
  std::vector<std::vector<std::size_t>> incident_;
};

/// Ghost-gated full explorations from every vertex of A.
inline DecisionForest ghost_forest(const FiniteSystem& s) {
  DecisionForest f;
  for (std::size_t i = 0; i < s.A.size(); ++i) f.push_back({s.A[i], s.edges.size() + i, std::nullopt});
  return f;
}

/// Ghost inclusion probability 1 - e^(-1/n).
inline HighFloat ghost_probability(std::uint32_t n) {
  return 1 - boost::multiprecision::exp(HighFloat(-1) / HighFloat(n));
}

namespace detail {

inline void require_increasing(const Event& f, unsigned bits, const std::string& what) {
  for (std::uint64_t w = 0; w < (std::uint64_t(1) << bits); ++w) {
    if (!f(w)) continue;
    for (unsigned i = 0; i < bits; ++i) {
      if (!((w >> i) & 1) && !f(w | (std::uint64_t(1) << i))) {
        throw ConfigError(what + ": event is not increasing");
      }
    }
  }
}

struct OsssTally {
  CountTable f, g, fg;
  std::vector<CountTable> f_and_bit, revealed;
  OsssTally& operator+=(const OsssTally& o) {
    f += o.f;
    g += o.g;
    fg += o.fg;
    for (std::size_t i = 0; i < f_and_bit.size(); ++i) {
      f_and_bit[i] += o.f_and_bit[i];
      revealed[i] += o.revealed[i];
    }
    return *this;
  }
};

}  // namespace detail

/// |Cov(f, g)| <= sum_i delta_i Cov(f, bit_i) by full enumeration. The forest
/// must compute g: configurations with equal revealed bits get equal g.
/// With ghost bits, the check also confirms that each ghost-gated tree reveals
/// exactly its ghost bit when it is 0 and additionally the edges touching K_u
/// when it is 1.
inline OracleReport osss_check(const FiniteSystem& s, const Event& f, const Event& g, const DecisionForest& forest,
                               double p, std::uint32_t ghost_n = 0, unsigned threads = 1) {
  s.validate();
  if (!(p >= 0 && p <= 1)) throw ConfigError("p must lie in [0, 1]");
  const std::size_t m = s.edges.size();
  const std::size_t a = ghost_n ? s.A.size() : 0;
  const unsigned bits = static_cast<unsigned>(m + a);
  if (bits > 20) throw ConfigError(s.name + ": at most 20 edge and ghost bits");
  detail::require_increasing(f, bits, "osss_check");
  const ForestRunner runner(s);

  // The forest computes g: group configurations by what the forest saw.
  {
    std::unordered_map<std::uint64_t, char> seen_value;
    for (std::uint64_t w = 0; w < (std::uint64_t(1) << bits); ++w) {
      const std::uint64_t r = runner.revealed(forest, w);
      const std::uint64_t key = (r << 20) | (w & r);  // bits <= 20
      const char v = g(w) ? 1 : 0;
      auto [it, inserted] = seen_value.try_emplace(key, v);
      if (!inserted && it->second != v) throw ConfigError(s.name + ": decision forest does not compute g");
    }
  }

  auto make = [&] {
    detail::OsssTally t{CountTable(m, a), CountTable(m, a), CountTable(m, a), {}, {}};
    t.f_and_bit.assign(bits, CountTable(m, a));
    t.revealed.assign(bits, CountTable(m, a));
    return t;
  };
  const std::uint64_t edge_mask = (std::uint64_t(1) << m) - 1;
  auto tally = enumerate_configurations<detail::OsssTally>(bits, threads, make, [&](detail::OsssTally& t, std::uint64_t w) {
    const std::size_t k = std::size_t(popcount(w & edge_mask)), j = std::size_t(popcount(w >> m));
    const bool fv = f(w), gv = g(w);
    if (fv) t.f.add(k, j);
    if (gv) t.g.add(k, j);
    if (fv && gv) t.fg.add(k, j);
    std::uint64_t r = 0;
    for (const auto& tree : forest) {
      const std::uint64_t rt = runner.revealed(tree, w);
      if (tree.ghost_bit && !tree.target && a) {
        // Revealment bookkeeping for ghost-gated full explorations.
        std::uint64_t expect = std::uint64_t(1) << *tree.ghost_bit;
        if ((w >> *tree.ghost_bit) & 1) {
          thread_local std::vector<std::uint32_t> label;
          component_labels(s, w, label);
          for (std::size_t e = 0; e < m; ++e) {
            const auto [x, y] = s.edges[e];
            if (label[x] == label[tree.start] || label[y] == label[tree.start]) expect |= std::uint64_t(1) << e;
          }
        }
        if (rt != expect) throw OracleViolation(s.name + ": revealed set differs from the cluster rule");
      }
      r |= rt;
    }
    for (unsigned i = 0; i < bits; ++i) {
      const bool bit = (w >> i) & 1;
      if (fv && bit) t.f_and_bit[i].add(k, j);
      if ((r >> i) & 1) t.revealed[i].add(k, j);
    }
  });

  auto evaluate = [&](auto pp, auto qq) {
    using S = decltype(pp);
    const S ef = tally.f.probability(pp, qq), eg = tally.g.probability(pp, qq), efg = tally.fg.probability(pp, qq);
    S lhs = efg - ef * eg;
    if (lhs < 0) lhs = -lhs;
    S rhs = 0;
    for (unsigned i = 0; i < bits; ++i) {
      const S bit_p = i < m ? pp : qq;
      const S cov = tally.f_and_bit[i].probability(pp, qq) - ef * bit_p;
      rhs += tally.revealed[i].probability(pp, qq) * cov;
    }
    return std::pair{static_cast<double>(lhs), static_cast<double>(rhs)};
  };
  std::pair<double, double> sides;
  if (a == 0) {
    sides = evaluate(to_rational(p), Rational(0));
  } else {
    sides = evaluate(HighFloat(to_rational(p)), ghost_probability(ghost_n));
  }
  return inequality_report("osss", s.name + "-p" + format_number(p), sides.first, sides.second);
}

/// Russo-Margulis on a finite system: d/dp P_p(f) equals
/// (1 / (p (1 - p))) sum_e Cov(f, omega(e)), both computed exactly.
inline OracleReport russo_check(const FiniteSystem& s, const Event& f, double p, unsigned threads = 1) {
  s.validate();
  if (!(p > 0 && p < 1)) throw ConfigError("russo_check needs 0 < p < 1");
  const std::size_t m = s.edges.size();
  const unsigned bits = static_cast<unsigned>(m);
  detail::require_increasing(f, bits, "russo_check");
  struct Tally {
    CountTable f;
    std::vector<CountTable> f_and_edge;
    Tally& operator+=(const Tally& o) {
      f += o.f;
      for (std::size_t i = 0; i < f_and_edge.size(); ++i) f_and_edge[i] += o.f_and_edge[i];
      return *this;
    }
  };
  auto tally = enumerate_configurations<Tally>(
      bits, threads, [&] { return Tally{CountTable(m, 0), std::vector<CountTable>(m, CountTable(m, 0))}; },
      [&](Tally& t, std::uint64_t w) {
        if (!f(w)) return;
        const std::size_t k = std::size_t(popcount(w));
        t.f.add(k, 0);
        for (std::size_t e = 0; e < m; ++e) {
          if ((w >> e) & 1) t.f_and_edge[e].add(k, 0);
        }
      });
  const Rational rp = to_rational(p), zero(0);
  const Rational lhs = tally.f.derivative(rp, zero);
  const Rational ef = tally.f.probability(rp, zero);
  Rational cov = 0;
  for (std::size_t e = 0; e < m; ++e) cov += tally.f_and_edge[e].probability(rp, zero) - ef * rp;
  const Rational rhs = cov / (rp * (1 - rp));
  OracleReport r = identity_report("russo", s.name + "-p" + format_number(p), static_cast<double>(lhs),
                                   static_cast<double>(rhs));
  // The exact gap, not the gap of the rounded sides.
  const Rational diff = lhs - rhs;
  r.gap = std::abs(static_cast<double>(diff));
  r.holds = r.gap < kIdentityTolerance;
  return r;
}

}  // namespace relperc::oracles
