#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "relperc/ball.hpp"
#include "relperc/percolation.hpp"
#include "relperc/subgroup.hpp"

using namespace relperc;

namespace {

// Components by breadth-first search over open edges, labelled by the
// smallest vertex they contain.
std::vector<std::uint32_t> bfs_components(const Configuration& c) {
  const BallGraph& b = *c.ball;
  std::vector<std::uint32_t> label(b.size(), UINT32_MAX);
  for (std::uint32_t s = 0; s < b.size(); ++s) {
    if (label[s] != UINT32_MAX) continue;
    std::vector<std::uint32_t> q{s};
    label[s] = s;
    for (std::size_t h = 0; h < q.size(); ++h) {
      b.for_each_incident(q[h], [&](std::uint32_t w, std::uint32_t e) {
        if (c.open[e] && label[w] == UINT32_MAX) {
          label[w] = s;
          q.push_back(w);
        }
      });
    }
  }
  return label;
}

// Exact P(x <-> y inside a W x H box) by a row transfer matrix over
// connectivity states. x and y sit in row `row` at columns cx and cy.
double box_connection_probability(int W, int H, int row, int cx, int cy, double p) {
  struct State {
    std::vector<int> labels;
    int lx = -1, ly = -1;
    auto operator<=>(const State&) const = default;
  };
  auto canonical = [](State s) {
    std::map<int, int> re;
    for (auto& l : s.labels) l = re.try_emplace(l, static_cast<int>(re.size())).first->second;
    auto remap = [&](int l) { return l < 0 ? -1 : re.at(l); };
    s.lx = remap(s.lx);
    s.ly = remap(s.ly);
    return s;
  };
  std::map<State, double> states;
  double success = 0.0;
  // Row 0: only horizontal edges.
  for (int r = 0; r < H; ++r) {
    std::map<State, double> next;
    const int edges = (r == 0 ? 0 : W) + (W - 1);
    std::vector<std::pair<State, double>> sources;
    if (r == 0) {
      sources.push_back({State{std::vector<int>(W, -1)}, 1.0});
    } else {
      sources.assign(states.begin(), states.end());
    }
    for (const auto& [st, prob] : sources) {
      for (int mask = 0; mask < (1 << edges); ++mask) {
        // Nodes 0..W-1: previous row, W..2W-1: new row.
        std::vector<int> parent(2 * W);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
          while (parent[a] != a) a = parent[a] = parent[parent[a]];
          return a;
        };
        auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
        if (r > 0) {
          for (int i = 0; i < W; ++i) {
            for (int j = i + 1; j < W; ++j) {
              if (st.labels[i] == st.labels[j]) unite(i, j);
            }
          }
        }
        double w = prob;
        int bit = 0;
        if (r > 0) {
          for (int i = 0; i < W; ++i, ++bit) {
            const bool open = mask >> bit & 1;
            w *= open ? p : 1 - p;
            if (open) unite(i, W + i);
          }
        }
        for (int i = 0; i + 1 < W; ++i, ++bit) {
          const bool open = mask >> bit & 1;
          w *= open ? p : 1 - p;
          if (open) unite(W + i, W + i + 1);
        }
        // Roots of the marked components.
        int rx = -1, ry = -1;
        if (r > 0 && st.lx >= 0) {
          for (int i = 0; i < W; ++i)
            if (st.labels[i] == st.lx) rx = find(i);
        }
        if (r > 0 && st.ly >= 0) {
          for (int i = 0; i < W; ++i)
            if (st.labels[i] == st.ly) ry = find(i);
        }
        if (r == row) {
          rx = find(W + cx);
          ry = find(W + cy);
        }
        if (rx >= 0 && rx == ry) {
          success += w;
          continue;
        }
        State ns;
        ns.labels.resize(W);
        for (int i = 0; i < W; ++i) ns.labels[i] = find(W + i);
        auto survives = [&](int root) {
          return std::find(ns.labels.begin(), ns.labels.end(), root) != ns.labels.end();
        };
        if (r >= row && (!survives(rx) || !survives(ry))) continue;  // a marked cluster died
        ns.lx = rx >= 0 ? rx : -1;
        ns.ly = ry >= 0 ? ry : -1;
        next[canonical(ns)] += w;
      }
    }
    states = std::move(next);
  }
  return success;
}

}  // namespace

TEST(CouplingField, DeterministicAndUniform) {
  CouplingField f{42};
  EXPECT_EQ(f.value(7), CouplingField{42}.value(7));
  EXPECT_NE(f.value(7), CouplingField{43}.value(7));
  double s = 0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const double v = f.value(k);
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    s += v;
  }
  EXPECT_NEAR(s / 1e5, 0.5, 3 * std::sqrt(1.0 / 12 / 1e5));
}

TEST(Sample, Extremes) {
  auto b = build_ball(make_group("free:2"), 3);
  EXPECT_EQ(sample(b, {1}, 0.0).open_count(), 0u);
  EXPECT_EQ(sample(b, {1}, 1.0).open_count(), b.edge_count());
  EXPECT_THROW(sample(b, {1}, 1.5), ConfigError);
}

TEST(Sample, OpenFractionBinomial) {
  auto b = build_ball(make_group("finite:S3"), 3);
  ASSERT_EQ(b.edge_count(), 9u);
  std::size_t open = 0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) open += sample(b, sample_field(5, s), 0.5).open_count();
  const double n = 9.0 * seeds;
  EXPECT_NEAR(open / n, 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(Sample, MonotoneCoupling) {
  auto b = build_ball(make_group("lattice:2"), 6);
  for (int s = 0; s < 50; ++s) {
    auto lo = sample(b, {static_cast<std::uint64_t>(s)}, 0.3);
    auto hi = sample(b, {static_cast<std::uint64_t>(s)}, 0.6);
    for (std::size_t e = 0; e < b.edge_count(); ++e) EXPECT_LE(lo.open[e], hi.open[e]);
    auto clo = clusters(lo), chi = clusters(hi);
    // Each low cluster lies within one high cluster.
    std::vector<std::uint32_t> image(clo.cluster_count(), UINT32_MAX);
    for (std::uint32_t v = 0; v < b.size(); ++v) {
      auto& im = image[clo.find(v)];
      if (im == UINT32_MAX) im = chi.find(v);
      EXPECT_EQ(im, chi.find(v));
    }
  }
}

TEST(Clusters, AllClosedAllOpen) {
  auto b = build_ball(make_group("lattice:2"), 4);
  auto closed = clusters(sample(b, {1}, 0.0));
  EXPECT_EQ(closed.cluster_count(), b.size());
  auto open = clusters(sample(b, {1}, 1.0));
  ASSERT_EQ(open.cluster_count(), 1u);
  EXPECT_EQ(open.cluster(0).size, b.size());
  EXPECT_TRUE(open.cluster(0).touches_boundary);
}

TEST(Clusters, PathWithMiddleEdgeClosed) {
  auto m = make_group("lattice:1");
  auto b = build_ball(m, 2, 100, [](const GroupElement& g) { return g.normal_form[0] >= -1; });
  ASSERT_EQ(b.size(), 4u);
  ASSERT_EQ(b.edge_count(), 3u);
  Configuration c{&b, 0.5, std::vector<char>(3, 1)};
  for (std::size_t e = 0; e < 3; ++e) {
    auto [u, v] = b.edges()[e];
    const int a = b.element(u).normal_form[0], z = b.element(v).normal_form[0];
    if (std::min(a, z) == 0 && std::max(a, z) == 1) c.open[e] = 0;
  }
  auto cp = clusters(c);
  ASSERT_EQ(cp.cluster_count(), 2u);
  EXPECT_EQ(cp.cluster(0).size, 2u);
  EXPECT_EQ(cp.cluster(1).size, 2u);
}

TEST(Clusters, MatchesBfsOracle) {
  for (auto dsl : {"lattice:2", "free:2", "finite:D4", "wreath:z2:lattice:1"}) {
    auto b = build_ball(make_group(dsl), 3);
    for (int s = 0; s < 100; ++s) {
      auto c = sample(b, sample_field(11, s), 0.1 + 0.008 * s);
      auto cp = clusters(c);
      auto oracle = bfs_components(c);
      for (std::uint32_t v = 0; v < b.size(); ++v) {
        EXPECT_EQ(cp.cluster(cp.find(v)).representative, oracle[v]);
      }
    }
  }
}

TEST(Clusters, SizesAndSubgroupCountsSum) {
  auto m = make_group("lattice:2");
  auto b = build_ball(m, 6);
  std::vector<std::vector<char>> masks{b.mask(make_subgroup(m, "axis:0")), b.mask(whole_group(*m))};
  const auto line = subgroup_ball_count(b, make_subgroup(m, "axis:0")).back();
  for (int s = 0; s < 20; ++s) {
    auto cp = clusters(sample(b, {static_cast<std::uint64_t>(s)}, 0.45), masks);
    std::size_t size = 0, inH = 0, all = 0;
    for (const auto& r : cp.clusters()) {
      size += r.size;
      inH += r.count_in_H[0];
      all += r.count_in_H[1];
      const auto id = cp.find(r.representative);
      EXPECT_EQ(cp.find(cp.cluster(id).representative), id);
    }
    EXPECT_EQ(size, b.size());
    EXPECT_EQ(all, b.size());
    EXPECT_EQ(inH, line);
  }
}

TEST(RelativeClusterCounts, Extremes) {
  auto m = make_group("free:2");
  auto b = build_ball(m, 4);
  std::vector<std::vector<char>> masks{b.mask(whole_group(*m))};
  EXPECT_EQ(relative_cluster_counts(clusters(sample(b, {3}, 1.0), masks), 0, 5), 1u);
  EXPECT_EQ(relative_cluster_counts(clusters(sample(b, {3}, 0.0), masks), 0, 2), 0u);
  EXPECT_THROW(relative_cluster_counts(clusters(sample(b, {3}, 0.0), masks), 0, 0), ConfigError);
}

TEST(RelativeClusterCounts, TreeNonUniquenessRegime) {
  auto m = make_group("free:2");
  auto b = build_ball(m, 10);
  std::vector<std::vector<char>> masks{b.mask(whole_group(*m))};
  UnionFind uf;
  int many = 0;
  const int seeds = 1000;
  for (int s = 0; s < seeds; ++s) {
    union_open_edges(b, sample_field(77, s), 0.6, uf);
    auto cp = ClusterPartition::from_union_find(b, uf, masks);
    many += relative_cluster_counts(cp, 0, 20) >= 2;
  }
  EXPECT_GT(many, 0.9 * seeds);
}

TEST(TwoPoint, TreeIsPowerOfP) {
  auto m = make_group("free:2");
  ImplicitBall g(m, 10);
  auto est = two_point(g, 0.5, m->parse("a"), m->parse("aBAb"), {.base_seed = 1, .samples = 20000});
  // d(a, aBAb) = 3.
  EXPECT_NEAR(est.estimate(), 0.125, 3 * binomial_sigma(0.125, 20000));
  auto same = two_point(g, 0.3, m->parse("ab"), m->parse("ab"), {.samples = 100});
  EXPECT_EQ(same.successes, 100u);
  EXPECT_THROW(two_point(g, 0.3, m->parse("aaaaaaaa"), m->parse("e"), {.samples = 10}), ConfigError);
}

TEST(TwoPoint, TreePathMatchesSearch) {
  auto m = make_group("free:2");
  auto b = build_ball(m, 6);
  PairProbe<BallGraph> tree(b, m->parse("ab"), m->parse("bA"));
  ASSERT_TRUE(tree.tree_path());
  auto scratch = b.make_vertex_map<char>();
  const auto vx = *b.locate(m->parse("ab")), vy = *b.locate(m->parse("bA"));
  for (int s = 0; s < 500; ++s) {
    const CouplingField f{static_cast<std::uint64_t>(s)};
    bool hit = false;
    explore_cluster(b, f, 0.7, vx, scratch, [&](std::uint32_t v) { return !(hit = v == vy); });
    EXPECT_EQ(tree.connected(f, 0.7, scratch), hit);
  }
}

TEST(TwoPoint, LatticeAboveBoxLowerBound) {
  auto m = make_group("lattice:2");
  auto b = build_ball(m, 8);
  const double p = 0.3;
  // x = (-2, 0), y = (2, 0): the 5x5 box [-2,2]^2 has them in its middle row.
  const double bound = box_connection_probability(5, 5, 2, 0, 4, p);
  EXPECT_GT(bound, 0.0);
  // Sanity of the transfer matrix on a 1-row strip: the straight path only.
  EXPECT_NEAR(box_connection_probability(5, 1, 0, 0, 4, p), std::pow(p, 4), 1e-15);
  const std::size_t N = 40000;
  auto est = two_point(b, p, m->parse("-2,0"), m->parse("2,0"), {.base_seed = 9, .samples = N});
  EXPECT_GE(est.estimate() + 3 * binomial_sigma(bound, N), bound);
}

TEST(TwoPoint, TranslationInvariance) {
  auto m = make_group("lattice:2");
  auto b = build_ball(m, 9);
  const auto x = m->parse("2,1"), gamma = m->parse("1,-1");
  const std::size_t N = 4000;
  auto a = two_point(b, 0.5, m->identity(), x, {.base_seed = 1, .samples = N});
  auto c = two_point(b, 0.5, gamma, m->multiply(gamma, x), {.base_seed = 100000, .samples = N});
  const double sigma = std::hypot(a.sigma(), c.sigma());
  EXPECT_LE(std::abs(a.estimate() - c.estimate()), 3 * sigma + 1e-12);
}

TEST(TwoPoint, ThreadCountInvariant) {
  auto m = make_group("lattice:2");
  auto b = build_ball(m, 8);
  auto one = two_point(b, 0.5, m->parse("0,0"), m->parse("2,2"), {.base_seed = 3, .samples = 3000, .threads = 1});
  auto four = two_point(b, 0.5, m->parse("0,0"), m->parse("2,2"), {.base_seed = 3, .samples = 3000, .threads = 4});
  EXPECT_EQ(one.successes, four.successes);
}

TEST(BottleneckExplore, ThresholdsReproduceClusters) {
  auto m = make_group("lattice:2");
  auto b = build_ball(m, 6);
  auto done = b.make_vertex_map<char>();
  UnionFind uf;
  for (int s = 0; s < 30; ++s) {
    const CouplingField f{static_cast<std::uint64_t>(s)};
    std::vector<double> thr(b.size(), 2.0);
    double last = -2;
    bottleneck_explore(b, f, 0u, 1.01, done, [&](std::uint32_t v, double t) {
      EXPECT_GE(t, last);
      last = t;
      thr[v] = t;
      return true;
    });
    for (double p : {0.2, 0.5, 0.7}) {
      union_open_edges(b, f, p, uf);
      for (std::uint32_t v = 0; v < b.size(); ++v) EXPECT_EQ(uf.find(v) == uf.find(0), thr[v] < p);
    }
  }
}
