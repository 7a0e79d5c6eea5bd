#include <gtest/gtest.h>

#include <cmath>

#include "relperc/oracles/branching.hpp"
#include "relperc/oracles/suite.hpp"

using namespace relperc;
using namespace relperc::oracles;

TEST(Exact, RationalConversionIsExact) {
  EXPECT_EQ(to_rational(0.5), Rational(1, 2));
  EXPECT_EQ(to_rational(0.0), Rational(0));
  EXPECT_EQ(to_rational(-3.25), Rational(-13, 4));
  EXPECT_EQ(static_cast<double>(to_rational(0.1)), 0.1);
}

TEST(Exact, CountTableMatchesBinomial) {
  // P(at least one of 3 edges open) = 1 - (1-p)^3.
  CountTable t(3, 0);
  for (std::uint64_t w = 1; w < 8; ++w) t.add(std::size_t(popcount(w)), 0);
  const Rational p(1, 3);
  EXPECT_EQ(t.probability(p, Rational(0)), 1 - (1 - p) * (1 - p) * (1 - p));
  EXPECT_EQ(t.derivative(p, Rational(0)), 3 * (1 - p) * (1 - p));
}

TEST(Exact, EnumerationIsThreadInvariant) {
  struct Sum {
    std::uint64_t v = 0;
    Sum& operator+=(const Sum& o) {
      v += o.v;
      return *this;
    }
  };
  auto run = [](unsigned threads) {
    return enumerate_configurations<Sum>(12, threads, [] { return Sum{}; },
                                         [](Sum& s, std::uint64_t w) { s.v += w * w; })
        .v;
  };
  EXPECT_EQ(run(1), run(4));
  EXPECT_THROW(run_oracle("russo", "no-such"), ConfigError);
  EXPECT_THROW(oracle_builtins("nope"), ConfigError);
}

TEST(Russo, SingleEdgeAndSeries) {
  const auto edge = path_system(2);
  const auto r1 = russo_check(edge, edge_event(0), 0.3);
  EXPECT_NEAR(r1.lhs, 1.0, 1e-15);
  EXPECT_TRUE(r1.holds);
  const auto path = path_system(3);
  for (double p : {0.2, 0.5, 0.9}) {
    const auto r = russo_check(path, connection_event(path, 0, 2), p);
    EXPECT_NEAR(r.lhs, 2 * p, 1e-15);
    EXPECT_LT(r.gap, kIdentityTolerance);
  }
}

TEST(Russo, RandomSystemsClose) {
  for (std::uint64_t i = 0; i < 6; ++i) {
    const auto s = random_system(i + 11, 6, 8);
    const auto r = russo_check(s, connection_event(s, 0, 5), 0.05 + 0.15 * double(i));
    EXPECT_TRUE(r.holds) << r.instance << " gap " << r.gap;
  }
  EXPECT_THROW(russo_check(path_system(3), constant_event(false), 0.0), ConfigError);
}

TEST(Russo, RejectsDecreasingEvent) {
  const auto s = path_system(2);
  const Event closed = [](std::uint64_t w) { return (w & 1) == 0; };
  EXPECT_THROW(russo_check(s, closed, 0.5), ConfigError);
}

TEST(Osss, SingleEdgeIsEquality) {
  const auto s = path_system(2);
  for (double p : {0.1, 0.5, 0.8}) {
    const auto r = osss_check(s, edge_event(0), edge_event(0), {{0, std::nullopt, 1}}, p);
    EXPECT_NEAR(r.lhs, p * (1 - p), 1e-15);
    EXPECT_NEAR(r.rhs, p * (1 - p), 1e-15);
    EXPECT_TRUE(r.holds);
  }
}

TEST(Osss, TriangleHasStrictSlack) {
  const auto s = cycle_system(3);
  const Event f = connection_event(s, 0, 1);
  // Full exploration of the cluster of 0: Var f = 15/64, bound 19/64.
  const auto r = osss_check(s, f, f, {{0, std::nullopt, std::nullopt}}, 0.5);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.lhs, 15.0 / 64, 1e-15);
  EXPECT_NEAR(r.rhs, 19.0 / 64, 1e-15);
  // Stopping at the target is tight on the triangle.
  const auto tight = osss_check(s, f, f, {{0, std::nullopt, 1}}, 0.5);
  EXPECT_NEAR(tight.rhs, 15.0 / 64, 1e-15);
  EXPECT_TRUE(tight.holds);
}

TEST(Osss, ConstantFunctionHasZeroCovariance) {
  const auto s = cycle_system(3);
  const auto r = osss_check(s, constant_event(true), connection_event(s, 0, 1), {{0, std::nullopt, 1}}, 0.4);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.holds);
}

TEST(Osss, ForestMustComputeG) {
  const auto s = cycle_system(3);
  // Exploring from vertex 2 to itself reveals nothing, so it cannot decide 0 <-> 1.
  const Event g = connection_event(s, 0, 1);
  EXPECT_THROW(osss_check(s, g, g, {{2, std::nullopt, 2}}, 0.5), ConfigError);
}

TEST(Osss, GhostForestOnRandomSystems) {
  for (std::uint64_t i = 0; i < 4; ++i) {
    const auto s = random_system(50 + i, 5, 7);
    const auto n = std::min<std::uint32_t>(2, std::uint32_t(s.A.size()));
    const auto r = osss_check(s, cluster_mass_event(s, 0, n), ghost_hit_event(s, 0), ghost_forest(s), 0.35, n);
    EXPECT_TRUE(r.holds) << r.instance;
    EXPECT_GE(r.lhs, 0.0);
  }
}

TEST(Integral, EqualEndpointsGiveZero) {
  auto s = path_system(5);
  s.A = {0, 4};
  const auto r = integral_inequality_check(s, 2, 0.4, 0.4);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.holds);
}

TEST(Integral, PathWithEndpoints) {
  auto s = path_system(5);
  s.A = {0, 4};
  // Q(2) = p^4 from either endpoint.
  const MassTails tails(s, 2);
  EXPECT_NEAR(tails.Q(2, 0.3), std::pow(0.3, 4), 1e-16);
  EXPECT_NEAR(tails.Q(1, 0.3), 1.0, 1e-15);
  const auto r = integral_inequality_check(s, 2, 0.3, 0.6);
  EXPECT_NEAR(r.lhs, 4 * std::log(2.0), 1e-12);
  EXPECT_TRUE(r.holds) << r.gap;
  EXPECT_THROW(integral_inequality_check(s, 2, 0.6, 0.3), ConfigError);
}

TEST(Kgh, IdentityGammaIsEquality) {
  const auto model = make_group("finite:S3");
  const auto h = make_subgroup(model, "gen:(12)");
  const auto r = kgh_identity_check(model, h, model->identity(), 1, 0.5, "S3");
  EXPECT_NEAR(r.inequality.lhs, r.inequality.rhs, 1e-15);
  EXPECT_TRUE(r.inequality.holds);
  EXPECT_TRUE(r.transport.holds);
}

TEST(Kgh, S3NormalAndNonNormal) {
  const auto model = make_group("finite:S3");
  for (const char* dsl : {"gen:(123)", "gen:(12)"}) {
    const auto h = make_subgroup(model, dsl);
    for (const char* g : {"(12)", "(13)", "(123)"}) {
      const auto r = kgh_identity_check(model, h, model->parse(g), 2, 0.5, "S3");
      EXPECT_TRUE(r.inequality.holds) << dsl << " " << g << " slack " << r.inequality.gap;
      EXPECT_TRUE(r.transport.holds) << dsl << " " << g << " gap " << r.transport.gap;
    }
  }
}

TEST(Kgh, TooLargeNGivesZero) {
  const auto model = make_group("finite:S3");
  const auto h = make_subgroup(model, "gen:(12)");
  const auto r = kgh_identity_check(model, h, model->parse("(13)"), 3, 0.5, "S3");
  EXPECT_EQ(r.inequality.lhs, 0.0);
  EXPECT_EQ(r.inequality.rhs, 0.0);
  EXPECT_EQ(r.transport.lhs, 0.0);
}

TEST(Mtp, UniformRootAndSubgroup) {
  for (const auto& name : {"adjacency", "tree-leaf", "d4-rotations", "s3-transposition"}) {
    const auto r = run_oracle("mtp", name);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_TRUE(r[0].holds) << name << " gap " << r[0].gap;
    EXPECT_GT(r[0].lhs, 0.0) << name;
  }
}

TEST(Mtp, NonInvariantKernelRejected) {
  const auto model = make_group("finite:D4");
  const auto h = make_subgroup(model, "gen:r");
  // Depends on the absolute vertex index, not on relative position.
  const TransportKernel f = [](std::uint64_t, std::uint32_t x, std::uint32_t y) { return x == 0 && y != 0 ? 1.0 : 0.0; };
  EXPECT_THROW(mtp_subgroup_check(model, h, f, false, 0.5, "bad"), ConfigError);
}

TEST(Mtp, AsymmetricKernelOnUnimodularSetStillBalances) {
  // On a finite set with the uniform root any kernel balances.
  FiniteSystem s{"tree5", 5, {{0, 1}, {1, 2}, {2, 3}, {1, 4}}, {0, 1, 2, 3, 4}};
  const TransportKernel f = [](std::uint64_t, std::uint32_t x, std::uint32_t y) { return double(x * 7 + y % 3); };
  const auto r = mtp_uniform_check(s, f, false, 0.5);
  EXPECT_TRUE(r.holds);
  EXPECT_GT(r.lhs, 0.0);
}

TEST(TiltedMtp, ParentKernel) {
  // Each vertex sends 1 to its parent and receives from d - 1 children,
  // each tilted by (d - 1)^-1.
  const auto r = tilted_mtp_check(3, 4, [](int up, int down) { return up == 1 && down == 0 ? 1.0 : 0.0; }, "parent");
  EXPECT_EQ(r.lhs, 1.0);
  EXPECT_EQ(r.rhs, 1.0);
  EXPECT_TRUE(r.holds);
}

TEST(TiltedMtp, BuiltinsHold) {
  const auto r = run_oracle("tilted-mtp");
  EXPECT_EQ(r.size(), 8u);
  EXPECT_TRUE(all_hold(r));
  EXPECT_THROW(tilted_mtp_check(3, 2, [](int, int) { return 1.0; }, "unbounded"), ConfigError);
}

TEST(TiltedMtp, UntiltedIdentityFailsOnTheTree) {
  // Without the tilt the parent kernel does not balance: 1 vs d - 1.
  auto model = std::make_shared<OrientedTree>(3);
  const auto ball = build_ball(model, 2);
  double out = 0, in = 0;
  for (std::uint32_t v = 0; v < ball.size(); ++v) {
    const auto [u1, d1] = model->relative_position(model->identity(), ball.element(v));
    const auto [u2, d2] = model->relative_position(ball.element(v), model->identity());
    out += u1 == 1 && d1 == 0;
    in += u2 == 1 && d2 == 0;
  }
  EXPECT_EQ(out, 1.0);
  EXPECT_EQ(in, 2.0);
}

TEST(SpanningTree, SingleCellAndPath) {
  SimpleGraph path{4, {{0, 1}, {1, 2}, {2, 3}}};
  const auto t = spanning_tree_from_partitions(path, {Partition(4, 0)}, 3);
  EXPECT_EQ(t.tree(), (std::vector<std::size_t>{0, 1, 2}));
  const auto t2 = spanning_tree_from_partitions(path, {{0, 0, 1, 1}, Partition(4, 0)}, 3);
  ASSERT_EQ(t2.levels.size(), 2u);
  EXPECT_EQ(t2.levels[0], (std::vector<std::size_t>{0, 2}));
  EXPECT_TRUE(check_nesting(path, t2));
}

TEST(SpanningTree, DisconnectedCellsAreRefined) {
  // Cell {0, 2} is not connected inside the path; it splits.
  SimpleGraph path{4, {{0, 1}, {1, 2}, {2, 3}}};
  const auto t = spanning_tree_from_partitions(path, {{0, 1, 0, 1}, Partition(4, 0)}, 5);
  EXPECT_TRUE(t.levels[0].empty());
  EXPECT_EQ(t.tree().size(), 3u);
  EXPECT_TRUE(check_nesting(path, t));
}

TEST(SpanningTree, RejectsBadSequences) {
  SimpleGraph path{3, {{0, 1}, {1, 2}}};
  EXPECT_THROW(spanning_tree_from_partitions(path, {}, 1), ConfigError);
  EXPECT_THROW(spanning_tree_from_partitions(path, {{0, 1, 1}}, 1), ConfigError);
  EXPECT_THROW(spanning_tree_from_partitions(path, {{0, 0, 1}, {0, 1, 1}, {0, 0, 0}}, 1), ConfigError);
  SimpleGraph split{3, {{0, 1}}};
  EXPECT_THROW(spanning_tree_from_partitions(split, {{0, 0, 0}}, 1), ConfigError);
}

TEST(SpanningTree, NestedOnLatticeAndUniformOnCycle) {
  for (const auto& name : {"single-cell", "path", "nested-lattice", "cycle4-uniform"}) {
    const auto r = run_oracle("spanning-tree", name);
    EXPECT_TRUE(all_hold(r)) << name;
  }
}

TEST(SpanningTree, NestingCheckCatchesCrossEdges) {
  SimpleGraph path{4, {{0, 1}, {1, 2}, {2, 3}}};
  auto t = spanning_tree_from_partitions(path, {{0, 0, 1, 1}, Partition(4, 0)}, 1);
  t.levels[0] = {0, 1};
  std::string why;
  EXPECT_FALSE(check_nesting(path, t, &why));
  EXPECT_FALSE(why.empty());
}
