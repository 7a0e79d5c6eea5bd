#include <gtest/gtest.h>

#include <cmath>

#include "relperc/estimators.hpp"
#include "relperc/oracles/branching.hpp"
#include "relperc/views.hpp"

using namespace relperc;

namespace {

McOptions mc(std::size_t samples, std::uint64_t seed = 1, unsigned threads = 1) {
  McOptions o;
  o.samples = samples;
  o.base_seed = seed;
  o.threads = threads;
  return o;
}

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (int k = 0; lo + k * step <= hi + 1e-12; ++k) g.push_back(lo + k * step);
  return g;
}

double sigma_at(double q, std::size_t n) { return std::sqrt(std::max(q * (1 - q), 1e-300) / double(n)); }

}  // namespace

// --- branching oracle -------------------------------------------------------

TEST(BranchingOracle, SmallSizesByHand) {
  const double p = 0.3;
  const auto pmf = oracles::tree_cluster_pmf(4, p, 3);
  EXPECT_NEAR(pmf[1], std::pow(1 - p, 4), 1e-15);
  // Root has one open edge, the child has none.
  EXPECT_NEAR(pmf[2], 4 * p * std::pow(1 - p, 3) * std::pow(1 - p, 3), 1e-15);
  const auto tail = oracles::tree_cluster_tail(4, p, 3);
  EXPECT_DOUBLE_EQ(tail[0], 1.0);
  EXPECT_NEAR(tail[1], 1 - pmf[1], 1e-15);
}

TEST(BranchingOracle, SubcriticalMassSumsToOne) {
  const auto pmf = oracles::tree_cluster_pmf(4, 0.2, 400);
  double s = 0;
  for (double x : pmf) s += x;
  EXPECT_NEAR(s, 1.0, 1e-10);
}

TEST(BranchingOracle, MatchesBruteForceOnFreeGroup) {
  // Exact enumeration is out of reach; compare with a large sample instead.
  auto model = make_group("free:2");
  auto view = std::get<ImplicitBall>(make_view(model, 12));
  const auto exact = oracles::tree_cluster_tail(4, 0.3, 6);
  auto seen = view.make_vertex_map<char>();
  std::vector<std::uint64_t> at_least(6, 0);
  const std::size_t N = 40000;
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t c = 0;
    explore_cluster(view, sample_field(7, i), 0.3, view.root(), seen, [&](const GroupElement&) { return ++c < 6; });
    for (std::size_t n = 1; n <= c; ++n) ++at_least[n - 1];
  }
  for (int n = 1; n <= 6; ++n) {
    const double q = exact[std::size_t(n) - 1];
    EXPECT_NEAR(double(at_least[std::size_t(n) - 1]) / N, q, 4 * sigma_at(q, N) + 1e-12) << n;
  }
}

// --- crossing ---------------------------------------------------------------

TEST(Crossing, IntegersStayAboveGrid) {
  auto model = make_group("lattice:1");
  auto ball = build_ball(model, 20);
  CrossingOptions o;
  o.samples = 500;
  const auto r = crossing_sweep(ball, grid(0.5, 0.9, 0.1), o);
  EXPECT_TRUE(r.pc_level.above_grid);
  for (std::size_t j = 1; j < r.reach.size(); ++j) EXPECT_GE(r.reach[j].successes, r.reach[j - 1].successes);
  EXPECT_LT(r.reach.back().estimate(), 0.5);
}

TEST(Crossing, GridEndpoints) {
  auto model = make_group("lattice:2");
  auto ball = build_ball(model, 6);
  CrossingOptions o;
  o.samples = 50;
  const auto r = crossing_sweep(ball, {0.0, 1.0}, o);
  EXPECT_EQ(r.reach[0].successes, 0u);
  EXPECT_EQ(r.reach[1].successes, 50u);
  // All 4 * 6 sphere vertices are reached at p = 1.
  EXPECT_DOUBLE_EQ(r.mass[1], 24.0);
  EXPECT_DOUBLE_EQ(r.mass[0], 0.0);
}

TEST(Crossing, RejectsBadGrid) {
  auto ball = build_ball(make_group("lattice:1"), 4);
  CrossingOptions o;
  EXPECT_THROW(crossing_sweep(ball, {}, o), ConfigError);
  EXPECT_THROW(crossing_sweep(ball, {0.5, 0.4}, o), ConfigError);
  EXPECT_THROW(crossing_sweep(ball, {0.5, 1.2}, o), ConfigError);
}

TEST(Crossing, LevelRuleOrderStatistic) {
  std::vector<double> cross{0.9, 0.1, 0.5, 0.3, 0.7, 2.0, 2.0, 2.0, 2.0, 2.0};
  auto t = detail::level_threshold(cross, 0.3, 1.0);
  EXPECT_DOUBLE_EQ(t.value, 0.5);
  EXPECT_FALSE(t.above_grid);
  t = detail::level_threshold(cross, 0.6, 1.0);
  EXPECT_TRUE(t.above_grid);
}

TEST(Crossing, MassRatioRule) {
  // Outer mass overtakes inner mass at 0.4 and stays ahead.
  std::vector<double> outer{0.4, 0.45, 0.5}, inner{0.1, 0.42};
  auto t = detail::mass_ratio_threshold(outer, inner, 1.0);
  EXPECT_FALSE(t.above_grid);
  EXPECT_DOUBLE_EQ(t.value, 0.45);
  t = detail::mass_ratio_threshold({0.5}, {0.1, 0.2}, 1.0);
  EXPECT_TRUE(t.above_grid);
}

TEST(Crossing, FreeGroupMassRatioNearOneThird) {
  auto model = make_group("free:2");
  auto view = make_view(model, 8);
  CrossingOptions o;
  o.samples = 3000;
  o.rule = PcRule::mass_ratio;
  const auto r = std::visit([&](const auto& g) { return crossing_sweep(g, grid(0.2, 0.45, 0.01), o); }, view);
  EXPECT_NEAR(r.pc().value, 1.0 / 3.0, 0.04);
  EXPECT_GT(r.pc_level.value, r.pc_mass_ratio.value);
}

TEST(Crossing, ThreadCountInvariant) {
  auto ball = build_ball(make_group("lattice:2"), 8);
  CrossingOptions o;
  o.samples = 300;
  o.threads = 1;
  const auto a = curve_table(crossing_sweep(ball, grid(0.3, 0.7, 0.1), o).rows()).str();
  o.threads = 4;
  const auto b = curve_table(crossing_sweep(ball, grid(0.3, 0.7, 0.1), o).rows()).str();
  EXPECT_EQ(a, b);
}

// --- tails ------------------------------------------------------------------

TEST(Tail, FreeGroupMatchesBranchingLaw) {
  auto model = make_group("free:2");
  auto view = std::get<ImplicitBall>(make_view(model, 30));
  const auto h = make_subgroup(model, "all");
  TailOptions o;
  o.samples = 20000;
  o.n_max = 20;
  o.sources = 0;
  const auto tc = tail_curve(view, h, 0.25, o);
  const auto exact = oracles::tree_cluster_tail(4, 0.25, 20);
  for (std::size_t i = 0; i < exact.size(); ++i) {
    EXPECT_NEAR(tc.q_origin[i].estimate(), exact[i], 4 * sigma_at(exact[i], o.samples) + 1e-12) << i + 1;
  }
  EXPECT_TRUE(tc.exp_fit_origin.ok);
  EXPECT_LT(tc.exp_fit_origin.slope, 0.0);
}

TEST(Tail, FitOnExactLawIsLogLinear) {
  for (double p : {0.15, 0.25}) {
    const auto exact = oracles::tree_cluster_tail(4, p, 30);
    std::vector<Proportion> q;
    const std::uint64_t N = 100000;
    for (double v : exact) q.push_back({static_cast<std::uint64_t>(std::llround(v * N)), N});
    const auto fit = detail::fit_tail(q, false);
    ASSERT_TRUE(fit.ok) << p;
    EXPECT_GT(fit.r2, 0.98) << p;
  }
}

TEST(Tail, FitNeedsThreePoints) {
  std::vector<Proportion> q{{100, 100}, {50, 100}, {0, 100}};
  EXPECT_FALSE(detail::fit_tail(q, false).ok);
}

TEST(Tail, Extremes) {
  auto model = make_group("finite:S3");
  auto ball = build_ball(model, 3);
  const auto h = make_subgroup(model, "all");
  TailOptions o;
  o.samples = 20;
  o.n_max = 6;
  o.sources = 2;
  auto tc = tail_curve(ball, h, 0.0, o);
  EXPECT_EQ(tc.q[0].successes, 20u);
  EXPECT_EQ(tc.q[1].successes, 0u);
  tc = tail_curve(ball, h, 1.0, o);
  EXPECT_EQ(tc.q[5].successes, 20u);
}

TEST(Tail, MaxOverSourcesDominatesOrigin) {
  auto model = make_group("lattice:2");
  auto ball = build_ball(model, 10);
  const auto h = make_subgroup(model, "axis:0");
  TailOptions o;
  o.samples = 400;
  o.n_max = 8;
  o.sources = 8;
  const auto tc = tail_curve(ball, h, 0.45, o);
  for (std::size_t i = 0; i < tc.q.size(); ++i) EXPECT_GE(tc.q[i].successes, tc.q_origin[i].successes);
  for (std::size_t i = 1; i < tc.q.size(); ++i) EXPECT_LE(tc.q_origin[i].successes, tc.q_origin[i - 1].successes);
}

TEST(Tail, OrientedTreeTailViewMatchesFullBall) {
  // Dead-end pruning must not change |K_o ∩ L_0| below the cap.
  auto model = make_group("tree-oriented:3");
  const auto h = make_subgroup(model, "level:0");
  auto full = build_ball(model, 8);
  auto pruned = std::get<BallGraph>(make_tail_view(model, 8, h));
  EXPECT_LT(pruned.size(), full.size());
  TailOptions o;
  o.samples = 300;
  o.n_max = 12;
  o.sources = 0;
  const auto a = tail_curve(full, h, 0.6, o);
  const auto b = tail_curve(pruned, h, 0.6, o);
  for (std::size_t i = 0; i < a.q.size(); ++i) EXPECT_EQ(a.q_origin[i].successes, b.q_origin[i].successes) << i;
}

// --- kappa ------------------------------------------------------------------

TEST(Kappa, FreeGroupIsPowerOfP) {
  auto model = make_group("free:2");
  auto view = std::get<ImplicitBall>(make_view(model, 16));
  KappaOptions o;
  o.samples = 20000;
  o.n_max = 8;
  const auto kc = kappa_curve(view, 0.3, o);
  for (int n = 1; n <= 8; ++n) {
    const double e = std::pow(0.3, n);
    EXPECT_NEAR(kc.kappa[std::size_t(n) - 1].estimate(), e, 4 * sigma_at(e, o.samples) + 1e-12) << n;
  }
  EXPECT_EQ(kc.violations, 0);
  EXPECT_LE(kc.growth_rate, 1.0 / 3.0 + 0.02);
}

TEST(Kappa, LatticeExtremesAndMonotone) {
  auto model = make_group("lattice:2");
  auto ball = build_ball(model, 10);
  KappaOptions o;
  o.samples = 50;
  o.n_max = 4;
  auto kc = kappa_curve(ball, 1.0, o);
  for (const auto& k : kc.kappa) EXPECT_EQ(k.successes, 50u);
  kc = kappa_curve(ball, 0.0, o);
  for (const auto& k : kc.kappa) EXPECT_EQ(k.successes, 0u);
  kc = kappa_curve(ball, 0.6, o);
  for (std::size_t i = 1; i < kc.kappa.size(); ++i) EXPECT_LE(kc.kappa[i].successes, kc.kappa[i - 1].successes);
}

TEST(Kappa, PairBatchAgreesWithTwoPoint) {
  auto model = make_group("lattice:2");
  auto ball = build_ball(model, 8);
  const GroupElement x({1, 0}), y({-1, 2});
  const auto hits = pair_tallies(ball, {{x, y}}, 0.55, mc(400, 3));
  TwoPointOptions t;
  t.samples = 400;
  t.base_seed = 3;
  t.margin = 0;
  const auto tp = two_point(ball, 0.55, x, y, t);
  EXPECT_EQ(hits[0], tp.successes);
}

// --- trichotomy -------------------------------------------------------------

TEST(Trichotomy, MatchesPartitionCounts) {
  auto model = make_group("lattice:2");
  auto ball = build_ball(model, 6);
  const auto h = make_subgroup(model, "axis:0");
  TrichotomyOptions o;
  o.samples = 60;
  o.m = 2;
  const std::vector<double> ps{0.0, 0.3, 0.5, 0.7, 1.0};
  const auto tr = trichotomy_scan(ball, h, ps, o);
  const auto mask = ball.mask(h);
  for (std::size_t j = 0; j < ps.size(); ++j) {
    std::array<std::uint64_t, 3> hist{0, 0, 0};
    for (std::size_t i = 0; i < o.samples; ++i) {
      const auto cfg = sample(ball, sample_field(o.base_seed, i), ps[j]);
      const std::vector<std::vector<char>> masks{mask};
      const auto cp = clusters(cfg, masks);
      hist[std::min<std::size_t>(relative_cluster_counts(cp, 0, 2), 2)] += 1;
    }
    EXPECT_EQ(hist, tr.hist[j]) << ps[j];
  }
  EXPECT_EQ(tr.hist.front()[0], o.samples);
  EXPECT_EQ(tr.hist.back()[1], o.samples);
}

// --- uniqueness probe -------------------------------------------------------

TEST(PuProbe, DecisionRule) {
  int halvings = 0;
  std::vector<Proportion> decay{{9000, 10000}, {4000, 10000}, {1500, 10000}, {300, 10000}};
  EXPECT_EQ(detail::pu_decide(decay, halvings), PuVerdict::decay);
  EXPECT_GE(halvings, 2);
  std::vector<Proportion> flat{{9000, 10000}, {8000, 10000}, {7800, 10000}, {7700, 10000}};
  EXPECT_EQ(detail::pu_decide(flat, halvings), PuVerdict::bounded_below);
  std::vector<Proportion> unclear{{10, 20}, {4, 20}, {3, 20}};
  EXPECT_EQ(detail::pu_decide(unclear, halvings), PuVerdict::inconclusive);
}

TEST(PuProbe, FreeGroupDecays) {
  auto model = make_group("free:2");
  auto view = std::get<ImplicitBall>(make_view(model, 64));
  PuOptions o;
  o.samples = 3000;
  const auto r = pu_probe(view, make_subgroup(model, "all"), 0.9, o);
  EXPECT_EQ(r.verdict, PuVerdict::decay);
  EXPECT_FALSE(r.theta.has_value());
}

TEST(PuProbe, PlaneBoundedBelow) {
  auto model = make_group("lattice:2");
  auto ball = build_ball(model, 24);
  PuOptions o;
  o.samples = 1000;
  o.distances = {1, 2, 4, 8, 16};
  const auto r = pu_probe(ball, make_subgroup(model, "all"), 0.7, o);
  EXPECT_EQ(r.verdict, PuVerdict::bounded_below);
  ASSERT_TRUE(r.theta.has_value());
  // tau(x, y) >= theta^2 up to noise (FKG).
  EXPECT_GT(r.min_tau.back().estimate(), std::pow(r.theta->estimate(), 2) - 0.06);
}

TEST(PuProbe, SubgroupPairsStayInSubgroup) {
  auto model = make_group("lattice:2");
  auto ball = build_ball(model, 12);
  PuOptions o;
  o.samples = 200;
  o.distances = {1, 2, 4};
  const auto r = pu_probe(ball, make_subgroup(model, "axis:1"), 0.6, o);
  EXPECT_EQ(r.min_tau.size(), 3u);
  EXPECT_NE(r.verdict, PuVerdict::decay);
}

TEST(PuProbe, RejectsSmallBall) {
  auto model = make_group("lattice:2");
  auto ball = build_ball(model, 10);
  PuOptions o;
  o.samples = 10;
  EXPECT_THROW(pu_probe(ball, make_subgroup(model, "all"), 0.5, o), ConfigError);
}
