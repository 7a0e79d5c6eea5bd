#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "relperc/hash.hpp"
#include "relperc/oracles/decision.hpp"
#include "relperc/oracles/integral.hpp"
#include "relperc/oracles/mtp.hpp"
#include "relperc/oracles/spanning.hpp"

namespace relperc::oracles {

struct BuiltinOracle {
  std::string instance;
  std::function<std::vector<OracleReport>(unsigned threads)> run;
};

namespace detail {

inline constexpr std::uint64_t kSuiteSeed = 0x0AC1E5EEDull;

inline double suite_uniform(std::uint64_t stream, std::uint64_t i, double lo, double hi) {
  return lo + (hi - lo) * keyed_uniform(kSuiteSeed, stream, i);
}

/// Connected random system with at most `max_edges` edges.
inline FiniteSystem suite_system(std::uint64_t i, std::uint32_t min_vertices, std::uint32_t max_vertices,
                                 std::uint32_t max_edges) {
  const auto V = min_vertices + static_cast<std::uint32_t>(bounded(keyed_draw(kSuiteSeed, 1, i),
                                                                   max_vertices - min_vertices + 1));
  const std::uint32_t cap = std::min(max_edges, V * (V - 1) / 2);
  const auto E = (V - 1) + static_cast<std::uint32_t>(bounded(keyed_draw(kSuiteSeed, 2, i), cap - (V - 1) + 1));
  return random_system(hash_combine(kSuiteSeed, i), V, E);
}

inline std::vector<OracleReport> one(OracleReport r) { return {std::move(r)}; }

inline std::vector<BuiltinOracle> russo_builtins() {
  std::vector<BuiltinOracle> out;
  out.push_back({"single-edge", [](unsigned t) {
                   const auto s = path_system(2);
                   return one(russo_check(s, edge_event(0), 0.37, t));
                 }});
  out.push_back({"series2", [](unsigned t) {
                   const auto s = path_system(3);
                   return one(russo_check(s, connection_event(s, 0, 2), 0.5, t));
                 }});
  out.push_back({"random", [](unsigned t) {
                   std::vector<OracleReport> r;
                   for (std::uint64_t i = 0; i < 20; ++i) {
                     const auto s = suite_system(100 + i, 4, 7, 10);
                     const double p = suite_uniform(3, i, 0.05, 0.95);
                     const Event f = i % 2 ? cluster_mass_event(s, 0, std::min<std::uint32_t>(2, std::uint32_t(s.A.size())))
                                           : connection_event(s, 0, s.vertices - 1);
                     r.push_back(russo_check(s, f, p, t));
                   }
                   return r;
                 }});
  return out;
}

inline std::vector<BuiltinOracle> osss_builtins() {
  std::vector<BuiltinOracle> out;
  out.push_back({"single-edge", [](unsigned t) {
                   const auto s = path_system(2);
                   return one(osss_check(s, edge_event(0), edge_event(0), {{0, std::nullopt, 1}}, 0.3, 0, t));
                 }});
  out.push_back({"triangle", [](unsigned t) {
                   const auto s = cycle_system(3);
                   const Event f = connection_event(s, 0, 1);
                   return one(osss_check(s, f, f, {{0, std::nullopt, std::nullopt}}, 0.5, 0, t));
                 }});
  out.push_back({"constant", [](unsigned t) {
                   const auto s = cycle_system(3);
                   return one(osss_check(s, constant_event(true), connection_event(s, 0, 1), {{0, std::nullopt, 1}},
                                         0.5, 0, t));
                 }});
  out.push_back({"ghost", [](unsigned t) {
                   std::vector<OracleReport> r;
                   for (std::uint64_t i = 0; i < 17; ++i) {
                     const auto s = suite_system(200 + i, 4, 6, 9);
                     const auto n = std::min<std::uint32_t>(2 + i % 2, std::uint32_t(s.A.size()));
                     const double p = suite_uniform(4, i, 0.1, 0.9);
                     r.push_back(osss_check(s, cluster_mass_event(s, 0, n), ghost_hit_event(s, 0), ghost_forest(s), p,
                                            n, t));
                   }
                   return r;
                 }});
  return out;
}

inline std::vector<BuiltinOracle> integral_builtins() {
  std::vector<BuiltinOracle> out;
  out.push_back({"path5", [](unsigned t) {
                   auto s = path_system(5);
                   s.A = {0, 4};
                   return one(integral_inequality_check(s, 2, 0.3, 0.6, t));
                 }});
  out.push_back({"equal-p", [](unsigned t) {
                   auto s = path_system(5);
                   s.A = {0, 4};
                   return one(integral_inequality_check(s, 2, 0.4, 0.4, t));
                 }});
  out.push_back({"random", [](unsigned t) {
                   std::vector<OracleReport> r;
                   for (std::uint64_t i = 0; i < 8; ++i) {
                     const auto s = suite_system(300 + i, 4, 6, 9);
                     const auto n = std::min<std::uint32_t>(2 + i % 2, std::uint32_t(s.A.size()));
                     const double p1 = suite_uniform(5, i, 0.1, 0.5);
                     const double p2 = p1 + suite_uniform(6, i, 0.05, 0.4);
                     r.push_back(integral_inequality_check(s, n, p1, p2, t));
                   }
                   return r;
                 }});
  return out;
}

inline std::vector<OracleReport> kgh_instances(const std::string& group, const std::string& h_dsl,
                                               const std::vector<std::string>& gammas,
                                               const std::vector<std::uint32_t>& ns, const std::vector<double>& ps) {
  const auto model = make_group(group);
  const auto h = make_subgroup(model, h_dsl);
  std::vector<OracleReport> r;
  for (const auto& g : gammas) {
    for (auto n : ns) {
      for (double p : ps) {
        auto k = kgh_identity_check(model, h, model->parse(g), n, p, group + "-" + h_dsl);
        r.push_back(k.inequality);
        r.push_back(k.transport);
      }
    }
  }
  return r;
}

inline std::vector<BuiltinOracle> kgh_builtins() {
  std::vector<BuiltinOracle> out;
  out.push_back({"s3", [](unsigned) {
                   auto r = kgh_instances("finite:S3", "gen:(123)", {"e", "(12)", "(123)"}, {2}, {0.5});
                   auto more = kgh_instances("finite:S3", "gen:(12)", {"(13)", "(123)"}, {1, 2}, {0.3, 0.5});
                   r.insert(r.end(), more.begin(), more.end());
                   return r;
                 }});
  out.push_back({"d4", [](unsigned) {
                   auto r = kgh_instances("finite:D4", "gen:r", {"s", "rs"}, {2, 3}, {0.4});
                   auto more = kgh_instances("finite:D4", "gen:s", {"r", "rs", "r2"}, {1, 2}, {0.5});
                   r.insert(r.end(), more.begin(), more.end());
                   return r;
                 }});
  return out;
}

/// 1{x <-> y, y in xH} / |K_x ∩ xH| on a whole finite group.
inline TransportKernel cluster_share_kernel(const BallGraph& ball, const SubgroupSpec& h) {
  const auto V = static_cast<std::uint32_t>(ball.size());
  const GroupModel& m = ball.model();
  std::vector<std::vector<char>> same(V, std::vector<char>(V));
  for (std::uint32_t x = 0; x < V; ++x) {
    const auto xi = m.invert(ball.element(x));
    for (std::uint32_t y = 0; y < V; ++y) same[x][y] = h.contains(m.multiply(xi, ball.element(y)));
  }
  auto sys = std::make_shared<FiniteSystem>(system_from_ball(ball, "cluster-share"));
  return [sys, same](std::uint64_t w, std::uint32_t x, std::uint32_t y) -> double {
    if (!same[x][y]) return 0.0;
    thread_local std::vector<std::uint32_t> label;
    component_labels(*sys, w, label);
    if (label[x] != label[y]) return 0.0;
    std::uint32_t c = 0;
    for (std::uint32_t z = 0; z < sys->vertices; ++z) c += label[z] == label[x] && same[x][z];
    return 1.0 / c;
  };
}

inline std::vector<BuiltinOracle> mtp_builtins() {
  std::vector<BuiltinOracle> out;
  out.push_back({"adjacency", [](unsigned) {
                   auto s = suite_system(400, 6, 6, 9);
                   s.A.resize(s.vertices);
                   std::iota(s.A.begin(), s.A.end(), 0u);
                   auto edges = s.edges;
                   TransportKernel f = [edges](std::uint64_t w, std::uint32_t x, std::uint32_t y) {
                     for (std::size_t e = 0; e < edges.size(); ++e) {
                       const auto [a, b] = edges[e];
                       if (((w >> e) & 1) && ((a == x && b == y) || (a == y && b == x))) return 1.0;
                     }
                     return 0.0;
                   };
                   return one(mtp_uniform_check(s, f, true, 0.45));
                 }});
  out.push_back({"tree-leaf", [](unsigned) {
                   // Asymmetric tree: a path 0-1-2-3 with a pendant leaf 4 at 1.
                   FiniteSystem s{"tree5", 5, {{0, 1}, {1, 2}, {2, 3}, {1, 4}}, {0, 1, 2, 3, 4}};
                   auto sys = std::make_shared<FiniteSystem>(s);
                   TransportKernel f = [sys](std::uint64_t w, std::uint32_t x, std::uint32_t y) {
                     const bool leaf = y == 0 || y == 3 || y == 4;
                     if (!leaf || x == y) return 0.0;
                     thread_local std::vector<std::uint32_t> label;
                     component_labels(*sys, w, label);
                     return label[x] == label[y] ? 1.0 : 0.0;
                   };
                   return one(mtp_uniform_check(s, f, true, 0.6));
                 }});
  out.push_back({"d4-rotations", [](unsigned) {
                   const auto model = make_group("finite:D4");
                   const auto h = make_subgroup(model, "gen:r");
                   const auto ball = whole_group_ball(model);
                   return one(mtp_subgroup_check(model, h, cluster_share_kernel(ball, h), true, 0.4, "D4-gen:r"));
                 }});
  out.push_back({"s3-transposition", [](unsigned) {
                   const auto model = make_group("finite:S3");
                   const auto h = make_subgroup(model, "gen:(12)");
                   const auto ball = whole_group_ball(model);
                   return one(mtp_subgroup_check(model, h, cluster_share_kernel(ball, h), true, 0.5, "S3-gen:(12)"));
                 }});
  return out;
}

inline std::vector<BuiltinOracle> tilted_builtins() {
  auto both = [](const LevelKernel& k, const std::string& name) {
    return std::vector<OracleReport>{tilted_mtp_check(3, 6, k, name), tilted_mtp_check(4, 6, k, name)};
  };
  std::vector<BuiltinOracle> out;
  out.push_back({"parent", [both](unsigned) {
                   return both([](int up, int down) { return up == 1 && down == 0 ? 1.0 : 0.0; }, "parent");
                 }});
  out.push_back({"grandparent", [both](unsigned) {
                   return both([](int up, int down) { return up == 2 && down == 0 ? 1.0 : 0.0; }, "grandparent");
                 }});
  out.push_back({"symmetric", [both](unsigned) {
                   return both([](int up, int down) { return up == down && up <= 2 ? 1.0 : 0.0; }, "symmetric");
                 }});
  out.push_back({"random-kernel", [both](unsigned) {
                   return both(
                       [](int up, int down) {
                         if (up + down > 4) return 0.0;
                         return std::ldexp(std::floor(keyed_uniform(kSuiteSeed, 7, std::uint64_t(up * 16 + down)) * 1024), -10);
                       },
                       "random-kernel");
                 }});
  return out;
}

inline OracleReport spanning_structure_report(const std::string& instance, const SimpleGraph& g,
                                              const std::vector<Partition>& pis, std::uint64_t seed) {
  const auto t = spanning_tree_from_partitions(g, pis, seed);
  OracleReport r = identity_report("spanning-tree", instance, double(t.tree().size()), double(g.vertices) - 1);
  r.holds = r.holds && check_nesting(g, t);
  return r;
}

inline std::vector<BuiltinOracle> spanning_builtins() {
  std::vector<BuiltinOracle> out;
  out.push_back({"single-cell", [](unsigned) {
                   const auto g = graph_from_ball(build_ball(make_group("lattice:2"), 3));
                   return one(spanning_structure_report("lattice2-R3-single-cell", g, {Partition(g.vertices, 0)}, 1));
                 }});
  out.push_back({"path", [](unsigned) {
                   SimpleGraph g{6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}}};
                   return one(spanning_structure_report("path6-two-levels", g, {{0, 0, 1, 1, 2, 2}, Partition(6, 0)}, 2));
                 }});
  out.push_back({"nested-lattice", [](unsigned) {
                   const auto ball = build_ball(make_group("lattice:2"), 4);
                   const auto g = graph_from_ball(ball);
                   // Quadrant cells, then half-planes, then everything.
                   Partition quad(g.vertices), half(g.vertices);
                   for (std::uint32_t v = 0; v < g.vertices; ++v) {
                     const auto& x = ball.element(v).normal_form;
                     half[v] = x[0] >= 0;
                     quad[v] = 2 * half[v] + (x[1] >= 0);
                   }
                   std::vector<OracleReport> r;
                   for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                     r.push_back(spanning_structure_report("lattice2-R4-quadrants-s" + std::to_string(seed), g,
                                                           {quad, half, Partition(g.vertices, 0)}, seed));
                   }
                   return r;
                 }});
  out.push_back({"cycle4-uniform", [](unsigned) {
                   // Each of the 4 spanning trees of C4 drops one edge; frequencies
                   // over 10^4 seeds must be uniform within 3 sigma.
                   SimpleGraph g{4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}};
                   constexpr int kSeeds = 10000;
                   std::array<int, 4> dropped{};
                   for (int s = 0; s < kSeeds; ++s) {
                     const auto t = spanning_tree_from_partitions(g, {Partition(4, 0)}, std::uint64_t(s));
                     const auto& e = t.tree();
                     for (std::size_t i = 0; i < 4; ++i) dropped[i] += !std::binary_search(e.begin(), e.end(), i);
                   }
                   const double sigma = std::sqrt(0.25 * 0.75 / kSeeds);
                   double worst = 0.0;
                   for (int d : dropped) worst = std::max(worst, std::abs(double(d) / kSeeds - 0.25) / sigma);
                   return one(inequality_report("spanning-tree", "cycle4-uniform-zscore", worst, 3.0));
                 }});
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& oracle_names() {
  static const std::vector<std::string> names{"russo", "osss", "integral", "kgh", "mtp", "tilted-mtp", "spanning-tree"};
  return names;
}

inline std::vector<BuiltinOracle> oracle_builtins(const std::string& name) {
  if (name == "russo") return detail::russo_builtins();
  if (name == "osss") return detail::osss_builtins();
  if (name == "integral") return detail::integral_builtins();
  if (name == "kgh") return detail::kgh_builtins();
  if (name == "mtp") return detail::mtp_builtins();
  if (name == "tilted-mtp") return detail::tilted_builtins();
  if (name == "spanning-tree") return detail::spanning_builtins();
  std::string known;
  for (const auto& n : oracle_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown oracle '" + name + "' (known: " + known + ")");
}

/// Runs one builtin instance, or all of them when `builtin` is empty.
inline std::vector<OracleReport> run_oracle(const std::string& name, const std::string& builtin = "",
                                            unsigned threads = 1) {
  std::vector<OracleReport> out;
  bool found = false;
  for (const auto& b : oracle_builtins(name)) {
    if (!builtin.empty() && b.instance != builtin) continue;
    found = true;
    auto r = b.run(threads);
    out.insert(out.end(), r.begin(), r.end());
  }
  if (!found) {
    std::string known;
    for (const auto& b : oracle_builtins(name)) known += (known.empty() ? "" : ", ") + b.instance;
    throw ConfigError("oracle " + name + " has no builtin '" + builtin + "' (known: " + known + ")");
  }
  return out;
}

inline bool all_hold(const std::vector<OracleReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const OracleReport& r) { return r.holds; });
}

}  // namespace relperc::oracles
