#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relperc/ball.hpp"
#include "relperc/csv.hpp"
#include "relperc/error.hpp"
#include "relperc/hash.hpp"
#include "relperc/parallel.hpp"
#include "relperc/percolation.hpp"
#include "relperc/stats.hpp"
#include "relperc/subgroup.hpp"
#include "relperc/union_find.hpp"

namespace relperc {

/// Steps are x -> x * s with s uniform among `generators`, or uniform among
/// the Cayley neighbours when `generators` is empty (the ambient walk).
struct WalkOptions {
  std::uint64_t seed = 1;
  std::size_t steps = 1000;
  std::vector<GroupElement> generators;
};

/// Positions X_0..X_{T-1}: the T times that frequencies average over.
struct WalkPath {
  std::vector<std::uint32_t> positions;
  /// Proposals rejected for leaving the ball.
  std::uint64_t reflections = 0;
  std::uint64_t proposals = 0;

  double reflection_rate() const { return proposals ? double(reflections) / double(proposals) : 0.0; }
  /// Boundary effects are no longer negligible.
  bool reflection_flag() const { return reflection_rate() > 0.01; }
};

namespace detail {

inline GroupElement propose_step(const GroupModel& m, const GroupElement& x, const std::vector<GroupElement>& gens,
                                 std::vector<GroupElement>& nb, std::uint64_t draw) {
  if (!gens.empty()) return m.multiply(x, gens[bounded(draw, gens.size())]);
  m.neighbors(x, nb);
  return nb[bounded(draw, nb.size())];
}

}  // namespace detail

/// Walk inside a materialized ball. Proposals leaving the ball are redrawn
/// (reflection by resampling); draw n of step t is keyed_draw(seed, t, n).
inline WalkPath run_walk(const BallGraph& ball, std::uint32_t start, const WalkOptions& opt) {
  const GroupModel& m = ball.model();
  if (!opt.generators.empty() && !m.is_group()) throw ConfigError("subgroup walks need a group model");
  WalkPath path;
  path.positions.reserve(opt.steps);
  std::uint32_t x = start;
  std::vector<GroupElement> nb;
  const std::size_t choices = opt.generators.empty() ? 0 : opt.generators.size();
  for (std::size_t t = 0; t < opt.steps; ++t) {
    path.positions.push_back(x);
    if (t + 1 == opt.steps) break;
    const GroupElement& here = ball.element(x);
    std::optional<std::uint32_t> next;
    for (std::uint64_t attempt = 0; !next; ++attempt) {
      ++path.proposals;
      next = ball.locate(detail::propose_step(m, here, opt.generators, nb, keyed_draw(opt.seed, t, attempt)));
      if (next) break;
      ++path.reflections;
      if (attempt == 64) {
        // Rejection keeps failing: check whether any move stays inside.
        bool any = false;
        const std::size_t k = choices ? choices : (m.neighbors(here, nb), nb.size());
        for (std::size_t i = 0; i < k && !any; ++i) {
          any = ball.locate(choices ? m.multiply(here, opt.generators[i]) : nb[i]).has_value();
        }
        if (!any) throw WalkTrapped("walk trapped at " + m.format(here) + ": no move stays in the ball");
      }
    }
    x = *next;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Cluster frequencies along a path.

/// Integer visit counts per cluster id; they sum to the path length.
inline std::vector<std::uint64_t> cluster_hits(const WalkPath& path, const ClusterPartition& cp) {
  std::vector<std::uint64_t> hits(cp.cluster_count(), 0);
  for (auto v : path.positions) ++hits[cp.find(v)];
  return hits;
}

/// Frequency of a set of clusters: visits / T.
inline double frequency(const WalkPath& path, const ClusterPartition& cp, const std::vector<char>& cluster_set) {
  std::uint64_t n = 0;
  for (auto v : path.positions) n += cluster_set[cp.find(v)] != 0;
  return path.positions.empty() ? 0.0 : double(n) / double(path.positions.size());
}

/// Cluster with the most visits; ties broken uniformly with the tie seed.
inline std::uint32_t max_frequency_cluster(const std::vector<std::uint64_t>& hits, std::uint64_t tie_seed) {
  if (hits.empty()) throw ConfigError("max_frequency_cluster: no clusters");
  const std::uint64_t best = *std::max_element(hits.begin(), hits.end());
  std::vector<std::uint32_t> arg;
  for (std::uint32_t i = 0; i < hits.size(); ++i) {
    if (hits[i] == best) arg.push_back(i);
  }
  return arg[bounded(keyed_draw(tie_seed, 0, 0), arg.size())];
}

struct FrequencyReport {
  std::uint32_t cluster = 0;
  std::uint64_t hits = 0;
  std::size_t steps = 0;
  double frequency = 0.0;
  /// Moving-block bootstrap of the frequency (block ceil(sqrt T)).
  BootstrapResult bootstrap;
  /// Vertex density of the same cluster in the ball.
  double density = 0.0;
  std::uint64_t reflections = 0;
  bool reflection_flag = false;
};

inline FrequencyReport frequency_report(const WalkPath& path, const ClusterPartition& cp, std::uint32_t cluster,
                                        std::size_t ball_size, std::uint64_t bootstrap_seed, int resamples = 200) {
  FrequencyReport r;
  r.cluster = cluster;
  r.steps = path.positions.size();
  std::vector<char> series(path.positions.size());
  for (std::size_t t = 0; t < series.size(); ++t) series[t] = cp.find(path.positions[t]) == cluster;
  r.hits = static_cast<std::uint64_t>(std::count(series.begin(), series.end(), 1));
  r.frequency = r.steps ? double(r.hits) / double(r.steps) : 0.0;
  const auto block = static_cast<std::size_t>(std::ceil(std::sqrt(double(std::max<std::size_t>(r.steps, 1)))));
  r.bootstrap = block_bootstrap(series, block, resamples, bootstrap_seed);
  r.density = double(cp.cluster(cluster).size) / double(ball_size);
  r.reflections = path.reflections;
  r.reflection_flag = path.reflection_flag();
  return r;
}

/// Per-seed frequency runs: field base_seed + i, a walk from the identity of
/// `steps` steps, then the max-frequency cluster and its bootstrap interval.
struct FrequencyOptions {
  std::uint64_t base_seed = 1;
  std::size_t seeds = 1;
  std::size_t steps = 100000;
  unsigned threads = 1;
  /// Walk on the Cayley graph instead of with the subgroup generators.
  bool ambient = false;
  int resamples = 200;
};

struct FrequencyRecord {
  std::uint64_t seed = 0;
  FrequencyReport report;
  /// The selected cluster is the largest cluster of the ball.
  bool is_largest = false;
  /// Integer visit counts over all clusters add up to T, and the frequency
  /// of the union of all clusters is exactly 1.
  bool additive = false;
};

inline std::vector<FrequencyRecord> frequency_experiment(const BallGraph& ball, const SubgroupSpec& h, double p,
                                                         const FrequencyOptions& opt) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
  if (opt.seeds < 1 || opt.steps < 1) throw ConfigError("frequency experiment needs seeds >= 1 and T >= 1");
  WalkOptions wo;
  wo.steps = opt.steps;
  if (!opt.ambient) {
    if (h.generators.empty()) throw ConfigError("subgroup " + h.label + " has no generators to walk with");
    wo.generators = h.generators;
  }
  const auto start = ball.locate(ball.model().identity());
  if (!start) throw ConfigError("the identity is not in the ball");
  const std::uint64_t walk_base = opt.base_seed ^ 0x3A1C'5EED'0000'0000ULL;
  std::vector<FrequencyRecord> out(opt.seeds);
  parallel_for(opt.seeds, opt.threads, [&](std::size_t i) {
    const auto cp = clusters(sample(ball, sample_field(opt.base_seed, i), p));
    WalkOptions w = wo;
    w.seed = walk_base + i;
    const auto path = run_walk(ball, *start, w);
    const auto hits = cluster_hits(path, cp);
    const auto best = max_frequency_cluster(hits, hash_combine(walk_base + i, 0x7115));
    FrequencyRecord& r = out[i];
    r.seed = opt.base_seed + i;
    r.report = frequency_report(path, cp, best, ball.size(), hash_combine(walk_base + i, 0xB007), opt.resamples);
    std::uint32_t largest = 0;
    for (std::uint32_t c = 0; c < cp.cluster_count(); ++c) {
      if (cp.cluster(c).size > cp.cluster(largest).size) largest = c;
    }
    r.is_largest = cp.cluster(best).size == cp.cluster(largest).size;
    std::uint64_t total = 0;
    for (auto x : hits) total += x;
    r.additive = total == path.positions.size() &&
                 frequency(path, cp, std::vector<char>(cp.cluster_count(), 1)) == 1.0;
  });
  return out;
}

inline CsvTable frequency_table(const std::vector<FrequencyRecord>& records) {
  CsvTable t;
  t.header = {"seed", "T", "cluster_id", "frequency", "ci_low", "ci_high", "reflections", "density", "largest"};
  for (const auto& r : records) {
    const auto& f = r.report;
    t.rows.push_back({format_number(r.seed), format_number(std::uint64_t(f.steps)), format_number(std::uint64_t(f.cluster)),
                      format_number(f.frequency), format_number(f.bootstrap.ci.low), format_number(f.bootstrap.ci.high),
                      format_number(f.reflections), format_number(f.density), r.is_largest ? "1" : "0"});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Visits to the starting cluster.

struct VisitOptions {
  std::uint64_t base_seed = 1;
  std::size_t seeds = 200;
  std::vector<std::size_t> horizons{1000, 2000, 4000, 8000};
  unsigned threads = 1;
  /// Ball radius for non-tree models (trees are walked without a ball).
  int radius = 0;
};

struct VisitResult {
  double p = 0.0;
  std::vector<std::size_t> horizons;
  /// Mean over seeds of the fraction of times t < T with X_t in K(X_0).
  std::vector<SampleSummary> fraction;
  /// Paired one-sided test: fraction(T_k) - fraction(T_{k+1}) > 3 sigma.
  std::vector<SampleSummary> drop;
  std::vector<char> drop_significant;
  SampleSummary distinct_clusters;
  SampleSummary reentries;
  std::uint64_t reflections = 0;

  bool strictly_decreasing() const {
    return !drop_significant.empty() &&
           std::all_of(drop_significant.begin(), drop_significant.end(), [](char c) { return c != 0; });
  }

  std::vector<CurveRow> rows() const {
    std::vector<CurveRow> out;
    const auto n = static_cast<std::uint64_t>(fraction.empty() ? 0 : fraction[0].n);
    for (std::size_t k = 0; k < horizons.size(); ++k) {
      const auto& f = fraction[k];
      out.push_back({"start_cluster_fraction", p, double(horizons[k]), f.mean, f.mean - 3 * f.stderr_,
                     f.mean + 3 * f.stderr_, n});
    }
    for (std::size_t k = 0; k < drop.size(); ++k) {
      const auto& d = drop[k];
      out.push_back({"fraction_drop", p, double(horizons[k + 1]), d.mean, d.mean - 3 * d.stderr_,
                     d.mean + 3 * d.stderr_, n});
    }
    const std::size_t T = horizons.empty() ? 0 : horizons.back();
    out.push_back({"distinct_clusters", p, double(T), distinct_clusters.mean,
                   distinct_clusters.mean - 3 * distinct_clusters.stderr_,
                   distinct_clusters.mean + 3 * distinct_clusters.stderr_, n});
    out.push_back({"reentries", p, double(T), reentries.mean, reentries.mean - 3 * reentries.stderr_,
                   reentries.mean + 3 * reentries.stderr_, n});
    return out;
  }
};

namespace detail {

struct VisitTrace {
  /// in_start[t]: X_t lies in the cluster of X_0.
  std::vector<char> in_start;
  std::size_t distinct = 0;
  std::size_t reentries = 0;
  std::uint64_t reflections = 0;
};

inline void summarize_trace(VisitTrace& tr, const std::vector<std::uint32_t>& labels) {
  tr.in_start.resize(labels.size());
  std::vector<std::uint32_t> roots(labels);
  std::sort(roots.begin(), roots.end());
  tr.distinct = static_cast<std::size_t>(std::unique(roots.begin(), roots.end()) - roots.begin());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    tr.in_start[t] = labels[t] == labels[0];
    if (t && tr.in_start[t] && !tr.in_start[t - 1]) ++tr.reentries;
  }
}

/// On a tree every edge between two visited vertices has been traversed, so
/// joining open traversed edges reproduces the clusters of visited vertices.
inline VisitTrace tree_trace(const GroupModel& m, const CouplingField& field, double p, std::uint64_t walk_seed,
                             std::size_t steps) {
  HashVertexMap<std::uint32_t> index;
  std::vector<std::uint32_t> pos;
  pos.reserve(steps);
  UnionFind uf;
  uf.reset(steps);
  std::vector<GroupElement> nb;
  GroupElement x = m.identity();
  std::uint32_t next_id = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    auto [slot, inserted] = index.try_emplace(x, next_id);
    if (inserted) ++next_id;
    const std::uint32_t id = *slot;
    pos.push_back(id);
    if (t + 1 == steps) break;
    m.neighbors(x, nb);
    GroupElement y = nb[bounded(keyed_draw(walk_seed, t, 0), nb.size())];
    if (field.open(edge_key(x, y), p)) {
      auto [ys, yin] = index.try_emplace(y, next_id);
      if (yin) ++next_id;
      uf.unite(id, *ys);
    }
    x = std::move(y);
  }
  std::vector<std::uint32_t> labels(pos.size());
  for (std::size_t t = 0; t < pos.size(); ++t) labels[t] = uf.find(pos[t]);
  VisitTrace tr;
  summarize_trace(tr, labels);
  return tr;
}

inline VisitTrace ball_trace(const BallGraph& ball, const CouplingField& field, double p, std::uint64_t walk_seed,
                             std::size_t steps, UnionFind& uf) {
  union_open_edges(ball, field, p, uf);
  WalkOptions wo;
  wo.seed = walk_seed;
  wo.steps = steps;
  const auto path = run_walk(ball, 0, wo);
  std::vector<std::uint32_t> labels(path.positions.size());
  for (std::size_t t = 0; t < labels.size(); ++t) labels[t] = uf.find(path.positions[t]);
  VisitTrace tr;
  summarize_trace(tr, labels);
  tr.reflections = path.reflections;
  return tr;
}

}  // namespace detail

/// Seed i uses the field base_seed + i and an independent walk stream.
inline VisitResult visit_count_experiment(const ModelPtr& model, double p, const VisitOptions& opt) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
  if (opt.horizons.empty() || opt.seeds < 2) throw ConfigError("visit experiment needs horizons and >= 2 seeds");
  if (!std::is_sorted(opt.horizons.begin(), opt.horizons.end()) || opt.horizons.front() < 1) {
    throw ConfigError("horizons must be increasing and positive");
  }
  const std::size_t T = opt.horizons.back();
  const bool tree = model->is_tree();
  std::optional<BallGraph> ball;
  if (!tree) {
    if (opt.radius < 1) throw ConfigError("visit experiment on " + model->name() + " needs a ball radius");
    ball.emplace(build_ball(model, opt.radius));
  }
  const std::size_t K = opt.horizons.size();
  // Per seed: fractions per horizon, distinct clusters, re-entries, reflections.
  std::vector<std::vector<double>> fractions(opt.seeds, std::vector<double>(K));
  std::vector<double> distinct(opt.seeds), reentries(opt.seeds);
  std::vector<std::uint64_t> reflections(opt.seeds, 0);
  const std::uint64_t walk_base = opt.base_seed ^ 0x3A1C'5EED'0000'0000ULL;
  parallel_for(
      opt.seeds, opt.threads, [] { return UnionFind(); },
      [&](UnionFind& uf, std::size_t i) {
        const CouplingField field = sample_field(opt.base_seed, i);
        const auto tr = tree ? detail::tree_trace(*model, field, p, walk_base + i, T)
                             : detail::ball_trace(*ball, field, p, walk_base + i, T, uf);
        std::uint64_t in = 0;
        std::size_t k = 0;
        for (std::size_t t = 0; t < T; ++t) {
          in += tr.in_start[t];
          if (t + 1 == opt.horizons[k]) {
            fractions[i][k] = double(in) / double(t + 1);
            ++k;
          }
        }
        distinct[i] = double(tr.distinct);
        reentries[i] = double(tr.reentries);
        reflections[i] = tr.reflections;
      });
  VisitResult r;
  r.p = p;
  r.horizons = opt.horizons;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> col(opt.seeds);
    for (std::size_t i = 0; i < opt.seeds; ++i) col[i] = fractions[i][k];
    r.fraction.push_back(summarize(col));
    if (k + 1 < K) {
      for (std::size_t i = 0; i < opt.seeds; ++i) col[i] = fractions[i][k] - fractions[i][k + 1];
      const auto d = summarize(col);
      r.drop.push_back(d);
      r.drop_significant.push_back(d.mean > 3 * d.stderr_);
    }
  }
  r.distinct_clusters = summarize(distinct);
  r.reentries = summarize(reentries);
  for (auto x : reflections) r.reflections += x;
  return r;
}

}  // namespace relperc
