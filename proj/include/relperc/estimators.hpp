#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "relperc/ball.hpp"
#include "relperc/csv.hpp"
#include "relperc/error.hpp"
#include "relperc/parallel.hpp"
#include "relperc/percolation.hpp"
#include "relperc/stats.hpp"
#include "relperc/subgroup.hpp"

namespace relperc {

/// Shared Monte Carlo settings: sample i uses the field seeded base_seed + i.
struct McOptions {
  std::uint64_t base_seed = 1;
  std::size_t samples = 1000;
  unsigned threads = 1;
};

namespace detail {

/// Fixed chunking, independent of the worker count, so per-chunk results
/// merged in chunk order are identical for any number of threads.
inline std::size_t chunk_count(std::size_t samples) { return std::min<std::size_t>(samples, 256); }
inline std::size_t chunk_begin(std::size_t samples, std::size_t chunks, std::size_t c) {
  return samples * c / chunks;
}

inline void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("p_grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw ConfigError("p_grid values must lie in [0, 1]");
    if (i && grid[i] <= grid[i - 1]) throw ConfigError("p_grid must be strictly increasing");
  }
}

inline void check_p(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
}

template <class View>
constexpr bool is_materialized = std::is_same_v<View, BallGraph>;

/// End of a random walk of random length <= max_dist from the root that never
/// leaves distance max_dist.
template <class View>
typename View::vertex random_vertex(const View& g, std::uint64_t seed, std::uint64_t stream, int max_dist) {
  using V = typename View::vertex;
  V v = g.root();
  if (max_dist <= 0) return v;
  const int steps = static_cast<int>(bounded(keyed_draw(seed, stream, 0), static_cast<std::uint64_t>(max_dist) + 1));
  std::vector<V> nb;
  for (int s = 0; s < steps; ++s) {
    nb.clear();
    g.for_each_neighbor(v, [&](const V& w, std::uint64_t) {
      if (g.dist(w) <= max_dist) nb.push_back(w);
    });
    if (nb.empty()) break;
    v = nb[bounded(keyed_draw(seed, stream, s + 1), nb.size())];
  }
  return v;
}

/// Membership test of H on view vertices (mask lookup on materialized balls).
template <class View>
std::function<bool(const typename View::vertex&)> membership(const View& g, const SubgroupSpec& h) {
  if constexpr (is_materialized<View>) {
    auto mask = std::make_shared<std::vector<char>>(g.mask(h));
    return [mask](const std::uint32_t& v) { return (*mask)[v] != 0; };
  } else {
    return [&h](const GroupElement& v) { return h.contains(v); };
  }
}

/// Graph distance between view vertices: exact model distance when the model
/// provides one.
template <class View>
int view_distance(const View& g, const GroupElement& x, const GroupElement& y) {
  auto d = model_distance(g.model(), x, y);
  if (!d) throw ConfigError(g.model().name() + ": this estimator needs exact word lengths");
  return *d;
}

/// y at distance exactly d from x, reached by d distance-increasing steps.
template <class View>
GroupElement extend_to_distance(const View& g, const GroupElement& x, int d, std::uint64_t seed,
                                std::uint64_t stream) {
  using V = typename View::vertex;
  GroupElement y = x;
  std::vector<GroupElement> nb;
  for (int k = 0; k < d; ++k) {
    nb.clear();
    auto vy = g.locate(y);
    if (!vy) throw ConfigError("pair sampling left the ball");
    g.for_each_neighbor(*vy, [&](const V& w, std::uint64_t) {
      const GroupElement& e = g.element(w);
      if (view_distance(g, x, e) == k + 1) nb.push_back(e);
    });
    if (nb.empty()) throw ConfigError("no vertex at distance " + std::to_string(d) + " inside the ball");
    y = nb[bounded(keyed_draw(seed, stream, k), nb.size())];
  }
  return y;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pair connectivity for several fixed pairs under one field.

template <class View>
class PairBatch {
 public:
  using V = typename View::vertex;

  struct Scratch {
    UnionFind uf;
    typename View::template vertex_map<char> seen;
  };

  PairBatch(const View& g, const std::vector<std::pair<GroupElement, GroupElement>>& pairs) : g_(&g) {
    const GroupModel& m = g.model();
    tree_ = m.is_tree();
    for (const auto& [x, y] : pairs) {
      Entry e;
      e.same = x == y;
      if (tree_ && !e.same) {
        const auto path = m.geodesic(x, y);
        for (std::size_t i = 0; i + 1 < path.size(); ++i) e.keys.push_back(edge_key(path[i], path[i + 1]));
      } else if (!tree_) {
        auto vx = g.locate(x), vy = g.locate(y);
        if (!vx || !vy) throw ConfigError("pair vertex outside the ball");
        e.x = *vx;
        e.y = *vy;
      }
      entries_.push_back(std::move(e));
    }
  }

  std::size_t size() const { return entries_.size(); }
  Scratch make_scratch() const { return Scratch{UnionFind(), g_->template make_vertex_map<char>()}; }

  /// out[i] = 1 iff pair i is connected under `field` at p.
  void evaluate(const CouplingField& field, double p, Scratch& s, std::vector<char>& out) const {
    out.assign(entries_.size(), 0);
    if constexpr (detail::is_materialized<View>) {
      if (!tree_) {
        union_open_edges(*g_, field, p, s.uf);
        for (std::size_t i = 0; i < entries_.size(); ++i) {
          out[i] = entries_[i].same || s.uf.find(*entries_[i].x) == s.uf.find(*entries_[i].y);
        }
        return;
      }
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Entry& e = entries_[i];
      if (e.same) {
        out[i] = 1;
      } else if (tree_) {
        bool open = true;
        for (auto k : e.keys) {
          if (!field.open(k, p)) {
            open = false;
            break;
          }
        }
        out[i] = open;
      } else {
        bool hit = false;
        explore_cluster(*g_, field, p, *e.x, s.seen, [&](const V& v) {
          hit = v == *e.y;
          return !hit;
        });
        out[i] = hit;
      }
    }
  }

  /// Union-find labels of the last evaluation (materialized, non-tree only).
  bool uses_union_find() const { return detail::is_materialized<View> && !tree_; }

 private:
  struct Entry {
    bool same = false;
    std::vector<std::uint64_t> keys;
    std::optional<V> x, y;
  };
  const View* g_;
  bool tree_ = false;
  std::vector<Entry> entries_;
};

/// Per-pair success tallies over samples base_seed + i.
template <class View>
std::vector<std::uint64_t> pair_tallies(const View& g, const std::vector<std::pair<GroupElement, GroupElement>>& pairs,
                                        double p, const McOptions& opt) {
  PairBatch<View> batch(g, pairs);
  const std::size_t chunks = detail::chunk_count(opt.samples);
  std::vector<std::vector<std::uint64_t>> part(chunks, std::vector<std::uint64_t>(pairs.size(), 0));
  parallel_for(
      chunks, opt.threads, [&] { return batch.make_scratch(); },
      [&](auto& scratch, std::size_t c) {
        std::vector<char> out;
        for (std::size_t i = detail::chunk_begin(opt.samples, chunks, c);
             i < detail::chunk_begin(opt.samples, chunks, c + 1); ++i) {
          batch.evaluate(sample_field(opt.base_seed, i), p, scratch, out);
          for (std::size_t k = 0; k < out.size(); ++k) part[c][k] += out[k];
        }
      });
  std::vector<std::uint64_t> total(pairs.size(), 0);
  for (const auto& v : part) {
    for (std::size_t k = 0; k < v.size(); ++k) total[k] += v[k];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Crossing sweep.

enum class PcRule { level, mass_ratio };

inline const char* to_string(PcRule r) { return r == PcRule::level ? "level" : "mass-ratio"; }

struct CrossingOptions : McOptions {
  /// Crossing level for the level rule.
  double level = 0.5;
  PcRule rule = PcRule::level;
};

struct ThresholdEstimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
  /// No crossing below the top of the grid: the threshold exceeds max(p_grid).
  bool above_grid = false;
};

struct CrossingResult {
  int radius = 0;
  int half_radius = 0;
  std::vector<double> p_grid;
  std::vector<Proportion> reach;       // P(o <-> S_R)
  std::vector<Proportion> reach_half;  // P(o <-> S_{R/2})
  std::vector<double> mass, mass_se;            // E|K_o ∩ S_R|
  std::vector<double> mass_half, mass_half_se;  // E|K_o ∩ S_{R/2}|
  ThresholdEstimate pc_level, pc_level_half, pc_mass_ratio;
  PcRule rule = PcRule::level;
  std::size_t samples = 0;

  const ThresholdEstimate& pc() const { return rule == PcRule::level ? pc_level : pc_mass_ratio; }
  /// Level-rule estimate at R minus the one at R/2.
  double drift() const { return pc_level.value - pc_level_half.value; }

  std::vector<CurveRow> rows() const {
    std::vector<CurveRow> out;
    for (std::size_t j = 0; j < p_grid.size(); ++j) {
      auto ci = reach[j].ci();
      out.push_back({"reach", p_grid[j], double(radius), reach[j].estimate(), ci.low, ci.high, samples});
      ci = reach_half[j].ci();
      out.push_back({"reach_half", p_grid[j], double(half_radius), reach_half[j].estimate(), ci.low, ci.high, samples});
      out.push_back({"sphere_mass", p_grid[j], double(radius), mass[j], mass[j] - 1.96 * mass_se[j],
                     mass[j] + 1.96 * mass_se[j], samples});
      out.push_back({"sphere_mass_half", p_grid[j], double(half_radius), mass_half[j],
                     mass_half[j] - 1.96 * mass_half_se[j], mass_half[j] + 1.96 * mass_half_se[j], samples});
    }
    auto threshold_row = [&](const char* name, int n, const ThresholdEstimate& t) {
      const double v = t.above_grid ? std::numeric_limits<double>::infinity() : t.value;
      out.push_back({name, v, double(n), v, t.ci_low, t.ci_high, samples});
    };
    threshold_row("pc_level", radius, pc_level);
    threshold_row("pc_level_half", half_radius, pc_level_half);
    threshold_row("pc_mass_ratio", radius, pc_mass_ratio);
    return out;
  }
};

namespace detail {

/// p-hat = k-th smallest crossing threshold with k = ceil(level * N), plus the
/// order-statistic interval from the binomial band around `level`.
inline ThresholdEstimate level_threshold(std::vector<double> cross, double level, double p_max) {
  ThresholdEstimate t;
  const std::size_t n = cross.size();
  if (n == 0) return t;
  std::sort(cross.begin(), cross.end());
  auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(std::clamp(std::ceil(q * double(n)), 1.0, double(n)));
    return cross[k - 1];
  };
  const double half = 1.96 * std::sqrt(level * (1 - level) / double(n));
  t.value = at(level);
  t.ci_low = at(std::max(0.0, level - half));
  t.ci_high = at(std::min(1.0, level + half));
  t.above_grid = !(t.value < p_max);
  if (t.above_grid) t.value = p_max;
  if (!(t.ci_high < p_max)) t.ci_high = std::numeric_limits<double>::infinity();
  return t;
}

/// p-hat = inf{p : E|K ∩ S_R| >= E|K ∩ S_{R/2}| on all of [p, p_max)}.
inline ThresholdEstimate mass_ratio_threshold(const std::vector<double>& outer, const std::vector<double>& inner,
                                              double p_max) {
  ThresholdEstimate t;
  std::vector<std::pair<double, int>> events;
  for (double x : outer) events.emplace_back(x, 0);
  for (double x : inner) events.emplace_back(x, 1);
  std::sort(events.begin(), events.end());
  std::uint64_t a = outer.size(), b = inner.size();
  auto ok = [&] { return b > 0 && a >= b; };
  if (!ok()) {
    t.above_grid = true;
    t.value = p_max;
    return t;
  }
  // Walk down through the events; the counts on (t_k, t_{k+1}] drop as we go.
  double value = events.empty() ? 0.0 : events.front().first;
  for (std::size_t k = events.size(); k-- > 0;) {
    (events[k].second == 0 ? a : b) -= 1;
    if (!ok()) {
      value = events[k].first;
      break;
    }
  }
  t.value = value;
  // No interval: the rule is a single crossing of two mean curves, ci stays NaN.
  return t;
}

}  // namespace detail

/// Sweep of P(o <-> S_R) and E|K_o ∩ S_R| over a p grid, all grid points from
/// one bottleneck exploration per field (so curves are monotone in p).
template <class View>
CrossingResult crossing_sweep(const View& g, const std::vector<double>& p_grid, const CrossingOptions& opt) {
  using V = typename View::vertex;
  detail::check_grid(p_grid);
  if (g.radius() < 2) throw ConfigError("crossing_sweep needs R >= 2");
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw ConfigError("crossing level must lie in (0, 1)");
  const int R = g.radius(), half = R / 2;
  const double p_max = p_grid.back();
  const std::size_t G = p_grid.size();
  const double inf = std::numeric_limits<double>::infinity();

  struct Chunk {
    std::vector<double> cross, cross_half, outer, inner;
    std::vector<std::uint64_t> sum_o, sq_o, sum_i, sq_i;
  };
  const std::size_t chunks = detail::chunk_count(opt.samples);
  std::vector<Chunk> part(chunks);
  parallel_for(
      chunks, opt.threads, [&] { return g.template make_vertex_map<char>(); },
      [&](auto& done, std::size_t c) {
        Chunk& ch = part[c];
        ch.sum_o.assign(G, 0);
        ch.sq_o.assign(G, 0);
        ch.sum_i.assign(G, 0);
        ch.sq_i.assign(G, 0);
        std::vector<std::uint64_t> bin_o(G + 1), bin_i(G + 1);
        for (std::size_t i = detail::chunk_begin(opt.samples, chunks, c);
             i < detail::chunk_begin(opt.samples, chunks, c + 1); ++i) {
          double cr = inf, ch_half = inf;
          std::fill(bin_o.begin(), bin_o.end(), 0);
          std::fill(bin_i.begin(), bin_i.end(), 0);
          // Index of the first grid point strictly above t.
          auto bin = [&](double t) {
            return static_cast<std::size_t>(std::upper_bound(p_grid.begin(), p_grid.end(), t) - p_grid.begin());
          };
          bottleneck_explore(g, sample_field(opt.base_seed, i), g.root(), p_max, done, [&](const V& v, double t) {
            const int d = g.dist(v);
            if (d == R) {
              if (cr == inf) cr = t;
              ch.outer.push_back(t);
              bin_o[bin(t)] += 1;
            }
            if (d >= half && ch_half == inf) ch_half = t;
            if (d == half) {
              ch.inner.push_back(t);
              bin_i[bin(t)] += 1;
            }
            return true;
          });
          ch.cross.push_back(cr);
          ch.cross_half.push_back(ch_half);
          std::uint64_t co = 0, ci = 0;
          for (std::size_t j = 0; j < G; ++j) {
            co += bin_o[j];
            ci += bin_i[j];
            ch.sum_o[j] += co;
            ch.sq_o[j] += co * co;
            ch.sum_i[j] += ci;
            ch.sq_i[j] += ci * ci;
          }
        }
      });

  CrossingResult r;
  r.radius = R;
  r.half_radius = half;
  r.p_grid = p_grid;
  r.rule = opt.rule;
  r.samples = opt.samples;
  std::vector<double> cross, cross_half, outer, inner;
  std::vector<std::uint64_t> so(G, 0), qo(G, 0), si(G, 0), qi(G, 0);
  for (const auto& ch : part) {
    cross.insert(cross.end(), ch.cross.begin(), ch.cross.end());
    cross_half.insert(cross_half.end(), ch.cross_half.begin(), ch.cross_half.end());
    outer.insert(outer.end(), ch.outer.begin(), ch.outer.end());
    inner.insert(inner.end(), ch.inner.begin(), ch.inner.end());
    for (std::size_t j = 0; j < G; ++j) {
      so[j] += ch.sum_o[j];
      qo[j] += ch.sq_o[j];
      si[j] += ch.sum_i[j];
      qi[j] += ch.sq_i[j];
    }
  }
  const double N = double(opt.samples);
  auto mean_se = [&](std::uint64_t s, std::uint64_t q) {
    const double m = double(s) / N;
    const double var = N > 1 ? std::max(0.0, (double(q) - N * m * m) / (N - 1)) : 0.0;
    return std::pair{m, std::sqrt(var / N)};
  };
  for (std::size_t j = 0; j < G; ++j) {
    const double p = p_grid[j];
    Proportion a, b;
    a.trials = b.trials = opt.samples;
    a.successes = static_cast<std::uint64_t>(std::count_if(cross.begin(), cross.end(), [&](double t) { return t < p; }));
    b.successes =
        static_cast<std::uint64_t>(std::count_if(cross_half.begin(), cross_half.end(), [&](double t) { return t < p; }));
    r.reach.push_back(a);
    r.reach_half.push_back(b);
    auto [mo, eo] = mean_se(so[j], qo[j]);
    auto [mi, ei] = mean_se(si[j], qi[j]);
    r.mass.push_back(mo);
    r.mass_se.push_back(eo);
    r.mass_half.push_back(mi);
    r.mass_half_se.push_back(ei);
  }
  r.pc_level = detail::level_threshold(cross, opt.level, p_max);
  r.pc_level_half = detail::level_threshold(cross_half, opt.level, p_max);
  r.pc_mass_ratio = detail::mass_ratio_threshold(outer, inner, p_max);
  return r;
}

// ---------------------------------------------------------------------------
// Relative tails.

struct TailOptions : McOptions {
  int n_max = 30;
  /// Random sources besides the origin.
  int sources = 32;
  /// Sources lie within this distance of the root; negative means R/2.
  int source_radius = -1;
};

/// Fit of log Q against n (exponential) or log n (power law).
struct TailFit {
  bool ok = false;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int n_lo = 0;
  int n_hi = 0;
  /// Last n of the reliable prefix.
  int reliable = 0;
};

namespace detail {

/// Fit rule. Reliable prefix: starting at n = 1, points with estimate 1 are
/// skipped and the prefix ends at the first point whose 3-sigma Wilson lower
/// bound is not above half the estimate. The fit uses the upper part of the
/// prefix, [ceil(k/2), k] for exponentials and [ceil(sqrt k), k] for power
/// laws, weighted by the inverse variance N Q / (1 - Q) of log Q.
inline TailFit fit_tail(const std::vector<Proportion>& q, bool power_law) {
  TailFit fit;
  int k = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Proportion& pt = q[i];
    if (pt.trials == 0) break;
    if (pt.successes == pt.trials) {
      k = int(i) + 1;
      continue;
    }
    if (pt.successes == 0 || !(wilson(pt.successes, pt.trials, 3.0).low > pt.estimate() / 2)) break;
    k = int(i) + 1;
  }
  fit.reliable = k;
  if (k < 3) return fit;
  fit.n_lo = power_law ? int(std::ceil(std::sqrt(double(k)))) : int(std::ceil(k / 2.0));
  fit.n_hi = k;
  std::vector<double> x, y, w;
  for (int n = fit.n_lo; n <= fit.n_hi; ++n) {
    const Proportion& pt = q[std::size_t(n) - 1];
    const double v = pt.estimate();
    if (!(v > 0.0 && v < 1.0)) continue;
    x.push_back(power_law ? std::log(double(n)) : double(n));
    y.push_back(std::log(v));
    w.push_back(double(pt.trials) * v / (1.0 - v));
  }
  if (x.size() < 3) return fit;
  const LinearFit lf = weighted_linear_fit(x, y, w);
  fit.ok = true;
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.r2 = lf.r2;
  return fit;
}

}  // namespace detail

struct TailCurve {
  double p = 0.0;
  int n_max = 0;
  std::size_t samples = 0;
  std::size_t source_count = 0;
  /// Q-hat(n), n = 1..n_max: max over sources; the tally of the maximizing source.
  std::vector<Proportion> q;
  /// The same for the origin alone.
  std::vector<Proportion> q_origin;
  TailFit exp_fit, exp_fit_origin, power_fit, power_fit_origin;
  /// Fewer than 10 hits at n_max: the CI there is not informative.
  bool insufficient_at_nmax = false;

  std::vector<CurveRow> rows() const {
    std::vector<CurveRow> out;
    auto curve = [&](const char* name, const std::vector<Proportion>& c) {
      for (std::size_t i = 0; i < c.size(); ++i) {
        const auto ci = c[i].ci();
        out.push_back({name, p, double(i + 1), c[i].estimate(), ci.low, ci.high, c[i].trials});
      }
    };
    curve("tail_max", q);
    curve("tail_origin", q_origin);
    auto fit_rows = [&](const char* name, const TailFit& f) {
      if (!f.ok) return;
      const std::string s(name);
      out.push_back({s + "_slope", p, double(f.n_hi), f.slope, double(f.n_lo), double(f.n_hi), samples});
      out.push_back({s + "_r2", p, double(f.n_hi), f.r2, double(f.n_lo), double(f.n_hi), samples});
    };
    fit_rows("fit_exp", exp_fit);
    fit_rows("fit_exp_origin", exp_fit_origin);
    fit_rows("fit_power", power_fit);
    fit_rows("fit_power_origin", power_fit_origin);
    return out;
  }
};

/// Q-hat_p(n) = max over sources x of the frequency of |K_x ∩ H| >= n.
/// Explorations stop once n_max members of H are found.
template <class View>
TailCurve tail_curve(const View& g, const SubgroupSpec& h, double p, const TailOptions& opt) {
  using V = typename View::vertex;
  detail::check_p(p);
  if (opt.n_max < 1) throw ConfigError("n_max must be >= 1");
  if (opt.sources < 0) throw ConfigError("tail_sources must be >= 0");
  const int src_radius = opt.source_radius >= 0 ? std::min(opt.source_radius, g.radius()) : g.radius() / 2;
  std::vector<V> sources{g.root()};
  for (int s = 0; s < opt.sources; ++s) {
    sources.push_back(detail::random_vertex(g, opt.base_seed ^ 0x7A11'5EED'0000'0000ULL, std::uint64_t(s), src_radius));
  }
  const auto in_h = detail::membership(g, h);
  const std::size_t S = sources.size(), M = std::size_t(opt.n_max);
  const std::size_t chunks = detail::chunk_count(opt.samples);
  std::vector<std::vector<std::uint64_t>> part(chunks, std::vector<std::uint64_t>(S * (M + 1), 0));
  parallel_for(
      chunks, opt.threads, [&] { return g.template make_vertex_map<char>(); },
      [&](auto& seen, std::size_t c) {
        auto& hist = part[c];
        for (std::size_t i = detail::chunk_begin(opt.samples, chunks, c);
             i < detail::chunk_begin(opt.samples, chunks, c + 1); ++i) {
          const CouplingField field = sample_field(opt.base_seed, i);
          for (std::size_t s = 0; s < S; ++s) {
            std::size_t count = 0;
            explore_cluster(g, field, p, sources[s], seen, [&](const V& v) {
              if (in_h(v)) ++count;
              return count < M;
            });
            hist[s * (M + 1) + std::min(count, M)] += 1;
          }
        }
      });
  std::vector<std::uint64_t> hist(S * (M + 1), 0);
  for (const auto& ph : part) {
    for (std::size_t k = 0; k < hist.size(); ++k) hist[k] += ph[k];
  }
  TailCurve tc;
  tc.p = p;
  tc.n_max = opt.n_max;
  tc.samples = opt.samples;
  tc.source_count = S;
  for (std::size_t n = 1; n <= M; ++n) {
    Proportion best{0, opt.samples};
    for (std::size_t s = 0; s < S; ++s) {
      std::uint64_t at_least = 0;
      for (std::size_t c = n; c <= M; ++c) at_least += hist[s * (M + 1) + c];
      if (s == 0) tc.q_origin.push_back({at_least, opt.samples});
      if (at_least > best.successes) best.successes = at_least;
    }
    tc.q.push_back(best);
  }
  tc.exp_fit = detail::fit_tail(tc.q, false);
  tc.exp_fit_origin = detail::fit_tail(tc.q_origin, false);
  tc.power_fit = detail::fit_tail(tc.q, true);
  tc.power_fit_origin = detail::fit_tail(tc.q_origin, true);
  tc.insufficient_at_nmax = tc.q.back().successes < 10;
  return tc;
}

// ---------------------------------------------------------------------------
// Two-point infima.

struct KappaOptions : McOptions {
  int n_max = 8;
  int pairs_per_n = 4;
};

struct KappaCurve {
  double p = 0.0;
  std::size_t samples = 0;
  /// Minimum tally over sampled pairs at distance exactly n, n = 1..n_max.
  std::vector<Proportion> at_distance;
  /// kappa-hat(n) = min over pairs with distance <= n.
  std::vector<Proportion> kappa;
  /// sup_n kappa-hat(n)^(1/n) and where it is attained.
  double growth_rate = 0.0;
  int growth_n = 0;
  int audited = 0;
  int violations = 0;

  std::vector<CurveRow> rows() const {
    std::vector<CurveRow> out;
    for (std::size_t i = 0; i < kappa.size(); ++i) {
      auto ci = kappa[i].ci();
      out.push_back({"kappa", p, double(i + 1), kappa[i].estimate(), ci.low, ci.high, samples});
    }
    for (std::size_t i = 0; i < at_distance.size(); ++i) {
      auto ci = at_distance[i].ci();
      out.push_back({"tau_min_at_distance", p, double(i + 1), at_distance[i].estimate(), ci.low, ci.high, samples});
    }
    out.push_back({"growth_rate", p, double(growth_n), growth_rate, growth_rate, growth_rate, samples});
    out.push_back({"supermult_violations", p, double(audited), double(violations), 0, 0, samples});
    return out;
  }
};

template <class View>
KappaCurve kappa_curve(const View& g, double p, const KappaOptions& opt) {
  detail::check_p(p);
  if (opt.n_max < 1 || opt.pairs_per_n < 1) throw ConfigError("kappa needs n_max >= 1 and pairs_per_n >= 1");
  const int interior = g.radius() - opt.n_max;
  if (interior < 0) throw ConfigError("kappa: R must be at least n_max");
  const std::uint64_t pair_seed = opt.base_seed ^ 0x9A1B'5EED'0000'0000ULL;
  std::vector<std::pair<GroupElement, GroupElement>> pairs;
  for (int n = 1; n <= opt.n_max; ++n) {
    for (int k = 0; k < opt.pairs_per_n; ++k) {
      const std::uint64_t stream = std::uint64_t(n) * 1000 + std::uint64_t(k);
      const GroupElement x = g.element(detail::random_vertex(g, pair_seed, stream, interior));
      pairs.emplace_back(x, detail::extend_to_distance(g, x, n, pair_seed + 1, stream));
    }
  }
  const auto hits = pair_tallies(g, pairs, p, opt);
  KappaCurve kc;
  kc.p = p;
  kc.samples = opt.samples;
  for (int n = 1; n <= opt.n_max; ++n) {
    Proportion best{std::numeric_limits<std::uint64_t>::max(), opt.samples};
    for (int k = 0; k < opt.pairs_per_n; ++k) best.successes = std::min(best.successes, hits[std::size_t((n - 1) * opt.pairs_per_n + k)]);
    kc.at_distance.push_back(best);
    Proportion cum = kc.kappa.empty() || best.successes < kc.kappa.back().successes ? best : kc.kappa.back();
    kc.kappa.push_back(cum);
  }
  for (int n = 1; n <= opt.n_max; ++n) {
    const double v = kc.kappa[std::size_t(n) - 1].estimate();
    if (v > 0) {
      const double rate = std::pow(v, 1.0 / n);
      if (rate > kc.growth_rate) {
        kc.growth_rate = rate;
        kc.growth_n = n;
      }
    }
  }
  // kappa(m + n) >= kappa(m) kappa(n) up to noise: a violation needs the 3-sigma
  // Wilson upper bound of kappa(m + n) below the product minus 3 of its sigmas.
  // Wilson rather than the plug-in sigma, which is 0 at a zero count.
  for (int m = 1; m <= opt.n_max; ++m) {
    for (int n = m; m + n <= opt.n_max; ++n) {
      const auto& a = kc.kappa[std::size_t(m) - 1];
      const auto& b = kc.kappa[std::size_t(n) - 1];
      const auto& c = kc.kappa[std::size_t(m + n) - 1];
      const double product = a.estimate() * b.estimate();
      const double sigma = std::hypot(b.estimate() * a.sigma(), a.estimate() * b.sigma());
      ++kc.audited;
      if (c.ci(3.0).high < product - 3 * sigma) ++kc.violations;
    }
  }
  return kc;
}

// ---------------------------------------------------------------------------
// Trichotomy scan.

struct TrichotomyOptions : McOptions {
  std::uint32_t m = 2;
};

struct TrichotomyResult {
  std::vector<double> p_grid;
  std::uint32_t m = 2;
  std::size_t samples = 0;
  /// Per p: samples with 0, 1 and >= 2 qualifying clusters.
  std::vector<std::array<std::uint64_t, 3>> hist;

  std::vector<CurveRow> rows() const {
    std::vector<CurveRow> out;
    const char* names[3] = {"count_0", "count_1", "count_2plus"};
    for (std::size_t j = 0; j < p_grid.size(); ++j) {
      for (int k = 0; k < 3; ++k) {
        const Proportion pr{hist[j][k], samples};
        const auto ci = pr.ci();
        out.push_back({names[k], p_grid[j], double(m), pr.estimate(), ci.low, ci.high, samples});
      }
    }
    return out;
  }
};

/// Histogram over {0, 1, >=2} of relative_cluster_counts(., H, m) along a p
/// grid, adding edges in increasing field order (Newman-Ziff).
inline TrichotomyResult trichotomy_scan(const BallGraph& ball, const SubgroupSpec& h, const std::vector<double>& p_grid,
                                        const TrichotomyOptions& opt) {
  detail::check_grid(p_grid);
  if (opt.m < 2) throw ConfigError("trichotomy needs m >= 2");
  const auto mask = ball.mask(h);
  const std::size_t G = p_grid.size(), n = ball.size();
  const std::size_t chunks = detail::chunk_count(opt.samples);
  std::vector<std::vector<std::array<std::uint64_t, 3>>> part(chunks,
                                                              std::vector<std::array<std::uint64_t, 3>>(G, {0, 0, 0}));
  struct Scratch {
    UnionFind uf;
    std::vector<std::uint32_t> in_h;
    std::vector<char> boundary;
    std::vector<double> values;
  };
  parallel_for(
      chunks, opt.threads, [] { return Scratch{}; },
      [&](Scratch& s, std::size_t c) {
        for (std::size_t i = detail::chunk_begin(opt.samples, chunks, c);
             i < detail::chunk_begin(opt.samples, chunks, c + 1); ++i) {
          const CouplingField field = sample_field(opt.base_seed, i);
          s.uf.reset(n);
          s.in_h.assign(n, 0);
          s.boundary.assign(n, 0);
          std::int64_t qualifying = 0;
          auto qualifies = [&](std::uint32_t r) { return s.boundary[r] && s.in_h[r] >= opt.m; };
          for (std::uint32_t v = 0; v < n; ++v) {
            s.in_h[v] = mask[v] ? 1 : 0;
            s.boundary[v] = ball.is_boundary(v);
            qualifying += qualifies(v);
          }
          const auto order = edges_by_threshold(ball, field, s.values);
          std::size_t next = 0;
          for (std::size_t j = 0; j < G; ++j) {
            while (next < order.size() && s.values[order[next]] < p_grid[j]) {
              const auto [a, b] = ball.edges()[order[next++]];
              const std::uint32_t ra = s.uf.find(a), rb = s.uf.find(b);
              if (ra == rb) continue;
              qualifying -= qualifies(ra) + qualifies(rb);
              const std::uint32_t r = s.uf.unite(ra, rb).first;
              const std::uint32_t other = r == ra ? rb : ra;
              s.in_h[r] += s.in_h[other];
              s.boundary[r] = s.boundary[r] || s.boundary[other];
              qualifying += qualifies(r);
            }
            part[c][j][std::min<std::int64_t>(qualifying, 2)] += 1;
          }
        }
      });
  TrichotomyResult tr;
  tr.p_grid = p_grid;
  tr.m = opt.m;
  tr.samples = opt.samples;
  tr.hist.assign(G, {0, 0, 0});
  for (const auto& ph : part) {
    for (std::size_t j = 0; j < G; ++j) {
      for (int k = 0; k < 3; ++k) tr.hist[j][k] += ph[j][k];
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Uniqueness probe.

enum class PuVerdict { decay, bounded_below, inconclusive };

inline const char* to_string(PuVerdict v) {
  switch (v) {
    case PuVerdict::decay: return "decay";
    case PuVerdict::bounded_below: return "bounded below";
    default: return "inconclusive";
  }
}

struct PuOptions : McOptions {
  std::vector<int> distances{1, 2, 4, 8, 16, 32};
  int pairs_per_scale = 4;
};

struct PuProbeResult {
  double p = 0.0;
  std::size_t samples = 0;
  std::vector<int> distances;
  /// Minimum tally over the sampled H-pairs at each distance.
  std::vector<Proportion> min_tau;
  /// Frequency of o <-> S_R (materialized balls only).
  std::optional<Proportion> theta;
  PuVerdict verdict = PuVerdict::inconclusive;
  int halvings = 0;

  std::vector<CurveRow> rows() const {
    std::vector<CurveRow> out;
    for (std::size_t i = 0; i < distances.size(); ++i) {
      const auto ci = min_tau[i].ci();
      out.push_back({"tau_min", p, double(distances[i]), min_tau[i].estimate(), ci.low, ci.high, samples});
    }
    if (theta) {
      const auto ci = theta->ci();
      const double t = theta->estimate();
      out.push_back({"theta", p, 0, t, ci.low, ci.high, samples});
      out.push_back({"theta_squared", p, 0, t * t, ci.low * ci.low, ci.high * ci.high, samples});
    }
    out.push_back({"verdict", p, double(halvings), double(static_cast<int>(verdict)), 0, 0, samples});
    return out;
  }
};

namespace detail {

/// Decision rule: "decay" when a greedy chain along the distance grid halves
/// at least twice with separated intervals; else "bounded below" when the last
/// interval excludes 0 and the last estimate exceeds half the first; else
/// inconclusive.
inline PuVerdict pu_decide(const std::vector<Proportion>& tau, int& halvings) {
  halvings = 0;
  if (tau.empty()) return PuVerdict::inconclusive;
  std::size_t r = 0;
  for (std::size_t s = 1; s < tau.size(); ++s) {
    if (tau[s].estimate() <= tau[r].estimate() / 2 && tau[s].ci().high < tau[r].ci().low) {
      ++halvings;
      r = s;
    }
  }
  if (halvings >= 2) return PuVerdict::decay;
  if (tau.back().ci().low > 0 && tau.back().estimate() > tau.front().estimate() / 2) return PuVerdict::bounded_below;
  return PuVerdict::inconclusive;
}

}  // namespace detail

template <class View>
PuProbeResult pu_probe(const View& g, const SubgroupSpec& h, double p, const PuOptions& opt) {
  detail::check_p(p);
  if (opt.distances.empty() || opt.pairs_per_scale < 1) throw ConfigError("pu_probe needs distances and pairs");
  const int d_max = *std::max_element(opt.distances.begin(), opt.distances.end());
  const int interior = g.radius() - d_max;
  if (interior < 0) throw ConfigError("pu_probe: R must be at least the largest distance");
  const GroupModel& m = g.model();
  const bool whole = h.label == "all";
  const std::uint64_t pair_seed = opt.base_seed ^ 0x5C0B'E5EE'D000'0000ULL;

  auto dist_from_root = [&](const GroupElement& v) -> std::optional<int> {
    if (auto loc = g.locate(v)) return g.dist(*loc);
    return std::nullopt;
  };
  // x: H-walk from the base point staying within the interior.
  auto h_start = [&](std::uint64_t stream) {
    GroupElement x = h.base_point;
    const int steps = int(bounded(keyed_draw(pair_seed, stream, 0), std::uint64_t(interior) + 1));
    for (int s = 0; s < steps; ++s) {
      const auto& gen = h.generators[bounded(keyed_draw(pair_seed, stream, s + 1), h.generators.size())];
      GroupElement nx = m.multiply(x, gen);
      auto d = dist_from_root(nx);
      if (d && *d <= interior) x = std::move(nx);
    }
    return x;
  };
  // y in H at ambient distance exactly d from x.
  auto h_partner = [&](const GroupElement& x, int d, std::uint64_t stream) {
    if (whole) return detail::extend_to_distance(g, x, d, pair_seed + 1, stream);
    for (std::uint64_t attempt = 0; attempt < 256; ++attempt) {
      GroupElement y = x;
      for (int s = 0; s < 64 * d; ++s) {
        const auto& gen =
            h.generators[bounded(keyed_draw(pair_seed + 2, stream * 256 + attempt, std::uint64_t(s)), h.generators.size())];
        GroupElement ny = m.multiply(y, gen);
        if (!dist_from_root(ny)) continue;
        y = std::move(ny);
        const int dy = detail::view_distance(g, x, y);
        if (dy == d) return y;
        if (dy > d) break;
      }
    }
    throw ConfigError("pu_probe: no H-pair at distance " + std::to_string(d) + " found inside the ball");
  };

  if (!whole && h.generators.empty()) throw ConfigError("pu_probe: subgroup has no generators");
  std::vector<std::pair<GroupElement, GroupElement>> pairs;
  for (std::size_t i = 0; i < opt.distances.size(); ++i) {
    for (int k = 0; k < opt.pairs_per_scale; ++k) {
      const std::uint64_t stream = std::uint64_t(i) * 1000 + std::uint64_t(k);
      GroupElement x = whole ? g.element(detail::random_vertex(g, pair_seed, stream, interior)) : h_start(stream);
      GroupElement y = h_partner(x, opt.distances[i], stream);
      pairs.emplace_back(std::move(x), std::move(y));
    }
  }
  // Boundary reach of the origin rides along on materialized balls.
  PuProbeResult res;
  res.p = p;
  res.samples = opt.samples;
  res.distances = opt.distances;
  std::vector<std::uint64_t> hits;
  if constexpr (detail::is_materialized<View>) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> located;
    for (const auto& [x, y] : pairs) located.emplace_back(*g.locate(x), *g.locate(y));
    std::vector<std::uint32_t> boundary;
    for (std::uint32_t v = 0; v < g.size(); ++v) {
      if (g.is_boundary(v)) boundary.push_back(v);
    }
    const std::size_t chunks = detail::chunk_count(opt.samples);
    std::vector<std::vector<std::uint64_t>> part(chunks, std::vector<std::uint64_t>(pairs.size() + 1, 0));
    parallel_for(
        chunks, opt.threads, [&] { return UnionFind(); },
        [&](UnionFind& uf, std::size_t c) {
          for (std::size_t i = detail::chunk_begin(opt.samples, chunks, c);
               i < detail::chunk_begin(opt.samples, chunks, c + 1); ++i) {
            union_open_edges(g, sample_field(opt.base_seed, i), p, uf);
            for (std::size_t k = 0; k < pairs.size(); ++k) {
              part[c][k] += uf.find(located[k].first) == uf.find(located[k].second);
            }
            const std::uint32_t r0 = uf.find(0);
            part[c][pairs.size()] +=
                std::any_of(boundary.begin(), boundary.end(), [&](std::uint32_t b) { return uf.find(b) == r0; });
          }
        });
    hits.assign(pairs.size() + 1, 0);
    for (const auto& v : part) {
      for (std::size_t k = 0; k < v.size(); ++k) hits[k] += v[k];
    }
    res.theta = Proportion{hits.back(), opt.samples};
    hits.pop_back();
  } else {
    hits = pair_tallies(g, pairs, p, opt);
  }
  for (std::size_t i = 0; i < opt.distances.size(); ++i) {
    Proportion best{std::numeric_limits<std::uint64_t>::max(), opt.samples};
    for (int k = 0; k < opt.pairs_per_scale; ++k) {
      best.successes = std::min(best.successes, hits[i * std::size_t(opt.pairs_per_scale) + std::size_t(k)]);
    }
    res.min_tau.push_back(best);
  }
  res.verdict = detail::pu_decide(res.min_tau, res.halvings);
  return res;
}

/// Bisection of the decay / bounded-below flag between p_lo (decay) and
/// p_hi (bounded below). Returns the final bracket.
template <class View>
std::pair<double, double> pu_bisect(const View& g, const SubgroupSpec& h, double p_lo, double p_hi, int steps,
                                    const PuOptions& opt) {
  for (int s = 0; s < steps; ++s) {
    const double mid = 0.5 * (p_lo + p_hi);
    const auto v = pu_probe(g, h, mid, opt).verdict;
    if (v == PuVerdict::decay) {
      p_lo = mid;
    } else if (v == PuVerdict::bounded_below) {
      p_hi = mid;
    } else {
      break;
    }
  }
  return {p_lo, p_hi};
}

}  // namespace relperc
