#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relperc/ball.hpp"
#include "relperc/groups.hpp"
#include "relperc/oracles/exact.hpp"
#include "relperc/oracles/report.hpp"
#include "relperc/subgroup.hpp"

namespace relperc::oracles {

/// Mass transport kernel f(omega, x, y) >= 0; omega is the open-edge mask.
using TransportKernel = std::function<double(std::uint64_t, std::uint32_t, std::uint32_t)>;

namespace detail {

/// E[sum_{rho} w(rho) sum_{v in targets} f(omega, rho, v)] and the reversed
/// sum, enumerating omega when the kernel depends on it.
inline std::pair<Rational, Rational> transport_sums(std::size_t edges, bool random, double p,
                                                    const std::vector<std::uint32_t>& roots,
                                                    const std::vector<std::uint32_t>& targets,
                                                    const TransportKernel& f) {
  const Rational rp = to_rational(p);
  Rational out = 0, in = 0;
  const std::uint64_t configs = random ? (std::uint64_t(1) << edges) : 1;
  std::vector<Rational> pw(edges + 1, Rational(1)), qw(edges + 1, Rational(1));
  for (std::size_t i = 1; i <= edges; ++i) {
    pw[i] = pw[i - 1] * rp;
    qw[i] = qw[i - 1] * (1 - rp);
  }
  for (std::uint64_t w = 0; w < configs; ++w) {
    const std::size_t k = random ? std::size_t(popcount(w)) : 0;
    const Rational weight = random ? Rational(pw[k] * qw[edges - k]) : Rational(1);
    Rational o = 0, i = 0;
    for (auto rho : roots) {
      for (auto v : targets) {
        o += to_rational(f(w, rho, v));
        i += to_rational(f(w, v, rho));
      }
    }
    out += weight * o;
    in += weight * i;
  }
  const Rational r(static_cast<long long>(roots.size()));
  return {out / r, in / r};
}

}  // namespace detail

/// Root uniform on the finite set A, transport within A:
/// E sum_v f(rho, v) = E sum_v f(v, rho).
inline OracleReport mtp_uniform_check(const FiniteSystem& s, const TransportKernel& f, bool random, double p) {
  s.validate(random ? 20 : 64);
  if (s.A.empty()) throw ConfigError(s.name + ": A is empty");
  const auto [out, in] = detail::transport_sums(s.edges.size(), random, p, s.A, s.A, f);
  OracleReport r = identity_report("mtp", s.name + "-uniform-root", static_cast<double>(out), static_cast<double>(in));
  r.gap = std::abs(static_cast<double>(Rational(out - in)));
  r.holds = r.gap < kIdentityTolerance;
  return r;
}

/// Finite Cayley graph as a ball covering the whole group.
inline BallGraph whole_group_ball(const ModelPtr& model) {
  if (model->family() != Family::finite) throw ConfigError(model->name() + " is not a finite group");
  // Any radius beyond the diameter covers the group.
  return build_ball(model, 64, 1u << 16);
}

/// Edge permutation induced by x -> gamma x.
inline std::vector<std::size_t> left_translation(const BallGraph& ball, const GroupElement& gamma) {
  const GroupModel& m = ball.model();
  std::vector<std::size_t> perm(ball.edges().size());
  for (std::size_t e = 0; e < ball.edges().size(); ++e) {
    const auto [a, b] = ball.edges()[e];
    const auto ga = *ball.locate(m.multiply(gamma, ball.element(a)));
    const auto gb = *ball.locate(m.multiply(gamma, ball.element(b)));
    bool found = false;
    ball.for_each_incident(ga, [&](std::uint32_t w, std::uint32_t idx) {
      if (!found && w == gb) {
        perm[e] = idx;
        found = true;
      }
    });
    if (!found) throw OracleViolation("left translation is not a graph automorphism");
  }
  return perm;
}

/// Root at the identity, transport within the subgroup H of a finite group.
/// The kernel must be invariant under left translation by H; this is checked
/// on every configuration and every pair for each element of H.
inline OracleReport mtp_subgroup_check(const ModelPtr& model, const SubgroupSpec& h, const TransportKernel& f,
                                       bool random, double p, const std::string& name) {
  const BallGraph ball = whole_group_ball(model);
  const std::size_t m = ball.edges().size();
  if (random && m > 20) throw ConfigError(name + ": too many edges to enumerate");
  std::vector<std::uint32_t> members;
  for (std::uint32_t v = 0; v < ball.size(); ++v) {
    if (h.contains(ball.element(v))) members.push_back(v);
  }
  const std::uint64_t configs = random ? (std::uint64_t(1) << m) : 1;
  for (auto g : members) {
    const GroupElement& gamma = ball.element(g);
    const auto perm = left_translation(ball, gamma);
    std::vector<std::uint32_t> image(ball.size());
    for (std::uint32_t v = 0; v < ball.size(); ++v) image[v] = *ball.locate(model->multiply(gamma, ball.element(v)));
    for (std::uint64_t w = 0; w < configs; ++w) {
      std::uint64_t gw = 0;
      for (std::size_t e = 0; e < m; ++e) {
        if ((w >> e) & 1) gw |= std::uint64_t(1) << perm[e];
      }
      for (auto x : members) {
        for (auto y : members) {
          if (std::abs(f(gw, image[x], image[y]) - f(w, x, y)) > 1e-15) {
            throw ConfigError(name + ": kernel is not invariant under left translation by " + model->format(gamma));
          }
        }
      }
    }
  }
  const std::vector<std::uint32_t> root{0};
  const auto [out, in] = detail::transport_sums(m, random, p, root, members, f);
  OracleReport r = identity_report("mtp", name, static_cast<double>(out), static_cast<double>(in));
  r.gap = std::abs(static_cast<double>(Rational(out - in)));
  r.holds = r.gap < kIdentityTolerance;
  return r;
}

// ---------------------------------------------------------------------------
// Transport on the oriented tree.

/// Kernel of the relative position: y is reached from x by `up` steps toward
/// the end and then `down` steps away from it.
using LevelKernel = std::function<double(int up, int down)>;

/// sum_x f(o, x) = sum_x f(x, o) Delta(o, x) with Delta(o, x) = (d - 1)^(level x - level o),
/// once by closed-form counts of relative positions and once by summing over
/// the materialized ball of radius r.
inline OracleReport tilted_mtp_check(int degree, int r, const LevelKernel& k, const std::string& name) {
  if (degree < 3 || r < 0 || r > 16) throw ConfigError("tilted mtp needs degree >= 3 and 0 <= r <= 16");
  for (int extra = 1; extra <= 2; ++extra) {
    for (int a = 0; a <= r + extra; ++a) {
      if (k(a, r + extra - a) != 0.0) throw ConfigError(name + ": kernel support exceeds displacement " + std::to_string(r));
    }
  }
  const Rational b(degree - 1);
  auto pow_b = [&](int e) {
    Rational x = 1;
    for (int i = 0; i < std::abs(e); ++i) x *= b;
    return e >= 0 ? x : Rational(1 / x);
  };
  // Number of vertices at relative position (up, down) from a fixed vertex.
  auto count = [&](int up, int down) -> Rational {
    if (down == 0) return 1;
    if (up == 0) return pow_b(down);
    return Rational(degree - 2) * pow_b(down - 1);
  };
  Rational lhs = 0, rhs = 0;
  for (int up = 0; up <= r; ++up) {
    for (int down = 0; up + down <= r; ++down) {
      const Rational v = to_rational(k(up, down));
      if (v == 0) continue;
      lhs += v * count(up, down);
      // x sees o at (up, down) iff o sees x at (down, up); level x - level o = down - up.
      rhs += v * count(down, up) * pow_b(down - up);
    }
  }
  auto model = std::make_shared<OrientedTree>(degree);
  const auto ball = build_ball(model, r);
  const GroupElement o = model->identity();
  Rational lhs_direct = 0, rhs_direct = 0;
  for (std::uint32_t v = 0; v < ball.size(); ++v) {
    const GroupElement& x = ball.element(v);
    const auto [u1, d1] = model->relative_position(o, x);
    const auto [u2, d2] = model->relative_position(x, o);
    lhs_direct += to_rational(k(u1, d1));
    rhs_direct += to_rational(k(u2, d2)) * pow_b(model->level(x) - model->level(o));
  }
  OracleReport rep = identity_report("tilted-mtp", name + "-d" + std::to_string(degree), static_cast<double>(lhs),
                                     static_cast<double>(rhs));
  const double gap = std::max({std::abs(static_cast<double>(Rational(lhs - rhs))),
                               std::abs(static_cast<double>(Rational(lhs - lhs_direct))),
                               std::abs(static_cast<double>(Rational(rhs - rhs_direct)))});
  rep.gap = gap;
  rep.holds = gap < kIdentityTolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Coset tails on finite groups.

struct KghReports {
  /// P(|K_o ∩ gamma H| >= n) + P(|K_o ∩ H gamma^-1| >= n) <= 2 P(|K_o ∩ H| >= n).
  OracleReport inequality;
  /// Mass transport of f(x, y) = 1{x <-> y, y in xH ∪ xH gamma, |K_x ∩ xH gamma| >= n}
  ///                            / |K_x ∩ (xH ∪ xH gamma)|.
  OracleReport transport;
};

inline KghReports kgh_identity_check(const ModelPtr& model, const SubgroupSpec& h, const GroupElement& gamma,
                                     std::uint32_t n, double p, const std::string& name) {
  if (!(p >= 0 && p <= 1)) throw ConfigError("p must lie in [0, 1]");
  if (n < 1) throw ConfigError("n must be >= 1");
  const BallGraph ball = whole_group_ball(model);
  const GroupModel& m = *model;
  const FiniteSystem sys = system_from_ball(ball, name);
  sys.validate();
  const std::size_t E = sys.edges.size();
  const std::uint32_t V = sys.vertices;
  const GroupElement gi = m.invert(gamma);
  auto in_h = [&](const GroupElement& g) { return h.contains(g); };
  // Coset masks relative to the origin.
  std::vector<char> mH(V), mGH(V), mHGi(V);
  // xH and xH gamma for each x, as y-membership tables.
  std::vector<std::vector<char>> xh(V, std::vector<char>(V)), xhg(V, std::vector<char>(V));
  for (std::uint32_t y = 0; y < V; ++y) {
    const GroupElement& g = ball.element(y);
    mH[y] = in_h(g);
    mGH[y] = in_h(m.multiply(gi, g));       // y in gamma H
    mHGi[y] = in_h(m.multiply(g, gamma));   // y in H gamma^-1
  }
  for (std::uint32_t x = 0; x < V; ++x) {
    const GroupElement xinv = m.invert(ball.element(x));
    for (std::uint32_t y = 0; y < V; ++y) {
      const GroupElement rel = m.multiply(xinv, ball.element(y));
      xh[x][y] = in_h(rel);
      xhg[x][y] = in_h(m.multiply(rel, gi));
    }
  }
  const Rational rp = to_rational(p);
  CountTable t_gh(E, 0), t_hgi(E, 0), t_h(E, 0);
  std::vector<Rational> out_k(E + 1, Rational(0)), in_k(E + 1, Rational(0));
  std::vector<std::uint32_t> label;
  for (std::uint64_t w = 0; w < (std::uint64_t(1) << E); ++w) {
    component_labels(sys, w, label);
    const std::size_t k = std::size_t(popcount(w));
    std::uint32_t c_h = 0, c_gh = 0, c_hgi = 0;
    for (std::uint32_t y = 0; y < V; ++y) {
      if (label[y] != label[0]) continue;
      c_h += mH[y];
      c_gh += mGH[y];
      c_hgi += mHGi[y];
    }
    if (c_gh >= n) t_gh.add(k, 0);
    if (c_hgi >= n) t_hgi.add(k, 0);
    if (c_h >= n) t_h.add(k, 0);
    // Kernel values f(x, y) from the definition.
    auto kernel = [&](std::uint32_t x, std::uint32_t y) -> Rational {
      if (label[x] != label[y] || !(xh[x][y] || xhg[x][y])) return 0;
      std::uint32_t both = 0, coset = 0;
      for (std::uint32_t z = 0; z < V; ++z) {
        if (label[z] != label[x]) continue;
        both += xh[x][z] || xhg[x][z];
        coset += xhg[x][z];
      }
      if (coset < n) return 0;
      return Rational(1, both);
    };
    for (std::uint32_t v = 0; v < V; ++v) {
      out_k[k] += kernel(0, v);
      in_k[k] += kernel(v, 0);
    }
  }
  auto expect = [&](const std::vector<Rational>& by_k) {
    Rational total = 0, pk = 1;
    for (std::size_t k = 0; k <= E; ++k) {
      Rational qk = 1;
      for (std::size_t i = 0; i < E - k; ++i) qk *= (1 - rp);
      total += by_k[k] * pk * qk;
      pk *= rp;
    }
    return total;
  };
  const Rational lhs = t_gh.probability(rp, Rational(0)) + t_hgi.probability(rp, Rational(0));
  const Rational rhs = 2 * t_h.probability(rp, Rational(0));
  const std::string inst = name + "-g" + m.format(gamma) + "-n" + std::to_string(n) + "-p" + format_number(p);
  KghReports out;
  out.inequality = inequality_report("kgh", inst, static_cast<double>(lhs), static_cast<double>(rhs));
  out.inequality.gap = static_cast<double>(Rational(rhs - lhs));
  out.inequality.holds = rhs >= lhs;
  const Rational tout = expect(out_k), tin = expect(in_k);
  out.transport = identity_report("kgh-transport", inst, static_cast<double>(tout), static_cast<double>(tin));
  out.transport.gap = std::abs(static_cast<double>(Rational(tout - tin)));
  out.transport.holds = out.transport.gap < kIdentityTolerance;
  return out;
}

}  // namespace relperc::oracles
