#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "relperc/oracles/exact.hpp"
#include "relperc/oracles/report.hpp"

namespace relperc::oracles {

/// Exact tail polynomials of |K_u ∩ A| for every vertex u.
class MassTails {
 public:
  MassTails(const FiniteSystem& s, std::uint32_t n_max, unsigned threads = 1) : m_(s.edges.size()), n_max_(n_max) {
    s.validate();
    if (n_max < 1) throw ConfigError("n must be >= 1");
    struct Tally {
      std::vector<CountTable> t;
      Tally& operator+=(const Tally& o) {
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += o.t[i];
        return *this;
      }
    };
    const std::size_t V = s.vertices;
    std::vector<char> in_a(V, 0);
    for (auto a : s.A) in_a[a] = 1;
    auto tally = enumerate_configurations<Tally>(
        static_cast<unsigned>(m_), threads, [&] { return Tally{std::vector<CountTable>(V * n_max, CountTable(m_, 0))}; },
        [&](Tally& t, std::uint64_t w) {
          thread_local std::vector<std::uint32_t> label;
          thread_local std::vector<std::uint32_t> mass;
          component_labels(s, w, label);
          mass.assign(V, 0);
          for (std::uint32_t v = 0; v < V; ++v) mass[label[v]] += in_a[v];
          const std::size_t k = std::size_t(popcount(w));
          for (std::uint32_t u = 0; u < V; ++u) {
            const std::uint32_t c = std::min(mass[label[u]], n_max);
            for (std::uint32_t j = 1; j <= c; ++j) t.t[u * n_max + j - 1].add(k, 0);
          }
        });
    // Coefficients c_k of sum_k c_k p^k (1 - p)^(m - k), as doubles (exact below 2^53).
    coeffs_.resize(V * n_max);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
      coeffs_[i].resize(m_ + 1);
      for (std::size_t k = 0; k <= m_; ++k) coeffs_[i][k] = double(tally.t[i].at(k, 0));
    }
    tables_ = std::move(tally.t);
    vertices_ = V;
  }

  /// P_p(|K_u ∩ A| >= j), compensated double evaluation.
  double tail(std::uint32_t u, std::uint32_t j, double p) const {
    const auto& c = coeffs_[u * n_max_ + j - 1];
    NeumaierSum s;
    for (std::size_t k = 0; k <= m_; ++k) {
      if (c[k] != 0.0) s.add(c[k] * std::pow(p, double(k)) * std::pow(1 - p, double(m_ - k)));
    }
    return s.value();
  }

  HighFloat tail_exact(std::uint32_t u, std::uint32_t j, double p) const {
    return tables_[u * n_max_ + j - 1].probability(HighFloat(to_rational(p)), HighFloat(0));
  }

  /// Q_p(j) = max_u P_p(|K_u ∩ A| >= j).
  double Q(std::uint32_t j, double p) const {
    double best = 0.0;
    for (std::uint32_t u = 0; u < vertices_; ++u) best = std::max(best, tail(u, j, p));
    return best;
  }

  /// Vertex attaining Q_p(j); ties go to the smallest index.
  std::uint32_t argmax(std::uint32_t j, double p) const {
    std::uint32_t best = 0;
    double value = tail(0, j, p);
    for (std::uint32_t u = 1; u < vertices_; ++u) {
      const double t = tail(u, j, p);
      if (t > value) best = u, value = t;
    }
    return best;
  }

  std::uint32_t n_max() const { return n_max_; }

  HighFloat Q_exact(std::uint32_t j, double p) const {
    HighFloat best = 0;
    for (std::uint32_t u = 0; u < vertices_; ++u) best = std::max(best, tail_exact(u, j, p));
    return best;
  }

 private:
  std::size_t m_;
  std::uint32_t n_max_;
  std::size_t vertices_ = 0;
  std::vector<CountTable> tables_;
  std::vector<std::vector<double>> coeffs_;
};

/// Points in (lo, hi) where some Q_p(m) switches maximizing vertex, located by
/// a grid scan and bisection. Between them the integrand is smooth.
inline std::vector<double> argmax_switches(const MassTails& tails, double lo, double hi, int grid = 512) {
  std::vector<double> cuts;
  auto signature = [&](double p) {
    std::vector<std::uint32_t> sig;
    for (std::uint32_t m = 1; m <= tails.n_max(); ++m) sig.push_back(tails.argmax(m, p));
    return sig;
  };
  double a = lo;
  auto sig_a = signature(a);
  for (int i = 1; i <= grid; ++i) {
    const double b = lo + (hi - lo) * i / grid;
    const auto sig_b = signature(b);
    if (sig_b != sig_a) {
      double l = a, r = b;
      for (int it = 0; it < 60 && r - l > 1e-15; ++it) {
        const double mid = 0.5 * (l + r);
        (signature(mid) == sig_a ? l : r) = mid;
      }
      cuts.push_back(0.5 * (l + r));
    }
    a = b;
    sig_a = sig_b;
  }
  return cuts;
}

/// log(Q_{p2}(n) / Q_{p1}(n)) >= 2 int_{p1}^{p2} [n (1 - 1/e) / sum_{m<=n} Q_p(m) - 1] dp,
/// the left side exact, the right side by adaptive Gauss-Kronrod quadrature of
/// the exact integrand.
inline OracleReport integral_inequality_check(const FiniteSystem& s, std::uint32_t n, double p1, double p2,
                                              unsigned threads = 1) {
  if (!(0 <= p1 && p1 <= p2 && p2 <= 1)) throw ConfigError("integral check needs 0 <= p1 <= p2 <= 1");
  const MassTails tails(s, n, threads);
  const HighFloat q1 = tails.Q_exact(n, p1), q2 = tails.Q_exact(n, p2);
  if (!(q1 > 0)) throw ConfigError(s.name + ": Q_{p1}(n) must be positive");
  const double lhs = static_cast<double>(boost::multiprecision::log(q2 / q1));
  const double c = double(n) * (1 - std::exp(-1.0));
  auto integrand = [&](double p) {
    NeumaierSum sum;
    for (std::uint32_t m = 1; m <= n; ++m) sum.add(tails.Q(m, p));
    return c / sum.value() - 1.0;
  };
  double rhs = 0.0, error = 0.0;
  if (p2 > p1) {
    std::vector<double> knots{p1};
    for (double x : argmax_switches(tails, p1, p2)) knots.push_back(x);
    knots.push_back(p2);
    NeumaierSum total, err;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      if (!(knots[i + 1] > knots[i])) continue;
      double e = 0.0;
      total.add(boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, knots[i], knots[i + 1], 12,
                                                                              1e-14, &e));
      err.add(std::abs(e));
    }
    rhs = 2 * total.value();
    error = 2 * err.value();
    if (!(error < 1e-9)) throw ResourceError(s.name + ": quadrature tolerance not met");
  }
  // Reported as lhs >= rhs; the quadrature error estimate widens the tolerance.
  OracleReport r;
  r.check = "integral";
  r.instance = s.name + "-n" + std::to_string(n) + "-p" + format_number(p1) + "-" + format_number(p2);
  r.lhs = lhs;
  r.rhs = rhs;
  r.gap = lhs - rhs;
  r.holds = r.gap > -(kIdentityTolerance + error);
  return r;
}

}  // namespace relperc::oracles
