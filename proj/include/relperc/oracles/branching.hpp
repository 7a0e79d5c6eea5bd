#pragma once

#include <cmath>
#include <vector>

#include "relperc/error.hpp"

namespace relperc::oracles {

namespace detail {

inline double log_binomial_pmf(int trials, int k, double p) {
  if (k < 0 || k > trials) return -INFINITY;
  if (p <= 0.0) return k == 0 ? 0.0 : -INFINITY;
  if (p >= 1.0) return k == trials ? 0.0 : -INFINITY;
  return std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) + k * std::log(p) +
         (trials - k) * std::log1p(-p);
}

}  // namespace detail

/// Law of the open cluster of the root on the (d)-regular tree: the root has
/// Binomial(d, p) open children, every other vertex Binomial(d - 1, p).
/// Returns P(|K| = n) for n = 0..n_max (index 0 unused, always 0).
inline std::vector<double> tree_cluster_pmf(int degree, double p, int n_max) {
  if (degree < 2 || n_max < 1) throw ConfigError("tree_cluster_pmf: degree >= 2 and n_max >= 1");
  const int b = degree - 1;
  // Subtree total progeny: P(T = n) = (1/n) P(Bin(b n, p) = n - 1).
  std::vector<double> sub(std::size_t(n_max) + 1, 0.0);
  for (int n = 1; n <= n_max; ++n) sub[n] = std::exp(detail::log_binomial_pmf(b * n, n - 1, p)) / n;
  // conv[j] = law of the sum of j subtree sizes, truncated at n_max - 1.
  std::vector<double> out(std::size_t(n_max) + 1, 0.0);
  std::vector<double> conv(std::size_t(n_max), 0.0);
  conv[0] = 1.0;
  for (int j = 0; j <= degree; ++j) {
    const double w = std::exp(detail::log_binomial_pmf(degree, j, p));
    for (int s = 0; s + 1 <= n_max; ++s) out[std::size_t(s) + 1] += w * conv[std::size_t(s)];
    std::vector<double> next(conv.size(), 0.0);
    for (std::size_t s = 0; s < conv.size(); ++s) {
      if (conv[s] == 0.0) continue;
      for (std::size_t t = 1; s + t < conv.size(); ++t) next[s + t] += conv[s] * sub[t];
    }
    conv = std::move(next);
  }
  return out;
}

/// P(|K| >= n) for n = 1..n_max (index n - 1).
inline std::vector<double> tree_cluster_tail(int degree, double p, int n_max) {
  const auto pmf = tree_cluster_pmf(degree, p, n_max);
  std::vector<double> tail(std::size_t(n_max), 0.0);
  double below = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    tail[std::size_t(n) - 1] = 1.0 - below;
    below += pmf[std::size_t(n)];
  }
  return tail;
}

}  // namespace relperc::oracles
