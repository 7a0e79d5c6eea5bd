#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace relperc {

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for `successes` out of `trials` at normal quantile z.
inline Interval wilson(std::uint64_t successes, std::uint64_t trials, double z = 1.96) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double ph = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (ph + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline double binomial_sigma(double p, std::uint64_t trials) {
  if (trials == 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

/// Frequency tally with its uncertainty.
struct Proportion {
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;

  double estimate() const { return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0; }
  double sigma() const { return binomial_sigma(estimate(), trials); }
  Interval ci(double z = 1.96) const { return wilson(successes, trials, z); }
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// Weighted least squares y ~ a + b x; r2 is the weighted coefficient of
/// determination.
inline LinearFit weighted_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                                     const std::vector<double>& w) {
  LinearFit fit;
  fit.points = x.size();
  if (x.size() < 2) return fit;
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xm) * (x[i] - xm);
    sxy += w[i] * (x[i] - xm) * (y[i] - ym);
    syy += w[i] * (y[i] - ym) * (y[i] - ym);
  }
  if (sxx <= 0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ssr += w[i] * r * r;
  }
  fit.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return fit;
}

struct BootstrapResult {
  double mean = 0.0;
  double sigma = 0.0;
  Interval ci;
};

/// Moving-block bootstrap of the mean of a 0/1 sequence. Blocks of length
/// `block` are drawn uniformly from the overlapping windows and concatenated
/// until the resample has the original length.
inline BootstrapResult block_bootstrap(const std::vector<char>& series, std::size_t block,
                                       int resamples, std::uint64_t seed) {
  BootstrapResult r;
  const std::size_t n = series.size();
  if (n == 0) return r;
  block = std::clamp<std::size_t>(block, 1, n);
  std::vector<std::uint64_t> prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + static_cast<std::uint64_t>(series[i] != 0);
  r.mean = static_cast<double>(prefix[n]) / static_cast<double>(n);
  const std::size_t windows = n - block + 1;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, windows - 1);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    std::uint64_t hits = 0;
    std::size_t filled = 0;
    while (filled < n) {
      const std::size_t start = pick(rng);
      const std::size_t len = std::min(block, n - filled);
      hits += prefix[start + len] - prefix[start];
      filled += len;
    }
    means.push_back(static_cast<double>(hits) / static_cast<double>(n));
  }
  double s = 0, s2 = 0;
  for (double m : means) {
    s += m;
    s2 += m * m;
  }
  const double mu = s / resamples;
  r.sigma = std::sqrt(std::max(0.0, s2 / resamples - mu * mu));
  std::sort(means.begin(), means.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - lo) * (means[hi] - means[lo]);
  };
  r.ci = {quantile(0.025), quantile(0.975)};
  return r;
}

/// Mean and standard error of a sample.
struct SampleSummary {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline SampleSummary summarize(const std::vector<double>& xs) {
  SampleSummary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return s;
}

}  // namespace relperc
