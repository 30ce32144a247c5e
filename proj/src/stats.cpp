#include "gridbench/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gridbench::stats {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

// Linear interpolation between order statistics of a sorted sample.
double sorted_quantile(const std::vector<double>& sorted, double p) {
  p = std::clamp(p, 0.0, 1.0);
  double h = p * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Jackknife acceleration contribution of one group's deletions.
std::optional<double> group_acceleration(std::span<const double> values, double other_mean,
                                         bool group_is_first) {
  const double n = static_cast<double>(values.size());
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  std::vector<double> theta(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double loo = (sum - values[i]) / (n - 1.0);
    theta[i] = group_is_first ? loo - other_mean : other_mean - loo;
  }
  double bar = mean(theta);
  double num = 0.0, den = 0.0;
  for (double t : theta) {
    double dev = bar - t;
    num += dev * dev * dev;
    den += dev * dev;
  }
  if (den <= 0.0) return std::nullopt;
  return num / (6.0 * std::pow(den, 1.5));
}

}  // namespace

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "paired samples differ in length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) diffs.push_back(a[i] - b[i]);
  if (diffs.empty()) throw Error(ErrorCode::kAllPairsTied, "every pair of values is equal");
  const std::size_t n = diffs.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });
  // Doubled midranks are integers.
  std::vector<std::uint64_t> rank2(n);
  std::vector<std::size_t> tie_sizes;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = i + j + 2;
    tie_sizes.push_back(j - i + 1);
    i = j + 1;
  }
  std::uint64_t plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (diffs[i] > 0) plus2 += rank2[i];
  }
  const std::uint64_t stat2 = std::min(plus2, total2 - plus2);

  WilcoxonResult result;
  result.statistic = static_cast<double>(stat2) / 2.0;
  result.n_effective = n;
  if (n <= kExactWilcoxonLimit) {
    // counts[s]: number of sign assignments whose doubled positive rank sum is s.
    std::vector<std::uint64_t> counts(total2 + 1, 0);
    counts[0] = 1;
    std::uint64_t reach = 0;
    for (std::uint64_t r : rank2) {
      for (std::uint64_t s = reach + 1; s-- > 0;)
        if (counts[s]) counts[s + r] += counts[s];
      reach += r;
    }
    std::uint64_t extreme = 0;
    for (std::uint64_t s = 0; s <= total2; ++s)
      if (std::min(s, total2 - s) <= stat2) extreme += counts[s];
    result.p_value = static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n));
    result.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (std::size_t t : tie_sizes) {
      double tt = static_cast<double>(t);
      variance -= (tt * tt * tt - tt) / 48.0;
    }
    const double mu = nn * (nn + 1.0) / 4.0;
    double z = (std::abs(static_cast<double>(plus2) / 2.0 - mu) - 0.5) / std::sqrt(variance);
    z = std::max(z, 0.0);
    result.p_value = std::max(std::erfc(z / std::sqrt(2.0)), std::numeric_limits<double>::min());
    result.exact = false;
  }
  result.p_value = std::min(result.p_value, 1.0);
  return result;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorCode::kInvalidSpec, "Cohen's d needs at least two values per group");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double pooled = std::sqrt(((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) /
                            (na + nb - 2.0));
  if (!(pooled > 0.0)) throw Error(ErrorCode::kZeroDeviation, "both groups have zero deviation");
  return (mean(a) - mean(b)) / pooled;
}

std::string_view to_string(EffectLabel label) {
  switch (label) {
    case EffectLabel::kSmall: return "small";
    case EffectLabel::kMedium: return "medium";
    case EffectLabel::kLarge: return "large";
  }
  return "unknown";
}

EffectLabel effect_label(double d, const EffectBuckets& buckets) {
  double magnitude = std::abs(d);
  if (magnitude <= buckets.small_upper) return EffectLabel::kSmall;
  if (magnitude <= buckets.medium_upper) return EffectLabel::kMedium;
  return EffectLabel::kLarge;
}

BootstrapCi bootstrap_ci_mean_diff(std::span<const double> a, std::span<const double> b,
                                   double level, std::size_t n_resamples, std::uint64_t seed) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(ErrorCode::kInvalidSpec, "bootstrap needs at least two values per group");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::kInvalidConfig, "level must lie in (0, 1)");
  if (n_resamples < 2) throw Error(ErrorCode::kInvalidConfig, "n_resamples must be at least 2");

  BootstrapCi ci;
  ci.level = level;
  ci.n_resamples = n_resamples;
  ci.seed = seed;
  const double estimate = mean(a) - mean(b);
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(a) && constant(b)) {
    ci.low = ci.high = estimate;
    ci.method = "degenerate";
    return ci;
  }

  Rng rng(seed);
  std::vector<double> replicates(n_resamples);
  for (double& rep : replicates) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sa += a[rng.below(a.size())];
    for (std::size_t i = 0; i < b.size(); ++i) sb += b[rng.below(b.size())];
    rep = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  }
  std::sort(replicates.begin(), replicates.end());

  const double alpha = (1.0 - level) / 2.0;
  double p_low = alpha, p_high = 1.0 - alpha;
  ci.method = "percentile";

  std::size_t below = 0, equal = 0;
  for (double r : replicates) {
    if (r < estimate) ++below;
    else if (r == estimate) ++equal;
  }
  double proportion = (static_cast<double>(below) + 0.5 * static_cast<double>(equal)) /
                      static_cast<double>(n_resamples);
  auto acc_a = group_acceleration(a, mean(b), true);
  auto acc_b = group_acceleration(b, mean(a), false);
  if (proportion > 0.0 && proportion < 1.0 && (acc_a || acc_b)) {
    double z0 = normal_quantile(proportion);
    double accel = acc_a.value_or(0.0) + acc_b.value_or(0.0);
    auto adjust = [&](double p) {
      double z = normal_quantile(p);
      return normal_cdf(z0 + (z0 + z) / (1.0 - accel * (z0 + z)));
    };
    double lo = adjust(alpha), hi = adjust(1.0 - alpha);
    if (std::isfinite(lo) && std::isfinite(hi) && lo < hi) {
      p_low = lo;
      p_high = hi;
      ci.method = "bca";
    }
  }
  ci.low = std::min(sorted_quantile(replicates, p_low), estimate);
  ci.high = std::max(sorted_quantile(replicates, p_high), estimate);
  return ci;
}

ComparisonResult compare(const PairedSamples& samples, const CompareOptions& options) {
  if (samples.a.size() != samples.b.size())
    throw Error(ErrorCode::kDimensionMismatch, samples.metric_name + ": unpaired samples");
  if (samples.a.size() < 2)
    throw Error(ErrorCode::kInvalidSpec, samples.metric_name + ": need at least two datasets");
  ComparisonResult result;
  result.metric = samples.metric_name;
  result.point_estimate = mean(samples.a) - mean(samples.b);
  try {
    result.wilcoxon = wilcoxon_signed_rank(samples.a, samples.b);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kAllPairsTied) throw;
    result.wilcoxon_incomputable = "AllPairsTied";
  }
  try {
    result.cohens_d = cohens_d(samples.a, samples.b);
    result.effect = effect_label(*result.cohens_d, options.buckets);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kZeroDeviation) throw;
    result.cohens_d_incomputable = "ZeroDeviation";
  }
  result.bootstrap_ci = bootstrap_ci_mean_diff(samples.a, samples.b, options.level,
                                               options.n_resamples, options.seed);
  return result;
}

}  // namespace gridbench::stats
