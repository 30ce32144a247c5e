#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridbench/common.hpp"

namespace gridbench::stats {

struct WilcoxonResult {
  // min(W+, W-) over the nonzero differences.
  double statistic = 0.0;
  // Two-sided.
  double p_value = 1.0;
  std::size_t n_effective = 0;
  bool exact = true;
};

// Exact enumeration of sign assignments up to this many nonzero differences;
// normal approximation with continuity correction beyond.
inline constexpr std::size_t kExactWilcoxonLimit = 25;

// Zero differences are dropped and tied magnitudes get midranks. Throws
// AllPairsTied when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// Pooled-standard-deviation Cohen's d. Throws ZeroDeviation when the pooled
// deviation vanishes.
double cohens_d(std::span<const double> a, std::span<const double> b);

enum class EffectLabel { kSmall, kMedium, kLarge };

std::string_view to_string(EffectLabel label);

// Cutoffs halfway between the 0.2 / 0.5 / 0.8 anchors.
struct EffectBuckets {
  double small_upper = 0.35;
  double medium_upper = 0.65;
};

EffectLabel effect_label(double d, const EffectBuckets& buckets = {});

struct BootstrapCi {
  double low = 0.0;
  double high = 0.0;
  double level = 0.95;
  std::size_t n_resamples = 0;
  // "bca", "percentile" or "degenerate".
  std::string method;
  std::uint64_t seed = 0;
};

// BCa interval for mean(a) - mean(b) with independent per-group resampling.
BootstrapCi bootstrap_ci_mean_diff(std::span<const double> a, std::span<const double> b,
                                   double level = 0.95, std::size_t n_resamples = 5000,
                                   std::uint64_t seed = 0);

struct PairedSamples {
  std::string metric_name;
  std::vector<double> a;
  std::vector<double> b;
};

struct CompareOptions {
  double level = 0.95;
  std::size_t n_resamples = 5000;
  std::uint64_t seed = 0;
  EffectBuckets buckets;
};

struct ComparisonResult {
  std::string metric;
  std::optional<WilcoxonResult> wilcoxon;
  std::string wilcoxon_incomputable;  // reason, when wilcoxon is empty
  std::optional<double> cohens_d;
  std::string cohens_d_incomputable;
  std::optional<EffectLabel> effect;
  BootstrapCi bootstrap_ci;
  double point_estimate = 0.0;
};

ComparisonResult compare(const PairedSamples& samples, const CompareOptions& options = {});

double mean(std::span<const double> v);
double sample_variance(std::span<const double> v);

}  // namespace gridbench::stats
