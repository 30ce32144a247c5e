#include <gtest/gtest.h>

#include <cmath>

#include "../oracles.hpp"
#include "gridbench/stats.hpp"

using namespace gridbench;
using namespace gridbench::stats;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

}  // namespace

TEST(Wilcoxon, AllPositiveSix) {
  std::vector<double> a = {1.1, 2.2, 3.3, 4.4, 5.5, 6.6}, b = {0, 0, 0, 0, 0, 0};
  auto r = wilcoxon_signed_rank(a, b);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 0.03125);
  EXPECT_EQ(r.n_effective, 6u);
  EXPECT_TRUE(r.exact);
}

TEST(Wilcoxon, EqualMagnitudes) {
  auto r = wilcoxon_signed_rank(std::vector<double>{1, 0}, std::vector<double>{0, 1});
  EXPECT_EQ(r.statistic, 1.5);
  EXPECT_EQ(r.p_value, 1.0);
}

TEST(Wilcoxon, ZerosDropped) {
  auto r = wilcoxon_signed_rank(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 1, 1, 4});
  EXPECT_EQ(r.n_effective, 2u);
}

TEST(Wilcoxon, MatchesEnumerationOracle) {
  Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    std::size_t n = 2 + rng.below(11);  // 2..12
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so zero differences and tied magnitudes both show up.
      a[i] = std::round(rng.uniform(0, 6));
      b[i] = std::round(rng.uniform(0, 6));
    }
    auto o = oracle::wilcoxon_brute(a, b);
    if (o.n_effective == 0) continue;
    auto r = wilcoxon_signed_rank(a, b);
    EXPECT_EQ(r.n_effective, o.n_effective);
    EXPECT_DOUBLE_EQ(r.statistic, o.statistic);
    EXPECT_NEAR(r.p_value, o.p_value, 1e-12) << "trial " << t;
  }
}

TEST(Wilcoxon, ContinuousDataAgainstOracle) {
  Rng rng(32);
  for (int t = 0; t < 40; ++t) {
    std::size_t n = 2 + rng.below(11);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = 0.3 + rng.normal();
      b[i] = rng.normal();
    }
    auto o = oracle::wilcoxon_brute(a, b);
    auto r = wilcoxon_signed_rank(a, b);
    EXPECT_NEAR(r.p_value, o.p_value, 1e-12);
    EXPECT_GT(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

TEST(Wilcoxon, Symmetric) {
  Rng rng(33);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(8), b(8);
    for (int i = 0; i < 8; ++i) {
      a[i] = rng.uniform(0, 1);
      b[i] = rng.uniform(0, 1);
    }
    auto x = wilcoxon_signed_rank(a, b), y = wilcoxon_signed_rank(b, a);
    EXPECT_EQ(x.statistic, y.statistic);
    EXPECT_EQ(x.p_value, y.p_value);
  }
}

TEST(Wilcoxon, LargeSampleApproximation) {
  Rng rng(34);
  std::vector<double> a(40), b(40);
  for (int i = 0; i < 40; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  auto r = wilcoxon_signed_rank(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
}

TEST(Wilcoxon, AllTied) {
  std::vector<double> a = {1, 2, 3};
  EXPECT_EQ(code_of([&] { wilcoxon_signed_rank(a, a); }), ErrorCode::kAllPairsTied);
}

TEST(CohensD, HandComputed) {
  EXPECT_EQ(cohens_d(std::vector<double>{1, 2, 3}, std::vector<double>{2, 3, 4}), -1.0);
  std::vector<double> a = {0.3, 1.7, 2.2};
  EXPECT_EQ(cohens_d(a, a), 0.0);
}

TEST(CohensD, ZeroDeviation) {
  std::vector<double> a = {1, 1, 1};
  EXPECT_EQ(code_of([&] { cohens_d(a, a); }), ErrorCode::kZeroDeviation);
}

TEST(CohensD, AntisymmetricAndInvariant) {
  Rng rng(35);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(5), b(5), a2(5), b2(5);
    double shift = rng.uniform(-10, 10), scale = rng.uniform(0.1, 10);
    for (int i = 0; i < 5; ++i) {
      a[i] = rng.normal();
      b[i] = 0.5 + 2 * rng.normal();
      a2[i] = scale * a[i] + shift;
      b2[i] = scale * b[i] + shift;
    }
    double d = cohens_d(a, b);
    EXPECT_NEAR(cohens_d(b, a), -d, 1e-12);
    EXPECT_NEAR(cohens_d(a2, b2), d, 1e-9);
  }
}

TEST(CohensD, Labels) {
  EXPECT_EQ(effect_label(0.2), EffectLabel::kSmall);
  EXPECT_EQ(effect_label(-0.2), EffectLabel::kSmall);
  EXPECT_EQ(effect_label(0.0), EffectLabel::kSmall);
  EXPECT_EQ(effect_label(0.5), EffectLabel::kMedium);
  EXPECT_EQ(effect_label(-0.5), EffectLabel::kMedium);
  EXPECT_EQ(effect_label(0.8), EffectLabel::kLarge);
  EXPECT_EQ(effect_label(-1.3), EffectLabel::kLarge);
  EXPECT_EQ(effect_label(0.35), EffectLabel::kSmall);
  EXPECT_EQ(effect_label(0.36), EffectLabel::kMedium);
  EXPECT_EQ(effect_label(0.66), EffectLabel::kLarge);
  EXPECT_EQ(to_string(EffectLabel::kMedium), "medium");
}

TEST(Bootstrap, ConstantGroups) {
  auto ci = bootstrap_ci_mean_diff(std::vector<double>{2, 2, 2}, std::vector<double>{0.5, 0.5, 0.5}, 0.95, 1000, 1);
  EXPECT_EQ(ci.low, 1.5);
  EXPECT_EQ(ci.high, 1.5);
  EXPECT_EQ(ci.method, "degenerate");
}

TEST(Bootstrap, Deterministic) {
  std::vector<double> a = {0.1, 0.5, 0.9, 1.3}, b = {0.0, 0.2, 0.1, 0.7};
  auto x = bootstrap_ci_mean_diff(a, b, 0.95, 2000, 7), y = bootstrap_ci_mean_diff(a, b, 0.95, 2000, 7);
  EXPECT_EQ(x.low, y.low);
  EXPECT_EQ(x.high, y.high);
  EXPECT_EQ(x.method, "bca");
  EXPECT_EQ(x.seed, 7u);
  EXPECT_EQ(x.n_resamples, 2000u);
}

TEST(Bootstrap, ContainsPointEstimate) {
  Rng rng(36);
  for (int t = 0; t < 30; ++t) {
    std::size_t n = 3 + rng.below(8);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = std::exp(rng.normal());  // skewed
      b[i] = rng.normal();
    }
    auto ci = bootstrap_ci_mean_diff(a, b, 0.95, 1000, t);
    double est = mean(a) - mean(b);
    EXPECT_LE(ci.low, est);
    EXPECT_GE(ci.high, est);
  }
}

TEST(Bootstrap, WidthShrinksWithN) {
  Rng rng(37);
  auto width = [&](std::size_t n) {
    double total = 0;
    for (int t = 0; t < 20; ++t) {
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = 1 + rng.normal();
        b[i] = rng.normal();
      }
      auto ci = bootstrap_ci_mean_diff(a, b, 0.95, 1000, t);
      total += ci.high - ci.low;
    }
    return total;
  };
  EXPECT_GT(width(10), width(80));
}

TEST(Bootstrap, CoverageNormalShift) {
  Rng rng(derive_seed(2024, "coverage"));
  int covered = 0;
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
      a[i] = 1 + rng.normal();
      b[i] = rng.normal();
    }
    auto ci = bootstrap_ci_mean_diff(a, b, 0.95, 5000, derive_seed(2024, "coverage/resample", t));
    if (ci.low <= 1.0 && 1.0 <= ci.high) ++covered;
  }
  EXPECT_GE(covered, 465);  // 93%
}

TEST(Compare, IncomputableRecorded) {
  PairedSamples s{"m", {1, 1, 1}, {1, 1, 1}};
  auto r = compare(s);
  EXPECT_FALSE(r.wilcoxon);
  EXPECT_FALSE(r.wilcoxon_incomputable.empty());
  EXPECT_FALSE(r.cohens_d);
  EXPECT_FALSE(r.cohens_d_incomputable.empty());
  EXPECT_EQ(r.point_estimate, 0.0);
  EXPECT_EQ(r.bootstrap_ci.method, "degenerate");
}

TEST(Compare, Values) {
  PairedSamples s{"m", {1, 2, 3}, {2, 3, 4.5}};
  auto r = compare(s, {0.95, 1000, 3, {}});
  ASSERT_TRUE(r.wilcoxon);
  ASSERT_TRUE(r.cohens_d);
  EXPECT_EQ(*r.effect, effect_label(*r.cohens_d));
  EXPECT_DOUBLE_EQ(r.point_estimate, 2.0 - 3.0 - 0.5 / 3);
  EXPECT_LE(r.bootstrap_ci.low, r.point_estimate);
  EXPECT_GE(r.bootstrap_ci.high, r.point_estimate);
}
