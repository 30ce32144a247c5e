#pragma once

// Reference computations used to check the library. Each one takes the most
// direct route (enumerate permutations, enumerate sign patterns, count pairs)
// rather than the algorithm the library uses.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "gridbench/common.hpp"
#include "gridbench/model.hpp"

namespace oracle {

using Fn = std::function<double(const std::vector<double>&)>;

// Shapley values by averaging marginal contributions over all d! orderings,
// with absent features filled from each background row.
inline std::vector<double> shapley_permutations(const Fn& f, const std::vector<double>& x,
                                                const std::vector<std::vector<double>>& background) {
  const std::size_t d = x.size();
  auto value = [&](const std::vector<bool>& in) {
    double total = 0;
    for (const auto& r : background) {
      std::vector<double> z(d);
      for (std::size_t i = 0; i < d; ++i) z[i] = in[i] ? x[i] : r[i];
      total += f(z);
    }
    return total / background.size();
  };
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> phi(d, 0.0);
  double count = 0;
  do {
    std::vector<bool> in(d, false);
    double prev = value(in);
    for (std::size_t k = 0; k < d; ++k) {
      in[perm[k]] = true;
      double next = value(in);
      phi[perm[k]] += next - prev;
      prev = next;
    }
    count += 1;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (auto& p : phi) p /= count;
  return phi;
}

inline double mean_value(const Fn& f, const std::vector<std::vector<double>>& background) {
  double total = 0;
  for (const auto& r : background) total += f(r);
  return total / background.size();
}

struct WilcoxonOracle {
  double statistic;
  double p_value;
  std::size_t n_effective;
};

// Midranks by counting, then every one of the 2^n sign patterns.
inline WilcoxonOracle wilcoxon_brute(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) diff.push_back(a[i] - b[i]);
  const std::size_t n = diff.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(diff[j]) < std::abs(diff[i])) below += 1;
      if (std::abs(diff[j]) == std::abs(diff[i])) equal += 1;
    }
    rank[i] = below + (equal + 1) / 2.0;
  }
  double total = n * (n + 1) / 2.0;
  double w_plus = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (diff[i] > 0) w_plus += rank[i];
  double stat = std::min(w_plus, total - w_plus);
  std::size_t extreme = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) s += rank[i];
    if (std::min(s, total - s) <= stat + 1e-9) ++extreme;
  }
  return {stat, static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << n), n};
}

// Fraction of (positive, negative) pairs ordered correctly; ties count half.
inline double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j)
      if (labels[i] == 1 && labels[j] == 0) {
        pairs += 1;
        if (scores[i] > scores[j]) good += 1;
        if (scores[i] == scores[j]) good += 0.5;
      }
  return good / pairs;
}

// Test scorers. Linear stubs are link-free so closed forms stay exact.
class LinearStub : public gridbench::model::Scorer {
 public:
  LinearStub(std::vector<double> w, double b = 0.0) : w_(std::move(w)), b_(b) {}
  std::size_t input_dim() const override { return w_.size(); }
  double score_unchecked(std::span<const double> x) const override {
    double s = b_;
    for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * x[i];
    return s;
  }
  const std::vector<double>& w() const { return w_; }
  double b() const { return b_; }

 private:
  std::vector<double> w_;
  double b_;
};

class ConstantStub : public gridbench::model::Scorer {
 public:
  ConstantStub(std::size_t d, double c) : d_(d), c_(c) {}
  std::size_t input_dim() const override { return d_; }
  double score_unchecked(std::span<const double>) const override { return c_; }

 private:
  std::size_t d_;
  double c_;
};

// 1 when x[feature] >= cut, else 0; scores are exactly 0 or 1.
class ThresholdStub : public gridbench::model::Scorer {
 public:
  ThresholdStub(std::size_t d, std::size_t feature, double cut) : d_(d), feature_(feature), cut_(cut) {}
  std::size_t input_dim() const override { return d_; }
  double score_unchecked(std::span<const double> x) const override { return x[feature_] >= cut_ ? 1.0 : 0.0; }

 private:
  std::size_t d_, feature_;
  double cut_;
};

// Thresholded linear separator: label 1 iff w.x + b >= 0.
class HalfPlaneStub : public gridbench::model::Scorer {
 public:
  HalfPlaneStub(std::vector<double> w, double b) : w_(std::move(w)), b_(b) {}
  std::size_t input_dim() const override { return w_.size(); }
  double score_unchecked(std::span<const double> x) const override {
    double s = b_;
    for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * x[i];
    return gridbench::sigmoid(s);
  }

 private:
  std::vector<double> w_;
  double b_;
};

}  // namespace oracle
