#include "gridbench/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridbench::explain {

namespace {

// Mean score over background rows, with features flagged in `from_x` taken
// from x. `z` is scratch space of size d.
double coalition_value(const model::Scorer& model, std::span<const double> x,
                       const Matrix& background, const std::vector<char>& from_x,
                       std::vector<double>& z) {
  const std::size_t d = x.size();
  double total = 0.0;
  for (std::size_t r = 0; r < background.rows(); ++r) {
    auto row = background.row(r);
    for (std::size_t i = 0; i < d; ++i) z[i] = from_x[i] ? x[i] : row[i];
    total += model.score_unchecked(z);
  }
  return total / static_cast<double>(background.rows());
}

Explanation exact_shapley(const model::Scorer& model, std::span<const double> x,
                          const Matrix& background) {
  const std::size_t d = x.size();
  const std::size_t n_masks = std::size_t{1} << d;
  std::vector<double> value(n_masks);
  std::vector<char> from_x(d);
  std::vector<double> z(d);
  for (std::size_t mask = 0; mask + 1 < n_masks; ++mask) {
    for (std::size_t i = 0; i < d; ++i) from_x[i] = static_cast<char>((mask >> i) & 1U);
    value[mask] = coalition_value(model, x, background, from_x, z);
  }
  value[n_masks - 1] = model.score_unchecked(x);

  // weight[s] = s! (d - s - 1)! / d!
  std::vector<double> weight(d, 0.0);
  for (std::size_t s = 0; s < d; ++s) {
    double w = 1.0 / static_cast<double>(d);
    for (std::size_t k = 1; k <= s; ++k)
      w *= static_cast<double>(k) / static_cast<double>(d - k);
    weight[s] = w;
  }

  Explanation e;
  e.phi.assign(d, 0.0);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    std::size_t size = static_cast<std::size_t>(__builtin_popcountll(mask));
    for (std::size_t i = 0; i < d; ++i) {
      if ((mask >> i) & 1U) continue;
      e.phi[i] += weight[size] * (value[mask | (std::size_t{1} << i)] - value[mask]);
    }
  }
  e.base_value = value[0];
  e.kind = ExplainerKind::kExactShapley;
  return e;
}

Explanation sampled_shapley(const model::Scorer& model, std::span<const double> x,
                            const Matrix& background, std::size_t n_samples, std::uint64_t seed) {
  const std::size_t d = x.size();
  std::vector<char> from_x(d, 0);
  std::vector<double> z(d);
  const double base = coalition_value(model, x, background, from_x, z);
  const double full = model.score_unchecked(x);

  Explanation e;
  e.phi.assign(d, 0.0);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t s = 0; s < n_samples; ++s) {
    rng.shuffle(order);
    std::fill(from_x.begin(), from_x.end(), 0);
    double previous = base;
    for (std::size_t k = 0; k < d; ++k) {
      from_x[order[k]] = 1;
      double current = k + 1 == d ? full : coalition_value(model, x, background, from_x, z);
      e.phi[order[k]] += current - previous;
      previous = current;
    }
  }
  for (double& p : e.phi) p /= static_cast<double>(n_samples);
  e.base_value = base;
  e.kind = ExplainerKind::kSampledShapley;
  return e;
}

}  // namespace

std::string_view to_string(ExplainerKind kind) {
  switch (kind) {
    case ExplainerKind::kExactShapley: return "exact_shapley";
    case ExplainerKind::kSampledShapley: return "sampled_shapley";
    case ExplainerKind::kBasicJoin: return "basic_join";
  }
  return "unknown";
}

Background make_background(const Matrix& train, std::size_t size, std::uint64_t seed) {
  if (train.rows() == 0 || size == 0)
    throw Error(ErrorCode::kInvalidConfig, "background needs at least one row");
  std::vector<std::size_t> idx(train.rows());
  std::iota(idx.begin(), idx.end(), 0);
  if (size < idx.size()) {
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
  }
  return Background{train.select_rows(idx), seed};
}

Explanation shapley_explain(const model::Scorer& model, std::span<const double> x,
                            const Background& background, const ShapleyOptions& options) {
  const std::size_t d = model.input_dim();
  if (x.size() != d || background.rows.cols() != d)
    throw Error(ErrorCode::kDimensionMismatch,
                "instance has " + std::to_string(x.size()) + " features, background " +
                    std::to_string(background.rows.cols()) + ", model " + std::to_string(d));
  if (background.rows.rows() == 0) throw Error(ErrorCode::kInvalidConfig, "empty background");
  if (d == 0) throw Error(ErrorCode::kDimensionMismatch, "model has no inputs");

  bool exact = options.mode == ShapleyMode::kExact ||
               (options.mode == ShapleyMode::kAuto && d <= kMaxExactFeatures);
  Explanation e;
  if (exact) {
    if (d > kMaxExactFeatures)
      throw Error(ErrorCode::kExactTooLarge, std::to_string(d) + " features exceed the exact limit of " +
                                                 std::to_string(kMaxExactFeatures));
    e = exact_shapley(model, x, background.rows);
  } else {
    if (options.n_samples < 1) throw Error(ErrorCode::kInvalidConfig, "n_samples must be at least 1");
    e = sampled_shapley(model, x, background.rows, options.n_samples, options.seed);
  }
  e.seed = options.seed;
  return e;
}

Explanation blackbox_ensemble_explain(const model::StackedEnsemble& ensemble,
                                      std::span<const double> x, const Background& background,
                                      const ShapleyOptions& options) {
  return shapley_explain(ensemble, x, background, options);
}

std::vector<double> basic_join_combine(const Matrix& a, std::span<const double> w) {
  if (a.cols() != w.size())
    throw Error(ErrorCode::kDimensionMismatch, "attribution matrix has " + std::to_string(a.cols()) +
                                                   " columns, weight vector " + std::to_string(w.size()));
  std::vector<double> phi(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) phi[i] += a(i, j) * w[j];
  return phi;
}

Explanation basic_join_explain(const model::StackedEnsemble& ensemble, std::span<const double> x,
                               const Background& background, const ShapleyOptions& options) {
  const auto& first = ensemble.first_level();
  const std::size_t d = ensemble.input_dim();
  const std::size_t m = first.size();
  if (x.size() != d) throw Error(ErrorCode::kDimensionMismatch, "instance dimension mismatch");

  Matrix a(d, m);
  for (std::size_t j = 0; j < m; ++j) {
    ShapleyOptions sub = options;
    sub.seed = derive_seed(options.seed, "basic_join/first_level", j);
    Explanation ej = shapley_explain(*first[j], x, background, sub);
    for (std::size_t i = 0; i < d; ++i) a(i, j) = ej.phi[i];
  }

  // The second level sees first-level scores, so its background is the
  // background mapped through the first level.
  Matrix level_two(0, m);
  for (std::size_t r = 0; r < background.rows.rows(); ++r)
    level_two.append_row(ensemble.first_level_scores(background.rows.row(r)));
  Background second_background{std::move(level_two), background.sample_seed};
  ShapleyOptions sub = options;
  sub.seed = derive_seed(options.seed, "basic_join/second_level");
  std::vector<double> s = ensemble.first_level_scores(x);
  Explanation w = shapley_explain(*ensemble.second_level(), s, second_background, sub);

  Explanation e;
  e.phi = basic_join_combine(a, w.phi);
  e.base_value = w.base_value;
  e.kind = ExplainerKind::kBasicJoin;
  e.seed = options.seed;
  return e;
}

}  // namespace gridbench::explain
