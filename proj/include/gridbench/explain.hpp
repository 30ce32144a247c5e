#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gridbench/common.hpp"
#include "gridbench/model.hpp"

namespace gridbench::explain {

enum class ExplainerKind { kExactShapley, kSampledShapley, kBasicJoin };

std::string_view to_string(ExplainerKind kind);

// Additive attribution: base_value + sum(phi) approximates the model score.
struct Explanation {
  std::vector<double> phi;
  double base_value = 0.0;
  ExplainerKind kind = ExplainerKind::kExactShapley;
  std::uint64_t seed = 0;
  std::optional<std::size_t> instance_index;
};

struct Background {
  Matrix rows;
  std::uint64_t sample_seed = 0;
};

// Up to `size` rows drawn without replacement; all rows when fewer exist.
Background make_background(const Matrix& train, std::size_t size, std::uint64_t seed);

enum class ShapleyMode { kAuto, kExact, kSampled };

inline constexpr std::size_t kMaxExactFeatures = 12;

struct ShapleyOptions {
  // kAuto enumerates exactly when d <= kMaxExactFeatures.
  ShapleyMode mode = ShapleyMode::kAuto;
  std::size_t n_samples = 200;
  std::uint64_t seed = 0;
};

// Interventional Shapley values: v(S) averages the score over background rows
// with features in S taken from x.
Explanation shapley_explain(const model::Scorer& model, std::span<const double> x,
                            const Background& background, const ShapleyOptions& options);

// The whole ensemble treated as one black-box scorer.
Explanation blackbox_ensemble_explain(const model::StackedEnsemble& ensemble,
                                      std::span<const double> x, const Background& background,
                                      const ShapleyOptions& options);

// Column j of A holds the attribution of first-level model j over the input
// features; w is the attribution of the second-level model over the
// first-level scores. The joined attribution is A * w.
Explanation basic_join_explain(const model::StackedEnsemble& ensemble, std::span<const double> x,
                               const Background& background, const ShapleyOptions& options);

std::vector<double> basic_join_combine(const Matrix& first_level_attributions,
                                       std::span<const double> second_level_attribution);

using ExplainFn = std::function<Explanation(std::span<const double>)>;

}  // namespace gridbench::explain
