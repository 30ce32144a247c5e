#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gridbench/common.hpp"
#include "gridbench/explain.hpp"
#include "gridbench/model.hpp"

namespace gridbench::metrics {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct ClassificationMetrics {
  double false_positive_rate = 0.0;
  double auc = 0.0;
  double balanced_accuracy = 0.0;
  double mcc = 0.0;
  Confusion confusion;
};

struct ExplanationMetrics {
  double explanation_error = 0.0;
  double sens_max = 0.0;
  double sens_max_radius = 0.0;
  double auc_morf = 0.0;
  std::size_t morf_features_evaluated = 0;
  std::size_t instances_evaluated = 0;
};

struct RobustnessMetrics {
  std::vector<double> delta_adv;
  double delta_adv_mean = 0.0;
  double lipschitz_lower = 0.0;
  std::size_t pairs_evaluated = 0;
};

// Wall-clock seconds. Recorded, never hashed.
struct TimingMetrics {
  double train_time = 0.0;
  double predict_time = 0.0;
  double explain_time = 0.0;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Rank-based AUC with tied scores counted one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             std::span<const int> labels, double threshold);

// Mean |base + sum(phi) - score(x)| over the rows of `instances`.
double explanation_error(const explain::ExplainFn& explainer, const model::Scorer& model,
                         const Matrix& instances);

// Lower bound on max ||phi(x') - phi(x)||_2 over the infinity ball of radius r,
// from the 2d axis extremes, the two diagonal corners and n_probes seeded
// uniform draws.
double sens_max(const explain::ExplainFn& explainer, std::span<const double> x, double r,
                std::size_t n_probes, std::uint64_t seed);

// sens_max at each radius (ascending) where each value also covers the
// candidates of every smaller radius, so the profile is non-decreasing.
std::vector<double> sens_max_profile(const explain::ExplainFn& explainer, std::span<const double> x,
                                     std::span<const double> radii, std::size_t n_probes,
                                     std::uint64_t seed);

// Trapezoid area of the score curve as the features in `order` are replaced
// one by one with `replacement`, over k + 1 grid points starting at x.
double perturbation_curve_area(const model::Scorer& model, std::span<const double> x,
                               std::span<const std::size_t> order, std::size_t k,
                               std::span<const double> replacement);

// Features by descending phi (largest push toward the positive score first),
// ties to the lower index.
std::vector<std::size_t> morf_order(std::span<const double> phi);

double auc_morf(const explain::ExplainFn& explainer, const model::Scorer& model,
                std::span<const double> x, std::size_t k, const explain::Background& background);

struct AdversarialResult {
  // Upper bound on the minimal L2 perturbation that flips the label.
  double distance = 0.0;
  // Unit vector; x + distance * direction carries the flipped label.
  std::vector<double> direction;
  std::size_t directions_tried = 0;
};

inline constexpr std::string_view kAdversarialMethod = "ray-bisection-upper-bound";

AdversarialResult adversarial_robustness(const model::Scorer& model, std::span<const double> x,
                                         const Matrix& candidates, std::size_t n_random_dirs,
                                         std::uint64_t seed);

struct LipschitzResult {
  double value = 0.0;
  std::size_t pairs_evaluated = 0;
};

LipschitzResult lipschitz_lower(const model::Scorer& model, const Matrix& instances,
                                std::size_t max_pairs, std::uint64_t seed);

}  // namespace gridbench::metrics
