#include "gridbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gridbench::metrics {

namespace {

void require_both_classes(std::span<const int> labels) {
  bool has0 = false, has1 = false;
  for (int l : labels) (l ? has1 : has0) = true;
  if (!has0 || !has1) throw Error(ErrorCode::kSingleClassLabels, "labels contain one class");
}

double explanation_distance(const explain::Explanation& a, const explain::Explanation& b) {
  return l2_distance(a.phi, b.phi);
}

// Unit draws in [-1, 1]^d for the random probes.
std::vector<std::vector<double>> probe_offsets(std::size_t d, std::size_t n_probes, std::uint64_t seed) {
  std::vector<std::vector<double>> offsets;
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> plus(d, 0.0), minus(d, 0.0);
    plus[i] = 1.0;
    minus[i] = -1.0;
    offsets.push_back(std::move(plus));
    offsets.push_back(std::move(minus));
  }
  offsets.emplace_back(d, 1.0);
  offsets.emplace_back(d, -1.0);
  Rng rng(seed);
  for (std::size_t p = 0; p < n_probes; ++p) {
    std::vector<double> u(d);
    for (double& v : u) v = rng.uniform(-1.0, 1.0);
    offsets.push_back(std::move(u));
  }
  return offsets;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum += midrank;
    i = j + 1;
  }
  for (int l : labels) n_pos += l == 1;
  const double pos = static_cast<double>(n_pos);
  const double neg = static_cast<double>(n - n_pos);
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::kDimensionMismatch, "scores and labels differ in length");
  if (scores.size() < 2) throw Error(ErrorCode::kSingleClassLabels, "need at least two instances");
  require_both_classes(labels);

  ClassificationMetrics m;
  auto& c = m.confusion;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) (predicted ? c.tp : c.fn)++;
    else (predicted ? c.fp : c.tn)++;
  }
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  m.false_positive_rate = fp / (fp + tn);
  m.balanced_accuracy = (tp / (tp + fn) + tn / (tn + fp)) / 2.0;
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  m.mcc = denom > 0.0 ? (tp * tn - fp * fn) / std::sqrt(denom) : 0.0;
  m.auc = roc_auc(scores, labels);
  return m;
}

double explanation_error(const explain::ExplainFn& explainer, const model::Scorer& model,
                         const Matrix& instances) {
  if (instances.rows() == 0) throw Error(ErrorCode::kInvalidSpec, "no instances to explain");
  double total = 0.0;
  for (std::size_t r = 0; r < instances.rows(); ++r) {
    auto x = instances.row(r);
    explain::Explanation e = explainer(x);
    double reconstructed = e.base_value;
    for (double p : e.phi) reconstructed += p;
    total += std::abs(reconstructed - model.score(x));
  }
  return total / static_cast<double>(instances.rows());
}

std::vector<double> sens_max_profile(const explain::ExplainFn& explainer, std::span<const double> x,
                                     std::span<const double> radii, std::size_t n_probes,
                                     std::uint64_t seed) {
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "radius must be non-negative");
    if (i && radii[i] < radii[i - 1]) throw Error(ErrorCode::kInvalidSpec, "radii must be ascending");
  }
  std::vector<double> profile(radii.size(), 0.0);
  if (radii.empty()) return profile;
  const std::size_t d = x.size();
  const explain::Explanation reference = explainer(x);
  const auto offsets = probe_offsets(d, n_probes, seed);
  std::vector<double> probe(d);
  double running = 0.0;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double r = radii[k];
    if (r > 0.0) {
      for (const auto& u : offsets) {
        for (std::size_t i = 0; i < d; ++i) probe[i] = x[i] + r * u[i];
        running = std::max(running, explanation_distance(explainer(probe), reference));
      }
    }
    profile[k] = running;
  }
  return profile;
}

double sens_max(const explain::ExplainFn& explainer, std::span<const double> x, double r,
                std::size_t n_probes, std::uint64_t seed) {
  if (!(r >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "radius must be non-negative");
  if (r == 0.0) return 0.0;
  const double radii[] = {r};
  return sens_max_profile(explainer, x, radii, n_probes, seed).front();
}

std::vector<std::size_t> morf_order(std::span<const double> phi) {
  std::vector<std::size_t> order(phi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return phi[a] > phi[b]; });
  return order;
}

double perturbation_curve_area(const model::Scorer& model, std::span<const double> x,
                               std::span<const std::size_t> order, std::size_t k,
                               std::span<const double> replacement) {
  if (k < 1 || k > x.size() || k > order.size())
    throw Error(ErrorCode::kKOutOfRange, "K = " + std::to_string(k) + " with d = " + std::to_string(x.size()));
  std::vector<double> current(x.begin(), x.end());
  double previous = model.score(current);
  double area = 0.0;
  for (std::size_t step = 0; step < k; ++step) {
    current[order[step]] = replacement[order[step]];
    double next = model.score(current);
    area += (previous + next) / 2.0;
    previous = next;
  }
  return area;
}

double auc_morf(const explain::ExplainFn& explainer, const model::Scorer& model,
                std::span<const double> x, std::size_t k, const explain::Background& background) {
  if (k < 1 || k > x.size())
    throw Error(ErrorCode::kKOutOfRange, "K = " + std::to_string(k) + " with d = " + std::to_string(x.size()));
  explain::Explanation e = explainer(x);
  std::vector<std::size_t> order = morf_order(e.phi);
  std::vector<double> means = background.rows.column_means();
  return perturbation_curve_area(model, x, order, k, means);
}

AdversarialResult adversarial_robustness(const model::Scorer& model, std::span<const double> x,
                                         const Matrix& candidates, std::size_t n_random_dirs,
                                         std::uint64_t seed) {
  const std::size_t d = x.size();
  const int original = model.label(x);
  constexpr std::size_t kScanSteps = 64;
  constexpr double kTolerance = 1e-7;

  // Data diameter: bounding-box diagonal of x and the candidates.
  std::vector<double> lo(x.begin(), x.end()), hi(x.begin(), x.end());
  for (std::size_t r = 0; r < candidates.rows(); ++r)
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], candidates(r, i));
      hi[i] = std::max(hi[i], candidates(r, i));
    }
  double diameter = l2_distance(lo, hi);
  if (!(diameter > 0.0)) diameter = 1.0;

  AdversarialResult best;
  best.distance = std::numeric_limits<double>::infinity();
  std::vector<double> point(d);
  auto flips_at = [&](const std::vector<double>& u, double t) {
    for (std::size_t i = 0; i < d; ++i) point[i] = x[i] + t * u[i];
    return model.label(point) != original;
  };
  // Scans [start, end] along u for the first flip and bisects it down.
  auto search = [&](const std::vector<double>& u, double start, double end) -> bool {
    double prev = start;
    for (std::size_t s = 1; s <= kScanSteps; ++s) {
      if (prev >= best.distance) return false;
      double t = start + (end - start) * static_cast<double>(s) / kScanSteps;
      if (flips_at(u, t)) {
        double a = prev, b = t;
        while (b - a > kTolerance) {
          double mid = a + (b - a) / 2.0;
          (flips_at(u, mid) ? b : a) = mid;
        }
        if (b < best.distance) {
          best.distance = b;
          best.direction = u;
        }
        return true;
      }
      prev = t;
    }
    return false;
  };

  for (std::size_t r = 0; r < candidates.rows(); ++r) {
    auto c = candidates.row(r);
    if (model.label(c) == original) continue;
    double length = l2_distance(c, x);
    if (!(length > 0.0)) continue;
    std::vector<double> u(d);
    for (std::size_t i = 0; i < d; ++i) u[i] = (c[i] - x[i]) / length;
    ++best.directions_tried;
    search(u, 0.0, length);
  }

  Rng rng(seed);
  for (std::size_t k = 0; k < n_random_dirs; ++k) {
    std::vector<double> u(d);
    for (double& v : u) v = rng.normal();
    double norm = l2_norm(u);
    if (!(norm > 0.0)) continue;
    for (double& v : u) v /= norm;
    ++best.directions_tried;
    // Grow the segment up to ten diameters when nothing flips.
    double start = 0.0, end = diameter;
    while (!search(u, start, end) && end < 10.0 * diameter && end < best.distance) {
      start = end;
      end = std::min(2.0 * end, 10.0 * diameter);
    }
  }

  if (!std::isfinite(best.distance))
    throw Error(ErrorCode::kNoFlipFound, "label constant over " + std::to_string(best.directions_tried) + " directions");
  return best;
}

LipschitzResult lipschitz_lower(const model::Scorer& model, const Matrix& instances,
                                std::size_t max_pairs, std::uint64_t seed) {
  const std::size_t n = instances.rows();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = model.score(instances.row(i));

  LipschitzResult result;
  auto visit = [&](std::size_t i, std::size_t j) {
    double dist = l2_distance(instances.row(i), instances.row(j));
    if (!(dist > 0.0)) return;
    ++result.pairs_evaluated;
    result.value = std::max(result.value, std::abs(scores[i] - scores[j]) / dist);
  };
  const std::size_t total = n < 2 ? 0 : n * (n - 1) / 2;
  if (total <= max_pairs) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) visit(i, j);
  } else {
    Rng rng(seed);
    for (std::size_t p = 0; p < max_pairs; ++p) {
      std::size_t i = static_cast<std::size_t>(rng.below(n));
      std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
      if (j >= i) ++j;
      visit(i, j);
    }
  }
  if (result.pairs_evaluated == 0)
    throw Error(ErrorCode::kAllInstancesIdentical, "no pair of distinct instances");
  return result;
}

}  // namespace gridbench::metrics
