#include "gridbench/preprocess.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace gridbench::preprocess {

namespace {

using data::FeatureKind;

void check_schema(const std::vector<data::FeatureDescriptor>& expected,
                  const std::vector<data::FeatureDescriptor>& actual) {
  if (expected.size() != actual.size())
    throw Error(ErrorCode::kSchemaMismatch,
                "expected " + std::to_string(expected.size()) + " features, got " +
                    std::to_string(actual.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].name != actual[i].name || expected[i].kind != actual[i].kind)
      throw Error(ErrorCode::kSchemaMismatch, "feature " + std::to_string(i) + " is '" +
                                                  actual[i].name + "', expected '" +
                                                  expected[i].name + "'");
  }
}

std::size_t encoded_width(const EncodeStep& encode) {
  std::size_t width = 0;
  for (const auto& cats : encode.categories)
    width += (encode.onehot && !cats.empty()) ? cats.size() : 1;
  return width;
}

std::vector<double> encode_row(const EncodeStep& encode, const data::Row& row) {
  std::vector<double> out;
  out.reserve(row.size());
  for (std::size_t f = 0; f < row.size(); ++f) {
    const auto& cats = encode.categories[f];
    if (const double* v = std::get_if<double>(&row[f])) {
      out.push_back(*v);
      continue;
    }
    const auto& value = std::get<std::string>(row[f]);
    auto it = std::find(cats.begin(), cats.end(), value);
    if (encode.onehot) {
      for (std::size_t k = 0; k < cats.size(); ++k)
        out.push_back(it != cats.end() && static_cast<std::size_t>(it - cats.begin()) == k ? 1.0 : 0.0);
    } else {
      out.push_back(it == cats.end() ? -1.0 : static_cast<double>(it - cats.begin()));
    }
  }
  return out;
}

void minmax_in_place(const MinMaxStep& step, std::vector<double>& row) {
  for (std::size_t c = 0; c < row.size(); ++c) {
    double span = step.max[c] - step.min[c];
    row[c] = span > 0.0 ? (row[c] - step.min[c]) / span : 0.0;
  }
}

std::vector<double> project(const PcaStep& step, const std::vector<double>& row) {
  const std::size_t k = step.components.cols();
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < row.size(); ++i) {
    double centered = row[i] - step.mean[i];
    for (std::size_t j = 0; j < k; ++j) out[j] += centered * step.components(i, j);
  }
  return out;
}

PcaStep fit_pca(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  PcaStep step;
  step.mean = x.column_means();
  Eigen::MatrixXd centered(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) centered(r, c) = x(r, c) - step.mean[c];
  Eigen::MatrixXd cov = centered.transpose() * centered;
  if (n > 1) cov /= static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  Eigen::VectorXd values = solver.eigenvalues();
  Eigen::MatrixXd vectors = solver.eigenvectors();

  // Eigen returns ascending eigenvalues; walk from the top.
  double largest = d > 0 ? std::max(values(d - 1), 0.0) : 0.0;
  std::vector<double> clamped(d);
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double v = values(static_cast<Eigen::Index>(d - 1 - j));
    // Eigenvalues at rounding level belong to the null space.
    clamped[j] = v > 1e-12 * largest && v > 0.0 ? v : 0.0;
    total += clamped[j];
  }

  step.components = Matrix(d, k);
  step.explained_variance_ratio.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    Eigen::VectorXd axis = vectors.col(static_cast<Eigen::Index>(d - 1 - j));
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < axis.size(); ++i)
      if (std::abs(axis(i)) > std::abs(axis(arg))) arg = i;
    if (axis(arg) < 0) axis = -axis;
    for (std::size_t i = 0; i < d; ++i) step.components(i, j) = axis(static_cast<Eigen::Index>(i));
    step.explained_variance_ratio[j] = total > 0.0 ? clamped[j] / total : 0.0;
  }
  return step;
}

}  // namespace

FittedPipeline::FittedPipeline(PipelineConfig config, std::vector<data::FeatureDescriptor> input,
                               EncodeStep encode, std::optional<MinMaxStep> minmax,
                               std::optional<PcaStep> pca)
    : config_(config),
      input_(std::move(input)),
      encode_(std::move(encode)),
      minmax_(std::move(minmax)),
      pca_(std::move(pca)) {
  encoded_dim_ = encoded_width(encode_);
}

std::size_t FittedPipeline::output_dimension() const noexcept {
  return pca_ ? pca_->components.cols() : encoded_dim_;
}

std::vector<std::string> FittedPipeline::output_names() const {
  std::vector<std::string> names;
  if (pca_) {
    for (std::size_t j = 0; j < pca_->components.cols(); ++j) names.push_back("pc" + std::to_string(j + 1));
    return names;
  }
  for (std::size_t f = 0; f < input_.size(); ++f) {
    const auto& cats = encode_.categories[f];
    if (encode_.onehot && !cats.empty()) {
      for (const auto& c : cats) names.push_back(input_[f].name + "=" + c);
    } else {
      names.push_back(input_[f].name);
    }
  }
  return names;
}

std::vector<double> FittedPipeline::apply_row(const data::Row& row) const {
  if (row.size() != input_.size())
    throw Error(ErrorCode::kSchemaMismatch, "row has " + std::to_string(row.size()) + " cells");
  std::vector<double> out = encode_row(encode_, row);
  if (minmax_) minmax_in_place(*minmax_, out);
  if (pca_) out = project(*pca_, out);
  return out;
}

Matrix FittedPipeline::apply(const data::Dataset& ds) const {
  check_schema(input_, ds.descriptors());
  Matrix out(0, output_dimension());
  for (const auto& row : ds.rows()) out.append_row(apply_row(row));
  return out;
}

FittedPipeline fit_pipeline(const data::Dataset& train, const PipelineConfig& config) {
  if (config.use_pca && config.pca_components < 1)
    throw Error(ErrorCode::kInvalidConfig, "pca_components must be at least 1");

  EncodeStep encode;
  encode.onehot = config.use_onehot;
  const auto& descriptors = train.descriptors();
  encode.categories.resize(descriptors.size());
  for (std::size_t f = 0; f < descriptors.size(); ++f) {
    if (descriptors[f].kind != FeatureKind::kCategorical) continue;
    auto& cats = encode.categories[f];
    for (const auto& row : train.rows()) {
      const auto& v = std::get<std::string>(row[f]);
      if (std::find(cats.begin(), cats.end(), v) == cats.end()) cats.push_back(v);
    }
  }

  Matrix encoded(0, encoded_width(encode));
  for (const auto& row : train.rows()) encoded.append_row(encode_row(encode, row));

  std::optional<MinMaxStep> minmax;
  if (config.use_minmax) {
    MinMaxStep step;
    step.min.assign(encoded.cols(), 0.0);
    step.max.assign(encoded.cols(), 0.0);
    for (std::size_t c = 0; c < encoded.cols(); ++c) {
      double lo = encoded(0, c), hi = encoded(0, c);
      for (std::size_t r = 1; r < encoded.rows(); ++r) {
        lo = std::min(lo, encoded(r, c));
        hi = std::max(hi, encoded(r, c));
      }
      step.min[c] = lo;
      step.max[c] = hi;
    }
    for (std::size_t r = 0; r < encoded.rows(); ++r) {
      std::vector<double> row(encoded.row(r).begin(), encoded.row(r).end());
      minmax_in_place(step, row);
      std::copy(row.begin(), row.end(), encoded.row(r).begin());
    }
    minmax = std::move(step);
  }

  std::optional<PcaStep> pca;
  if (config.use_pca) {
    if (config.pca_components > encoded.cols())
      throw Error(ErrorCode::kInvalidConfig,
                  "pca_components " + std::to_string(config.pca_components) +
                      " exceeds encoded dimension " + std::to_string(encoded.cols()));
    pca = fit_pca(encoded, config.pca_components);
  }
  return FittedPipeline(config, descriptors, std::move(encode), std::move(minmax), std::move(pca));
}

}  // namespace gridbench::preprocess
