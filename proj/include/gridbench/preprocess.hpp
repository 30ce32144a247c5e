#pragma once

#include <string>
#include <vector>

#include "gridbench/common.hpp"
#include "gridbench/data.hpp"

namespace gridbench::preprocess {

// Steps always run in the order one-hot -> min-max -> PCA. With use_onehot
// off, categorical features are encoded as their category index (unseen
// categories become -1) so every configuration yields a numeric matrix.
struct PipelineConfig {
  bool use_onehot = true;
  bool use_minmax = true;
  bool use_pca = false;
  std::size_t pca_components = 0;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct EncodeStep {
  bool onehot = true;
  // Per input feature; empty for numeric features.
  std::vector<std::vector<std::string>> categories;
};

struct MinMaxStep {
  std::vector<double> min;
  std::vector<double> max;
};

struct PcaStep {
  std::vector<double> mean;
  // d_in x k; column j is the j-th principal axis.
  Matrix components;
  std::vector<double> explained_variance_ratio;
};

// Immutable after fit; apply is a pure function of the pipeline and its input.
class FittedPipeline {
 public:
  FittedPipeline(PipelineConfig config, std::vector<data::FeatureDescriptor> input,
                 EncodeStep encode, std::optional<MinMaxStep> minmax,
                 std::optional<PcaStep> pca);

  const PipelineConfig& config() const noexcept { return config_; }
  const std::vector<data::FeatureDescriptor>& input_descriptors() const noexcept { return input_; }
  const EncodeStep& encode_step() const noexcept { return encode_; }
  const std::optional<MinMaxStep>& minmax_step() const noexcept { return minmax_; }
  const std::optional<PcaStep>& pca_step() const noexcept { return pca_; }

  std::size_t encoded_dimension() const noexcept { return encoded_dim_; }
  std::size_t output_dimension() const noexcept;
  // Names of output columns, e.g. "proto=tcp" or "pc1".
  std::vector<std::string> output_names() const;

  Matrix apply(const data::Dataset& ds) const;
  std::vector<double> apply_row(const data::Row& row) const;

 private:
  PipelineConfig config_;
  std::vector<data::FeatureDescriptor> input_;
  EncodeStep encode_;
  std::optional<MinMaxStep> minmax_;
  std::optional<PcaStep> pca_;
  std::size_t encoded_dim_ = 0;
};

FittedPipeline fit_pipeline(const data::Dataset& train, const PipelineConfig& config);

inline Matrix apply(const FittedPipeline& pipeline, const data::Dataset& ds) {
  return pipeline.apply(ds);
}

}  // namespace gridbench::preprocess
