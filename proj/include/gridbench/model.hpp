#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridbench/common.hpp"
#include "json.hpp"

namespace gridbench::model {

enum class ModelKind { kLogReg, kTree, kMlp, kStack };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

using Hyperparameters = std::map<std::string, double>;

// Anything that maps a feature vector to a score and thresholds it. Explainers
// and metrics only need this much, which lets tests plug in analytic stubs.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::size_t input_dim() const = 0;
  // Caller guarantees x.size() == input_dim().
  virtual double score_unchecked(std::span<const double> x) const = 0;
  virtual double threshold() const { return 0.5; }

  double score(std::span<const double> x) const;
  int label(std::span<const double> x) const { return score(x) >= threshold() ? 1 : 0; }
};

class TrainedModel : public Scorer {
 public:
  TrainedModel(ModelKind kind, std::size_t input_dim, Hyperparameters hyper,
               std::uint64_t train_seed);

  ModelKind kind() const noexcept { return kind_; }
  std::size_t input_dim() const override { return input_dim_; }
  double threshold() const override { return threshold_; }
  const Hyperparameters& hyperparameters() const noexcept { return hyper_; }
  std::uint64_t train_seed() const noexcept { return train_seed_; }

  // Fitted values as plain nested numbers.
  virtual nlohmann::json parameters() const = 0;
  // SHA-256 over the canonical encoding of parameters().
  std::string parameter_digest() const;

 private:
  ModelKind kind_;
  std::size_t input_dim_;
  Hyperparameters hyper_;
  std::uint64_t train_seed_;
  double threshold_;
};

using ModelPtr = std::shared_ptr<const TrainedModel>;

class LogisticRegression final : public TrainedModel {
 public:
  LogisticRegression(std::vector<double> weights, double bias, Hyperparameters hyper,
                     std::uint64_t seed);

  double score_unchecked(std::span<const double> x) const override;
  nlohmann::json parameters() const override;

  const std::vector<double>& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }

 private:
  std::vector<double> weights_;
  double bias_;
};

struct TreeNode {
  // Internal node when feature >= 0: x[feature] <= threshold goes left.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Fraction of positive training rows reaching this node.
  double value = 0.0;
  std::size_t count = 0;
};

class DecisionTree final : public TrainedModel {
 public:
  DecisionTree(std::size_t input_dim, std::vector<TreeNode> nodes, Hyperparameters hyper,
               std::uint64_t seed);

  double score_unchecked(std::span<const double> x) const override;
  nlohmann::json parameters() const override;

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

// One tanh hidden layer and a sigmoid output unit.
struct MlpParameters {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::vector<double> w1;  // hidden x inputs, row-major
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // hidden
  double b2 = 0.0;

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

double mlp_forward(const MlpParameters& p, std::span<const double> x);
// Mean binary cross-entropy plus (l2 / 2) * squared norm of the weights.
double mlp_loss(const MlpParameters& p, const Matrix& x, std::span<const int> y, double l2);
MlpParameters mlp_gradient(const MlpParameters& p, const Matrix& x, std::span<const int> y,
                           double l2);

class Mlp final : public TrainedModel {
 public:
  Mlp(MlpParameters params, Hyperparameters hyper, std::uint64_t seed);

  double score_unchecked(std::span<const double> x) const override;
  nlohmann::json parameters() const override;

  const MlpParameters& weights() const noexcept { return params_; }

 private:
  MlpParameters params_;
};

class StackedEnsemble final : public TrainedModel {
 public:
  StackedEnsemble(std::vector<ModelPtr> first_level, ModelPtr second_level, std::size_t folds,
                  std::vector<std::size_t> fold_assignment, Hyperparameters hyper,
                  std::uint64_t seed);

  double score_unchecked(std::span<const double> x) const override;
  nlohmann::json parameters() const override;

  std::vector<double> first_level_scores(std::span<const double> x) const;

  const std::vector<ModelPtr>& first_level() const noexcept { return first_level_; }
  const ModelPtr& second_level() const noexcept { return second_level_; }
  std::size_t folds() const noexcept { return folds_; }
  const std::vector<std::size_t>& fold_assignment() const noexcept { return fold_assignment_; }

 private:
  std::vector<ModelPtr> first_level_;
  ModelPtr second_level_;
  std::size_t folds_;
  std::vector<std::size_t> fold_assignment_;
};

struct ModelSpec {
  ModelKind kind = ModelKind::kLogReg;
  Hyperparameters hyper;
};

// Hyperparameters merged over the defaults for `kind`. Unknown keys throw
// InvalidConfig.
Hyperparameters resolve_hyperparameters(ModelKind kind, const Hyperparameters& overrides);

ModelPtr train(ModelKind kind, const Matrix& x, std::span<const int> y,
               const Hyperparameters& hyper, std::uint64_t seed);

std::shared_ptr<const StackedEnsemble> train_stack(const std::vector<ModelSpec>& first_specs,
                                                   const ModelSpec& second_spec, const Matrix& x,
                                                   std::span<const int> y, std::size_t folds,
                                                   std::uint64_t seed);

}  // namespace gridbench::model
