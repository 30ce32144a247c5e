#include "gridbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridbench/canonical_json.hpp"

namespace gridbench::model {

namespace {

using nlohmann::json;

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_training_set(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size())
    throw Error(ErrorCode::kDimensionMismatch, std::to_string(x.rows()) + " rows but " +
                                                   std::to_string(y.size()) + " labels");
  if (x.rows() < 2) throw Error(ErrorCode::kSingleClassTrainingSet, "fewer than two rows");
  bool has0 = false, has1 = false;
  for (int label : y) {
    if (label == 0) has0 = true;
    else if (label == 1) has1 = true;
    else throw Error(ErrorCode::kInvalidSpec, "labels must be 0 or 1");
  }
  if (!has0 || !has1) throw Error(ErrorCode::kSingleClassTrainingSet, "training labels have one class");
  if (!all_finite(x.data())) throw Error(ErrorCode::kNonFiniteFeature, "training matrix has NaN or Inf");
}

std::size_t as_count(const Hyperparameters& h, const std::string& key) {
  double v = h.at(key);
  if (!(v >= 0) || v != std::floor(v))
    throw Error(ErrorCode::kInvalidConfig, key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

const Hyperparameters& defaults(ModelKind kind) {
  static const Hyperparameters logreg{
      {"epochs", 1000}, {"learning_rate", 0.5}, {"l2", 1e-4}, {"threshold", 0.5}};
  static const Hyperparameters tree{
      {"max_depth", 5}, {"min_samples_leaf", 1}, {"min_samples_split", 2}, {"threshold", 0.5}};
  static const Hyperparameters mlp{{"hidden", 16},  {"epochs", 500}, {"learning_rate", 0.1},
                                   {"l2", 0.0},     {"threshold", 0.5}};
  static const Hyperparameters stack{{"folds", 5}, {"threshold", 0.5}};
  switch (kind) {
    case ModelKind::kLogReg: return logreg;
    case ModelKind::kTree: return tree;
    case ModelKind::kMlp: return mlp;
    case ModelKind::kStack: return stack;
  }
  return stack;
}

json node_json(const TreeNode& n) {
  return json{{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left},
              {"right", n.right},     {"value", n.value},         {"count", n.count}};
}

json model_summary(const TrainedModel& m) {
  return json{{"kind", to_string(m.kind())},
              {"hyperparameters", m.hyperparameters()},
              {"train_seed", m.train_seed()},
              {"parameters", m.parameters()}};
}

// ---- logistic regression ----

ModelPtr train_logreg(const Matrix& x, std::span<const int> y, const Hyperparameters& h,
                      std::uint64_t seed) {
  const std::size_t n = x.rows(), d = x.cols();
  const std::size_t epochs = as_count(h, "epochs");
  const double lr = h.at("learning_rate");
  const double l2 = h.at("l2");
  std::vector<double> w(d, 0.0), grad(d);
  double b = 0.0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto row = x.row(i);
      double z = b;
      for (std::size_t j = 0; j < d; ++j) z += w[j] * row[j];
      double err = sigmoid(z) - y[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * row[j];
      grad_b += err;
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= lr * (grad[j] / static_cast<double>(n) + l2 * w[j]);
    b -= lr * grad_b / static_cast<double>(n);
  }
  return std::make_shared<LogisticRegression>(std::move(w), b, h, seed);
}

// ---- CART ----

struct TreeBuilder {
  const Matrix& x;
  std::span<const int> y;
  std::size_t max_depth;
  std::size_t min_leaf;
  std::size_t min_split;
  std::vector<TreeNode> nodes;

  static double gini(double pos, double count) {
    if (count <= 0) return 0.0;
    double p = pos / count;
    return 2.0 * p * (1.0 - p);
  }

  int build(std::vector<std::size_t>& idx, std::size_t depth) {
    const double count = static_cast<double>(idx.size());
    double pos = 0;
    for (std::size_t i : idx) pos += y[i];
    int id = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{-1, 0.0, -1, -1, pos / count, idx.size()});

    const double parent = gini(pos, count);
    if (depth >= max_depth || idx.size() < min_split || parent == 0.0) return id;

    // Strict improvement keeps the first candidate found, i.e. the lowest
    // feature index and then the lowest threshold.
    double best = parent * count - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < x.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
      double left_pos = 0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_pos += y[order[k]];
        double lo = x(order[k], f), hi = x(order[k + 1], f);
        if (lo == hi) continue;
        std::size_t n_left = k + 1, n_right = order.size() - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        double nl = static_cast<double>(n_left), nr = static_cast<double>(n_right);
        double impurity = nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr);
        if (impurity < best) {
          best = impurity;
          best_feature = static_cast<int>(f);
          double mid = lo + (hi - lo) / 2.0;
          best_threshold = mid < hi ? mid : lo;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (x(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    int l = build(left, depth + 1);
    int r = build(right, depth + 1);
    nodes[static_cast<std::size_t>(id)].feature = best_feature;
    nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

ModelPtr train_tree(const Matrix& x, std::span<const int> y, const Hyperparameters& h,
                    std::uint64_t seed) {
  TreeBuilder builder{x, y, as_count(h, "max_depth"), std::max<std::size_t>(1, as_count(h, "min_samples_leaf")),
                      std::max<std::size_t>(2, as_count(h, "min_samples_split")), {}};
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  builder.build(idx, 0);
  return std::make_shared<DecisionTree>(x.cols(), std::move(builder.nodes), h, seed);
}

// ---- MLP ----

ModelPtr train_mlp(const Matrix& x, std::span<const int> y, const Hyperparameters& h,
                   std::uint64_t seed) {
  MlpParameters p;
  p.inputs = x.cols();
  p.hidden = as_count(h, "hidden");
  if (p.hidden < 1) throw Error(ErrorCode::kInvalidConfig, "hidden must be at least 1");
  Rng rng(seed);
  // Glorot-uniform weights, zero biases.
  double a1 = std::sqrt(6.0 / static_cast<double>(p.inputs + p.hidden));
  double a2 = std::sqrt(6.0 / static_cast<double>(p.hidden + 1));
  p.w1.resize(p.hidden * p.inputs);
  for (double& w : p.w1) w = rng.uniform(-a1, a1);
  p.b1.assign(p.hidden, 0.0);
  p.w2.resize(p.hidden);
  for (double& w : p.w2) w = rng.uniform(-a2, a2);
  p.b2 = 0.0;

  const std::size_t epochs = as_count(h, "epochs");
  const double lr = h.at("learning_rate");
  const double l2 = h.at("l2");
  std::vector<double> flat = p.flatten();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::vector<double> g = mlp_gradient(p, x, y, l2).flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= lr * g[i];
    p.assign(flat);
  }
  return std::make_shared<Mlp>(std::move(p), h, seed);
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogReg: return "logreg";
    case ModelKind::kTree: return "tree";
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kStack: return "stack";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "logreg") return ModelKind::kLogReg;
  if (text == "tree") return ModelKind::kTree;
  if (text == "mlp") return ModelKind::kMlp;
  if (text == "stack") return ModelKind::kStack;
  throw Error(ErrorCode::kInvalidConfig, "unknown model kind '" + std::string(text) + "'");
}

double Scorer::score(std::span<const double> x) const {
  if (x.size() != input_dim())
    throw Error(ErrorCode::kDimensionMismatch, "input has " + std::to_string(x.size()) +
                                                   " features, model expects " +
                                                   std::to_string(input_dim()));
  return score_unchecked(x);
}

TrainedModel::TrainedModel(ModelKind kind, std::size_t input_dim, Hyperparameters hyper,
                           std::uint64_t train_seed)
    : kind_(kind),
      input_dim_(input_dim),
      hyper_(std::move(hyper)),
      train_seed_(train_seed),
      threshold_(0.5) {
  if (auto it = hyper_.find("threshold"); it != hyper_.end()) threshold_ = it->second;
  if (!(threshold_ > 0.0 && threshold_ < 1.0))
    throw Error(ErrorCode::kInvalidConfig, "threshold must lie in (0, 1)");
}

std::string TrainedModel::parameter_digest() const { return sha256_hex(canonical_dump(parameters())); }

LogisticRegression::LogisticRegression(std::vector<double> weights, double bias,
                                       Hyperparameters hyper, std::uint64_t seed)
    : TrainedModel(ModelKind::kLogReg, weights.size(), std::move(hyper), seed),
      weights_(std::move(weights)),
      bias_(bias) {}

double LogisticRegression::score_unchecked(std::span<const double> x) const {
  double z = bias_;
  for (std::size_t j = 0; j < weights_.size(); ++j) z += weights_[j] * x[j];
  return sigmoid(z);
}

json LogisticRegression::parameters() const { return json{{"weights", weights_}, {"bias", bias_}}; }

DecisionTree::DecisionTree(std::size_t input_dim, std::vector<TreeNode> nodes,
                           Hyperparameters hyper, std::uint64_t seed)
    : TrainedModel(ModelKind::kTree, input_dim, std::move(hyper), seed), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error(ErrorCode::kInvalidSpec, "tree has no nodes");
}

double DecisionTree::score_unchecked(std::span<const double> x) const {
  const TreeNode* node = &nodes_.front();
  while (node->feature >= 0) {
    int next = x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
    node = &nodes_[static_cast<std::size_t>(next)];
  }
  return node->value;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.feature >= 0) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return deepest;
}

json DecisionTree::parameters() const {
  json nodes = json::array();
  for (const auto& n : nodes_) nodes.push_back(node_json(n));
  return json{{"nodes", nodes}};
}

std::vector<double> MlpParameters::flatten() const {
  std::vector<double> flat;
  flat.reserve(w1.size() + b1.size() + w2.size() + 1);
  flat.insert(flat.end(), w1.begin(), w1.end());
  flat.insert(flat.end(), b1.begin(), b1.end());
  flat.insert(flat.end(), w2.begin(), w2.end());
  flat.push_back(b2);
  return flat;
}

void MlpParameters::assign(std::span<const double> flat) {
  if (flat.size() != w1.size() + b1.size() + w2.size() + 1)
    throw Error(ErrorCode::kDimensionMismatch, "flat MLP parameter vector has the wrong size");
  auto it = flat.begin();
  std::copy_n(it, w1.size(), w1.begin());
  it += static_cast<std::ptrdiff_t>(w1.size());
  std::copy_n(it, b1.size(), b1.begin());
  it += static_cast<std::ptrdiff_t>(b1.size());
  std::copy_n(it, w2.size(), w2.begin());
  it += static_cast<std::ptrdiff_t>(w2.size());
  b2 = *it;
}

namespace {

double mlp_logit(const MlpParameters& p, std::span<const double> x, std::vector<double>& hidden) {
  hidden.resize(p.hidden);
  double z = p.b2;
  for (std::size_t h = 0; h < p.hidden; ++h) {
    double a = p.b1[h];
    const double* w = p.w1.data() + h * p.inputs;
    for (std::size_t j = 0; j < p.inputs; ++j) a += w[j] * x[j];
    hidden[h] = std::tanh(a);
    z += p.w2[h] * hidden[h];
  }
  return z;
}

double weight_norm_sq(const MlpParameters& p) {
  double s = 0.0;
  for (double w : p.w1) s += w * w;
  for (double w : p.w2) s += w * w;
  return s;
}

}  // namespace

double mlp_forward(const MlpParameters& p, std::span<const double> x) {
  thread_local std::vector<double> hidden;
  return sigmoid(mlp_logit(p, x, hidden));
}

double mlp_loss(const MlpParameters& p, const Matrix& x, std::span<const int> y, double l2) {
  std::vector<double> hidden;
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double z = mlp_logit(p, x.row(i), hidden);
    total += softplus(z) - y[i] * z;
  }
  return total / static_cast<double>(x.rows()) + 0.5 * l2 * weight_norm_sq(p);
}

MlpParameters mlp_gradient(const MlpParameters& p, const Matrix& x, std::span<const int> y,
                           double l2) {
  MlpParameters g = p;
  std::fill(g.w1.begin(), g.w1.end(), 0.0);
  std::fill(g.b1.begin(), g.b1.end(), 0.0);
  std::fill(g.w2.begin(), g.w2.end(), 0.0);
  g.b2 = 0.0;
  std::vector<double> hidden;
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row(i);
    double dz = (sigmoid(mlp_logit(p, row, hidden)) - y[i]) * inv_n;
    g.b2 += dz;
    for (std::size_t h = 0; h < p.hidden; ++h) {
      g.w2[h] += dz * hidden[h];
      double da = dz * p.w2[h] * (1.0 - hidden[h] * hidden[h]);
      g.b1[h] += da;
      double* gw = g.w1.data() + h * p.inputs;
      for (std::size_t j = 0; j < p.inputs; ++j) gw[j] += da * row[j];
    }
  }
  for (std::size_t k = 0; k < g.w1.size(); ++k) g.w1[k] += l2 * p.w1[k];
  for (std::size_t k = 0; k < g.w2.size(); ++k) g.w2[k] += l2 * p.w2[k];
  return g;
}

Mlp::Mlp(MlpParameters params, Hyperparameters hyper, std::uint64_t seed)
    : TrainedModel(ModelKind::kMlp, params.inputs, std::move(hyper), seed), params_(std::move(params)) {}

double Mlp::score_unchecked(std::span<const double> x) const { return mlp_forward(params_, x); }

json Mlp::parameters() const {
  return json{{"inputs", params_.inputs}, {"hidden", params_.hidden}, {"w1", params_.w1},
              {"b1", params_.b1},         {"w2", params_.w2},         {"b2", params_.b2}};
}

StackedEnsemble::StackedEnsemble(std::vector<ModelPtr> first_level, ModelPtr second_level,
                                 std::size_t folds, std::vector<std::size_t> fold_assignment,
                                 Hyperparameters hyper, std::uint64_t seed)
    : TrainedModel(ModelKind::kStack, first_level.empty() ? 0 : first_level.front()->input_dim(),
                   std::move(hyper), seed),
      first_level_(std::move(first_level)),
      second_level_(std::move(second_level)),
      folds_(folds),
      fold_assignment_(std::move(fold_assignment)) {
  if (first_level_.empty()) throw Error(ErrorCode::kInvalidConfig, "stack needs a first-level model");
  for (const auto& m : first_level_)
    if (m->input_dim() != input_dim())
      throw Error(ErrorCode::kDimensionMismatch, "first-level models disagree on input dimension");
  if (second_level_->input_dim() != first_level_.size())
    throw Error(ErrorCode::kDimensionMismatch, "second-level input dimension must equal m");
}

std::vector<double> StackedEnsemble::first_level_scores(std::span<const double> x) const {
  std::vector<double> s(first_level_.size());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = first_level_[j]->score_unchecked(x);
  return s;
}

double StackedEnsemble::score_unchecked(std::span<const double> x) const {
  // Small stacks keep the level-one scores on the stack.
  constexpr std::size_t kInline = 8;
  if (first_level_.size() <= kInline) {
    double s[kInline];
    for (std::size_t j = 0; j < first_level_.size(); ++j) s[j] = first_level_[j]->score_unchecked(x);
    return second_level_->score_unchecked(std::span<const double>(s, first_level_.size()));
  }
  return second_level_->score_unchecked(first_level_scores(x));
}

json StackedEnsemble::parameters() const {
  json first = json::array();
  for (const auto& m : first_level_) first.push_back(model_summary(*m));
  return json{{"first_level", first},
              {"second_level", model_summary(*second_level_)},
              {"folds", folds_},
              {"fold_assignment", fold_assignment_}};
}

Hyperparameters resolve_hyperparameters(ModelKind kind, const Hyperparameters& overrides) {
  Hyperparameters merged = defaults(kind);
  for (const auto& [key, value] : overrides) {
    if (!merged.count(key))
      throw Error(ErrorCode::kInvalidConfig,
                  "unknown hyperparameter '" + key + "' for " + std::string(to_string(kind)));
    if (!std::isfinite(value)) throw Error(ErrorCode::kInvalidConfig, key + " must be finite");
    merged[key] = value;
  }
  return merged;
}

ModelPtr train(ModelKind kind, const Matrix& x, std::span<const int> y, const Hyperparameters& hyper,
               std::uint64_t seed) {
  check_training_set(x, y);
  Hyperparameters h = resolve_hyperparameters(kind, hyper);
  switch (kind) {
    case ModelKind::kLogReg: return train_logreg(x, y, h, seed);
    case ModelKind::kTree: return train_tree(x, y, h, seed);
    case ModelKind::kMlp: return train_mlp(x, y, h, seed);
    case ModelKind::kStack:
      throw Error(ErrorCode::kInvalidConfig, "stacks are trained with train_stack");
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown model kind");
}

std::shared_ptr<const StackedEnsemble> train_stack(const std::vector<ModelSpec>& first_specs,
                                                   const ModelSpec& second_spec, const Matrix& x,
                                                   std::span<const int> y, std::size_t folds,
                                                   std::uint64_t seed) {
  if (first_specs.empty()) throw Error(ErrorCode::kInvalidConfig, "stack needs at least one first-level model");
  if (folds < 2) throw Error(ErrorCode::kInvalidConfig, "folds must be at least 2");
  if (second_spec.kind == ModelKind::kStack)
    throw Error(ErrorCode::kInvalidConfig, "second level cannot itself be a stack");
  check_training_set(x, y);
  const std::size_t n = x.rows();
  if (n < folds) throw Error(ErrorCode::kFoldTooSmall, std::to_string(n) + " rows for " + std::to_string(folds) + " folds");

  // Stratified round-robin fold assignment over seeded class-wise shuffles.
  Rng rng(derive_seed(seed, "folds"));
  std::vector<std::size_t> assignment(n);
  std::size_t cursor = 0;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (y[i] == cls) members.push_back(i);
    rng.shuffle(members);
    for (std::size_t i : members) assignment[i] = cursor++ % folds;
  }

  const std::size_t m = first_specs.size();
  Matrix oof(n, m);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_idx, hold_idx;
    for (std::size_t i = 0; i < n; ++i) (assignment[i] == f ? hold_idx : train_idx).push_back(i);
    std::vector<int> train_y;
    for (std::size_t i : train_idx) train_y.push_back(y[i]);
    bool has0 = std::count(train_y.begin(), train_y.end(), 0) > 0;
    bool has1 = std::count(train_y.begin(), train_y.end(), 1) > 0;
    if (hold_idx.empty() || !has0 || !has1)
      throw Error(ErrorCode::kFoldTooSmall, "fold " + std::to_string(f) + " leaves a single-class training part");
    Matrix train_x = x.select_rows(train_idx);
    for (std::size_t j = 0; j < m; ++j) {
      ModelPtr fold_model = train(first_specs[j].kind, train_x, train_y, first_specs[j].hyper,
                                  derive_seed(seed, "oof", f * m + j));
      for (std::size_t i : hold_idx) oof(i, j) = fold_model->score_unchecked(x.row(i));
    }
  }

  std::vector<ModelPtr> first;
  for (std::size_t j = 0; j < m; ++j)
    first.push_back(train(first_specs[j].kind, x, y, first_specs[j].hyper, derive_seed(seed, "first_level", j)));
  ModelPtr second = train(second_spec.kind, oof, y, second_spec.hyper, derive_seed(seed, "second_level"));

  Hyperparameters hyper{{"folds", static_cast<double>(folds)}, {"threshold", second->threshold()}};
  return std::make_shared<StackedEnsemble>(std::move(first), std::move(second), folds,
                                           std::move(assignment), std::move(hyper), seed);
}

}  // namespace gridbench::model
