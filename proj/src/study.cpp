#include "gridbench/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "gridbench/canonical_json.hpp"
#include "gridbench/metrics.hpp"
#include "gridbench/stats.hpp"

namespace gridbench::study {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& message) { throw Error(ErrorCode::kInvalidConfig, message); }

// Error text without the leading "Code: ".
std::string bare_message(const Error& e) {
  std::string what = e.what();
  std::string prefix = std::string(to_string(e.code())) + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

model::Hyperparameters read_hyper(const json& j) {
  model::Hyperparameters h;
  if (j.contains("hyper"))
    for (const auto& [key, value] : j["hyper"].items()) h[key] = value.get<double>();
  return h;
}

model::ModelSpec read_base_model(const json& j, const std::string& where) {
  model::ModelSpec spec;
  spec.kind = model::parse_model_kind(j.at("kind").get<std::string>());
  try {
    spec.hyper = model::resolve_hyperparameters(spec.kind, read_hyper(j));
  } catch (const Error& e) {
    invalid(where + ": " + bare_message(e));
  }
  return spec;
}

AlgorithmSpec read_algorithm(const json& j, const std::string& where) {
  AlgorithmSpec alg;
  alg.name = j.at("name").get<std::string>();
  if (alg.name.empty()) invalid(where + ".name is empty");
  const json& m = j.at("model");
  alg.explainer = j.at("explainer").get<std::string>() == "basic_join" ? ExplainerChoice::kBasicJoin
                                                                     : ExplainerChoice::kBlackbox;
  if (m.at("kind").get<std::string>() == "stack") {
    alg.kind = model::ModelKind::kStack;
    try {
      alg.hyper = model::resolve_hyperparameters(model::ModelKind::kStack, read_hyper(m));
    } catch (const Error& e) {
      invalid(where + ".model: " + bare_message(e));
    }
    if (m.contains("folds")) alg.hyper["folds"] = m["folds"].get<double>();
    double folds = alg.hyper["folds"];
    if (folds < 2 || folds != std::floor(folds)) invalid(where + ".model.folds must be an integer >= 2");
    alg.folds = static_cast<std::size_t>(folds);
    std::size_t i = 0;
    for (const auto& f : m.at("first_level"))
      alg.first_level.push_back(read_base_model(f, where + ".model.first_level[" + std::to_string(i++) + "]"));
    alg.second_level = read_base_model(m.at("second_level"), where + ".model.second_level");
  } else {
    auto base = read_base_model(m, where + ".model");
    alg.kind = base.kind;
    alg.hyper = base.hyper;
  }
  if (alg.explainer == ExplainerChoice::kBasicJoin && alg.kind != model::ModelKind::kStack)
    invalid(where + ": the basic_join explainer needs a stacked model");
  return alg;
}

json hyper_json(const model::Hyperparameters& h) {
  json out = json::object();
  for (const auto& [k, v] : h) out[k] = v;
  return out;
}

json model_spec_json(const model::ModelSpec& spec) {
  return {{"kind", model::to_string(spec.kind)}, {"hyper", hyper_json(spec.hyper)}};
}

json algorithm_json(const AlgorithmSpec& alg) {
  json m;
  if (alg.kind == model::ModelKind::kStack) {
    json first = json::array();
    for (const auto& f : alg.first_level) first.push_back(model_spec_json(f));
    m = {{"kind", "stack"},
         {"first_level", first},
         {"second_level", model_spec_json(alg.second_level)},
         {"folds", alg.folds},
         {"hyper", hyper_json(alg.hyper)}};
  } else {
    m = {{"kind", model::to_string(alg.kind)}, {"hyper", hyper_json(alg.hyper)}};
  }
  return {{"name", alg.name}, {"model", m}, {"explainer", to_string(alg.explainer)}};
}

json synthetic_json(const data::SyntheticSpec& s) {
  return {{"n", s.n},
          {"d_numeric", s.d_numeric},
          {"d_categorical", s.d_categorical},
          {"anomaly_fraction", s.anomaly_fraction},
          {"class_separation", s.class_separation},
          {"categories_per_feature", s.categories_per_feature}};
}

std::string_view mode_name(explain::ShapleyMode mode) {
  switch (mode) {
    case explain::ShapleyMode::kExact: return "exact";
    case explain::ShapleyMode::kSampled: return "sampled";
    default: return "auto";
  }
}

bool is_classification_metric(const std::string& m) {
  return m == "false_positive_rate" || m == "auc" || m == "balanced_accuracy" || m == "mcc";
}
bool is_explanation_metric(const std::string& m) {
  return m == "explanation_error" || m == "sens_max" || m == "auc_morf";
}
bool is_robustness_metric(const std::string& m) { return m == "delta_adv_mean" || m == "lipschitz_lower"; }

bool metric_enabled(const MetricSettings& s, const std::string& m) {
  if (is_classification_metric(m)) return s.classification;
  if (is_explanation_metric(m)) return s.explanation;
  if (is_robustness_metric(m)) return s.robustness;
  if (m == "explain_time") return s.explanation;
  return true;
}

// ---- per-dataset work ----

struct SeedLog {
  json entries = json::array();
  std::uint64_t take(std::uint64_t master, const std::string& label, std::uint64_t index) {
    std::uint64_t seed = derive_seed(master, label, index);
    entries.push_back({{"label", label}, {"index", index}, {"seed", seed}});
    return seed;
  }
};

struct AlgorithmOutcome {
  json model;
  json explainer;
  json metrics;
  json timing;
  std::map<std::string, double> values;
};

struct DatasetOutcome {
  json dataset;
  json fit;
  AlgorithmOutcome algorithms[2];
};

struct DatasetSeeds {
  std::uint64_t split, train, background, explain, sens_max, adversarial, lipschitz;
};

json pipeline_parameters(const preprocess::FittedPipeline& p) {
  json enc = json::array();
  for (const auto& cats : p.encode_step().categories) enc.push_back(cats);
  json out = {{"encode", {{"onehot", p.encode_step().onehot}, {"categories", enc}}}};
  if (p.minmax_step()) out["minmax"] = {{"min", p.minmax_step()->min}, {"max", p.minmax_step()->max}};
  if (p.pca_step()) {
    const auto& pca = *p.pca_step();
    json comps = json::array();
    for (std::size_t r = 0; r < pca.components.rows(); ++r) {
      auto row = pca.components.row(r);
      comps.push_back(std::vector<double>(row.begin(), row.end()));
    }
    out["pca"] = {{"mean", pca.mean}, {"components", comps}, {"explained_variance_ratio", pca.explained_variance_ratio}};
  }
  return out;
}

model::ModelPtr train_algorithm(const AlgorithmSpec& alg, const Matrix& x, std::span<const int> y,
                                std::uint64_t seed) {
  if (alg.kind == model::ModelKind::kStack)
    return model::train_stack(alg.first_level, alg.second_level, x, y, alg.folds, seed);
  return model::train(alg.kind, x, y, alg.hyper, seed);
}

json model_summary(const model::TrainedModel& m) {
  return {{"kind", model::to_string(m.kind())},
          {"hyperparameters", hyper_json(m.hyperparameters())},
          {"train_seed", m.train_seed()},
          {"parameter_digest", m.parameter_digest()}};
}

AlgorithmOutcome run_algorithm(const StudyConfig& cfg, const AlgorithmSpec& alg, const std::string& ds_name,
                               const DatasetSeeds& seeds, const Matrix& xtr, const std::vector<int>& ytr,
                               const Matrix& xte, const std::vector<int>& yte) {
  AlgorithmOutcome out;
  json timing = {{"algorithm", alg.name}, {"dataset", ds_name}};

  metrics::Stopwatch train_clock;
  model::ModelPtr trained = train_algorithm(alg, xtr, ytr, seeds.train);
  timing["train_time"] = train_clock.seconds();

  json model_entry = model_summary(*trained);
  model_entry["algorithm"] = alg.name;
  model_entry["dataset"] = ds_name;
  if (auto stack = std::dynamic_pointer_cast<const model::StackedEnsemble>(trained)) {
    json first = json::array();
    for (const auto& f : stack->first_level()) first.push_back(model_summary(*f));
    model_entry["first_level"] = first;
    model_entry["second_level"] = model_summary(*stack->second_level());
  }
  if (cfg.store_full_parameters) model_entry["parameters"] = trained->parameters();
  out.model = model_entry;

  metrics::Stopwatch predict_clock;
  std::vector<double> scores(xte.rows());
  for (std::size_t i = 0; i < xte.rows(); ++i) scores[i] = trained->score(xte.row(i));
  timing["predict_time"] = predict_clock.seconds();

  json entry = {{"algorithm", alg.name}, {"dataset", ds_name}};
  if (cfg.metrics.classification) {
    auto c = metrics::classification_metrics(scores, yte, trained->threshold());
    entry["classification"] = {{"false_positive_rate", c.false_positive_rate},
                               {"auc", c.auc},
                               {"balanced_accuracy", c.balanced_accuracy},
                               {"mcc", c.mcc},
                               {"threshold", trained->threshold()},
                               {"confusion", {{"tp", c.confusion.tp}, {"fp", c.confusion.fp},
                                              {"tn", c.confusion.tn}, {"fn", c.confusion.fn}}}};
    out.values["false_positive_rate"] = c.false_positive_rate;
    out.values["auc"] = c.auc;
    out.values["balanced_accuracy"] = c.balanced_accuracy;
    out.values["mcc"] = c.mcc;
  }

  const std::size_t n_inst = std::min(cfg.explanation.max_instances, xte.rows());
  std::vector<std::size_t> idx(n_inst);
  std::iota(idx.begin(), idx.end(), 0);
  Matrix instances = xte.select_rows(idx);

  explain::Background background = explain::make_background(xtr, cfg.explanation.background_size, seeds.background);
  auto stack = std::dynamic_pointer_cast<const model::StackedEnsemble>(trained);
  auto explainer_for = [&](std::uint64_t seed) -> explain::ExplainFn {
    explain::ShapleyOptions opts{cfg.explanation.mode, cfg.explanation.n_samples, seed};
    if (alg.explainer == ExplainerChoice::kBasicJoin)
      return [stack, &background, opts](std::span<const double> x) {
        return explain::basic_join_explain(*stack, x, background, opts);
      };
    if (stack)
      return [stack, &background, opts](std::span<const double> x) {
        return explain::blackbox_ensemble_explain(*stack, x, background, opts);
      };
    return [trained, &background, opts](std::span<const double> x) {
      return explain::shapley_explain(*trained, x, background, opts);
    };
  };

  out.explainer = {{"algorithm", alg.name},
                   {"dataset", ds_name},
                   {"kind", to_string(alg.explainer)},
                   {"mode", mode_name(cfg.explanation.mode)},
                   {"n_samples", cfg.explanation.n_samples},
                   {"background_size", background.rows.rows()},
                   {"background_seed", background.sample_seed},
                   {"seed", seeds.explain}};

  double explain_time = 0.0;
  if (cfg.metrics.explanation) {
    const std::size_t k = std::min(cfg.metrics.morf_k, xte.cols());
    const std::vector<double> replacement = background.rows.column_means();
    json explanations = json::array();
    double err_sum = 0.0, sens_sum = 0.0, morf_sum = 0.0;
    for (std::size_t i = 0; i < n_inst; ++i) {
      auto x = instances.row(i);
      std::uint64_t inst_seed = derive_seed(seeds.explain, "instance", i);
      auto fn = explainer_for(inst_seed);
      metrics::Stopwatch clock;
      explain::Explanation e = fn(x);
      explain_time += clock.seconds();
      double total = e.base_value;
      for (double v : e.phi) total += v;
      err_sum += std::abs(total - trained->score(x));
      auto order = metrics::morf_order(e.phi);
      morf_sum += metrics::perturbation_curve_area(*trained, x, order, k, replacement);
      sens_sum += metrics::sens_max(fn, x, cfg.metrics.sens_max_radius, cfg.metrics.sens_max_probes,
                                    derive_seed(seeds.sens_max, "instance", i));
      explanations.push_back({{"instance_index", i},
                              {"phi", e.phi},
                              {"base_value", e.base_value},
                              {"explainer_kind", explain::to_string(e.kind)},
                              {"seed", e.seed}});
    }
    const double n = static_cast<double>(n_inst);
    entry["explanation"] = {{"explanation_error", err_sum / n},
                            {"sens_max", sens_sum / n},
                            {"sens_max_radius", cfg.metrics.sens_max_radius},
                            {"sens_max_probes", cfg.metrics.sens_max_probes},
                            {"sens_max_method", "axis-corner-probe-max"},
                            {"auc_morf", morf_sum / n},
                            {"morf_features_evaluated", k},
                            {"instances_evaluated", n_inst},
                            {"explanations", explanations}};
    out.values["explanation_error"] = err_sum / n;
    out.values["sens_max"] = sens_sum / n;
    out.values["auc_morf"] = morf_sum / n;
  }
  timing["explain_time"] = explain_time;

  if (cfg.metrics.robustness) {
    explain::Background cand = explain::make_background(xtr, cfg.metrics.adversarial_candidates, seeds.adversarial);
    std::vector<double> deltas;
    for (std::size_t i = 0; i < n_inst; ++i) {
      try {
        auto r = metrics::adversarial_robustness(*trained, instances.row(i), cand.rows,
                                                 cfg.metrics.adversarial_random_dirs,
                                                 derive_seed(seeds.adversarial, "instance", i));
        deltas.push_back(r.distance);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoFlipFound) throw;
      }
    }
    if (deltas.empty()) throw Error(ErrorCode::kNoFlipFound, "no evaluated instance could be flipped");
    auto lip = metrics::lipschitz_lower(*trained, xte, cfg.metrics.lipschitz_max_pairs, seeds.lipschitz);
    double mean_delta = stats::mean(deltas);
    entry["robustness"] = {{"delta_adv", deltas},
                           {"delta_adv_mean", mean_delta},
                           {"delta_adv_method", metrics::kAdversarialMethod},
                           {"lipschitz_lower", lip.value},
                           {"pairs_evaluated", lip.pairs_evaluated}};
    out.values["delta_adv_mean"] = mean_delta;
    out.values["lipschitz_lower"] = lip.value;
  }

  out.values["train_time"] = timing["train_time"].get<double>();
  out.values["predict_time"] = timing["predict_time"].get<double>();
  out.values["explain_time"] = explain_time;
  out.metrics = entry;
  out.timing = timing;
  return out;
}

DatasetOutcome run_dataset(const StudyConfig& cfg, const data::Dataset& ds, const DatasetSeeds& seeds,
                           const DatasetSource& source, std::optional<std::uint64_t> synthetic_seed) {
  DatasetOutcome out;
  data::SplitPair parts = data::split(ds, cfg.train_fraction, seeds.split);
  preprocess::FittedPipeline pipeline = preprocess::fit_pipeline(parts.train, cfg.preprocessing);
  Matrix xtr = pipeline.apply(parts.train);
  Matrix xte = pipeline.apply(parts.test);

  json dataset = {{"name", ds.name()},
                  {"content_hash", ds.content_hash()},
                  {"purdue_level", ds.purdue_level() ? json(*ds.purdue_level()) : json(nullptr)},
                  {"split_seed", seeds.split},
                  {"train_fraction", cfg.train_fraction},
                  {"source", ds.provenance().source},
                  {"n_rows", ds.size()},
                  {"n_train", parts.train.size()},
                  {"n_test", parts.test.size()},
                  {"dropped_rows", ds.provenance().dropped_rows}};
  if (!source.manifest.empty()) dataset["manifest_path"] = source.manifest;
  if (source.synthetic) {
    dataset["synthetic_spec"] = synthetic_json(*source.synthetic);
    dataset["synthetic_seed"] = *synthetic_seed;
  }
  out.dataset = dataset;

  json params = pipeline_parameters(pipeline);
  out.fit = {{"dataset", ds.name()},
             {"parameter_digest", sha256_hex(canonical_dump(params))},
             {"output_dimension", pipeline.output_dimension()},
             {"output_names", pipeline.output_names()}};
  if (pipeline.pca_step()) out.fit["explained_variance_ratio"] = pipeline.pca_step()->explained_variance_ratio;
  if (cfg.store_full_parameters) out.fit["parameters"] = params;

  const AlgorithmSpec* algs[2] = {&cfg.algorithm_a, &cfg.algorithm_b};
  for (int a = 0; a < 2; ++a) {
    try {
      out.algorithms[a] = run_algorithm(cfg, *algs[a], ds.name(), seeds, xtr, parts.train.labels(), xte,
                                        parts.test.labels());
    } catch (const Error& e) {
      throw Error(e.code(), "algorithm '" + algs[a]->name + "': " + bare_message(e));
    }
  }
  return out;
}

json comparison_json(const stats::ComparisonResult& r, const std::vector<std::string>& datasets,
                     const stats::PairedSamples& samples) {
  json w, d;
  if (r.wilcoxon)
    w = {{"statistic", r.wilcoxon->statistic},
         {"p_value", r.wilcoxon->p_value},
         {"n_effective", r.wilcoxon->n_effective},
         {"exact", r.wilcoxon->exact}};
  else
    w = {{"incomputable", r.wilcoxon_incomputable}};
  if (r.cohens_d)
    d = {{"value", *r.cohens_d}, {"label", stats::to_string(*r.effect)}};
  else
    d = {{"incomputable", r.cohens_d_incomputable}};
  return {{"metric", r.metric},
          {"datasets", datasets},
          {"a", samples.a},
          {"b", samples.b},
          {"wilcoxon", w},
          {"cohens_d", d},
          {"bootstrap_ci", {{"low", r.bootstrap_ci.low},
                            {"high", r.bootstrap_ci.high},
                            {"level", r.bootstrap_ci.level},
                            {"n_resamples", r.bootstrap_ci.n_resamples},
                            {"method", r.bootstrap_ci.method},
                            {"seed", r.bootstrap_ci.seed}}},
          {"point_estimate", r.point_estimate}};
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << bytes;
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

}  // namespace

std::string_view to_string(ExplainerChoice choice) {
  return choice == ExplainerChoice::kBasicJoin ? "basic_join" : "blackbox";
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "false_positive_rate", "auc",          "balanced_accuracy", "mcc",
      "explanation_error",   "sens_max",     "auc_morf",          "delta_adv_mean",
      "lipschitz_lower",     "train_time",   "predict_time",      "explain_time"};
  return names;
}

StudyConfig parse_config(const json& doc, const fs::path& base_dir) {
  auto violations = store::validate(doc, store::config_schema());
  if (!violations.empty())
    throw Error(ErrorCode::kSchemaViolation, "config: " + store::format_violations(violations));

  StudyConfig cfg;
  cfg.master_seed = doc.at("master_seed").get<std::uint64_t>();

  std::set<std::string> names;
  std::size_t i = 0;
  for (const auto& d : doc.at("datasets")) {
    DatasetSource src;
    std::string where = "datasets[" + std::to_string(i++) + "]";
    if (d.contains("name")) src.name = d["name"].get<std::string>();
    if (d.contains("manifest")) {
      src.manifest = d["manifest"].get<std::string>();
      src.manifest_path = fs::path(src.manifest).is_absolute() ? fs::path(src.manifest) : base_dir / src.manifest;
      if (!fs::is_regular_file(src.manifest_path))
        throw Error(ErrorCode::kMissingFile, where + ": manifest not found: " + src.manifest_path.string());
    } else {
      const json& s = d.at("synthetic");
      data::SyntheticSpec spec;
      spec.n = s.at("n").get<std::size_t>();
      spec.d_numeric = s.at("d_numeric").get<std::size_t>();
      spec.d_categorical = s.at("d_categorical").get<std::size_t>();
      spec.anomaly_fraction = s.at("anomaly_fraction").get<double>();
      spec.class_separation = s.at("class_separation").get<double>();
      spec.categories_per_feature = s.value("categories_per_feature", spec.categories_per_feature);
      if (!(spec.anomaly_fraction > 0.0 && spec.anomaly_fraction < 1.0))
        invalid(where + ".synthetic.anomaly_fraction must lie in (0, 1)");
      if (spec.d_numeric + spec.d_categorical == 0) invalid(where + ".synthetic has no features");
      src.synthetic = spec;
      if (d.contains("purdue_level")) {
        int level = d["purdue_level"].get<int>();
        if (level > 5) invalid(where + ".purdue_level must be 0-5");
        src.purdue_level = level;
      }
    }
    if (!src.name.empty() && !names.insert(src.name).second) invalid("duplicate dataset name '" + src.name + "'");
    cfg.datasets.push_back(std::move(src));
  }

  cfg.train_fraction = doc.at("split").at("train_fraction").get<double>();
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) invalid("split.train_fraction must lie in (0, 1)");

  const json& pre = doc.at("preprocessing");
  cfg.preprocessing.use_onehot = pre.at("use_onehot").get<bool>();
  cfg.preprocessing.use_minmax = pre.at("use_minmax").get<bool>();
  cfg.preprocessing.use_pca = pre.at("use_pca").get<bool>();
  cfg.preprocessing.pca_components = pre.value("pca_components", std::size_t{0});
  if (cfg.preprocessing.use_pca && cfg.preprocessing.pca_components < 1)
    invalid("preprocessing.pca_components must be at least 1 when use_pca is set");

  cfg.algorithm_a = read_algorithm(doc.at("algorithm_a"), "algorithm_a");
  cfg.algorithm_b = read_algorithm(doc.at("algorithm_b"), "algorithm_b");
  if (cfg.algorithm_a.name == cfg.algorithm_b.name) invalid("algorithm names must differ");

  if (doc.contains("explanation")) {
    const json& e = doc["explanation"];
    auto& x = cfg.explanation;
    x.background_size = e.value("background_size", x.background_size);
    x.n_samples = e.value("n_samples", x.n_samples);
    x.max_instances = e.value("max_instances", x.max_instances);
    std::string mode = e.value("mode", std::string("auto"));
    x.mode = mode == "exact" ? explain::ShapleyMode::kExact
             : mode == "sampled" ? explain::ShapleyMode::kSampled
                                 : explain::ShapleyMode::kAuto;
  }

  auto& m = cfg.metrics;
  if (doc.contains("metrics")) {
    const json& j = doc["metrics"];
    m.classification = j.value("classification", m.classification);
    m.explanation = j.value("explanation", m.explanation);
    m.robustness = j.value("robustness", m.robustness);
    m.statistics = j.value("statistics", m.statistics);
    m.sens_max_radius = j.value("sens_max_radius", m.sens_max_radius);
    m.sens_max_probes = j.value("sens_max_probes", m.sens_max_probes);
    m.morf_k = j.value("morf_k", m.morf_k);
    m.adversarial_random_dirs = j.value("adversarial_random_dirs", m.adversarial_random_dirs);
    m.adversarial_candidates = j.value("adversarial_candidates", m.adversarial_candidates);
    m.lipschitz_max_pairs = j.value("lipschitz_max_pairs", m.lipschitz_max_pairs);
    m.bootstrap_resamples = j.value("bootstrap_resamples", m.bootstrap_resamples);
    m.ci_level = j.value("ci_level", m.ci_level);
    if (j.contains("compare")) m.compare = j["compare"].get<std::vector<std::string>>();
  }
  if (!(m.ci_level > 0.0 && m.ci_level < 1.0)) invalid("metrics.ci_level must lie in (0, 1)");
  if (!doc.contains("metrics") || !doc["metrics"].contains("compare")) {
    for (const auto& name : metric_names())
      if (metric_enabled(m, name)) m.compare.push_back(name);
  }
  std::set<std::string> seen;
  for (const auto& name : m.compare) {
    if (!seen.insert(name).second) invalid("metrics.compare lists '" + name + "' twice");
    if (!metric_enabled(m, name)) invalid("metrics.compare names '" + name + "' but its metric group is disabled");
  }
  if (m.statistics && cfg.datasets.size() < 2)
    invalid("statistics need at least 2 datasets, config has " + std::to_string(cfg.datasets.size()));

  if (doc.contains("output")) {
    const json& o = doc["output"];
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    if (o.contains("store_root")) cfg.store_root = resolve(o["store_root"].get<std::string>());
    if (o.contains("report_dir")) cfg.report_dir = resolve(o["report_dir"].get<std::string>());
  }
  cfg.workers = doc.value("workers", std::size_t{0});
  cfg.store_full_parameters = doc.value("store_full_parameters", false);
  return cfg;
}

StudyConfig load_config(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kMissingFile, "config not found: " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

json to_json(const StudyConfig& cfg) {
  json datasets = json::array();
  for (const auto& d : cfg.datasets) {
    json e;
    if (!d.name.empty()) e["name"] = d.name;
    if (d.synthetic) {
      e["synthetic"] = synthetic_json(*d.synthetic);
      if (d.purdue_level) e["purdue_level"] = *d.purdue_level;
    } else {
      e["manifest"] = d.manifest;
    }
    datasets.push_back(e);
  }
  const auto& m = cfg.metrics;
  return {{"master_seed", cfg.master_seed},
          {"datasets", datasets},
          {"split", {{"train_fraction", cfg.train_fraction}}},
          {"preprocessing", {{"use_onehot", cfg.preprocessing.use_onehot},
                             {"use_minmax", cfg.preprocessing.use_minmax},
                             {"use_pca", cfg.preprocessing.use_pca},
                             {"pca_components", cfg.preprocessing.pca_components}}},
          {"algorithm_a", algorithm_json(cfg.algorithm_a)},
          {"algorithm_b", algorithm_json(cfg.algorithm_b)},
          {"explanation", {{"background_size", cfg.explanation.background_size},
                           {"mode", mode_name(cfg.explanation.mode)},
                           {"n_samples", cfg.explanation.n_samples},
                           {"max_instances", cfg.explanation.max_instances}}},
          {"metrics", {{"classification", m.classification},
                       {"explanation", m.explanation},
                       {"robustness", m.robustness},
                       {"statistics", m.statistics},
                       {"sens_max_radius", m.sens_max_radius},
                       {"sens_max_probes", m.sens_max_probes},
                       {"morf_k", m.morf_k},
                       {"adversarial_random_dirs", m.adversarial_random_dirs},
                       {"adversarial_candidates", m.adversarial_candidates},
                       {"lipschitz_max_pairs", m.lipschitz_max_pairs},
                       {"bootstrap_resamples", m.bootstrap_resamples},
                       {"ci_level", m.ci_level},
                       {"compare", m.compare}}},
          {"store_full_parameters", cfg.store_full_parameters}};
}

store::StudyRecord build_record(const StudyConfig& cfg) {
  const std::size_t n_ds = cfg.datasets.size();
  SeedLog seeds;

  // Load everything first so input problems surface before any training.
  std::vector<data::Dataset> datasets;
  std::vector<std::optional<std::uint64_t>> synthetic_seeds(n_ds);
  std::vector<DatasetSeeds> ds_seeds(n_ds);
  for (std::size_t k = 0; k < n_ds; ++k) {
    const auto& src = cfg.datasets[k];
    try {
      if (src.synthetic) {
        synthetic_seeds[k] = seeds.take(cfg.master_seed, "synthetic", k);
        std::string name = src.name.empty() ? "synthetic-" + std::to_string(k) : src.name;
        data::Dataset generated = data::generate_synthetic(*src.synthetic, *synthetic_seeds[k], name);
        if (src.purdue_level)
          generated = data::Dataset(generated.name(), src.purdue_level, generated.descriptors(), generated.rows(),
                                    generated.labels(), generated.provenance());
        datasets.push_back(std::move(generated));
      } else {
        data::Dataset loaded = data::load_csv(src.manifest_path);
        if (!src.name.empty())
          loaded = data::Dataset(src.name, loaded.purdue_level(), loaded.descriptors(), loaded.rows(), loaded.labels(),
                                 loaded.provenance());
        datasets.push_back(std::move(loaded));
      }
    } catch (const Error& e) {
      throw Error(e.code(), "datasets[" + std::to_string(k) + "]: " + bare_message(e));
    }
    auto& s = ds_seeds[k];
    s.split = seeds.take(cfg.master_seed, "split", k);
    s.train = seeds.take(cfg.master_seed, "train", k);
    s.background = seeds.take(cfg.master_seed, "background", k);
    s.explain = seeds.take(cfg.master_seed, "explain", k);
    s.sens_max = seeds.take(cfg.master_seed, "sens_max", k);
    s.adversarial = seeds.take(cfg.master_seed, "adversarial", k);
    s.lipschitz = seeds.take(cfg.master_seed, "lipschitz", k);
  }
  {
    std::set<std::string> names;
    for (const auto& d : datasets)
      if (!names.insert(d.name()).second) invalid("duplicate dataset name '" + d.name() + "'");
  }

  // Dataset-level work; each slot is written by exactly one worker.
  std::vector<DatasetOutcome> outcomes(n_ds);
  std::vector<std::exception_ptr> errors(n_ds);
  std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n_ds);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < n_ds;) {
      try {
        outcomes[k] = run_dataset(cfg, datasets[k], ds_seeds[k], cfg.datasets[k], synthetic_seeds[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t k = 0; k < n_ds; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const Error& e) {
      throw Error(e.code(), "dataset '" + datasets[k].name() + "': " + bare_message(e));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kIo, "dataset '" + datasets[k].name() + "': " + e.what());
    }
  }

  json doc;
  doc["@context"] = {{"@vocab", "https://gridbench.invalid/vocab#"},
                     {"schema", "https://schema.org/"},
                     {"study_id", "@id"},
                     {"created_at", {{"@id", "schema:dateCreated"}, {"@type", "schema:DateTime"}}},
                     {"content_hash", "schema:sha256"}};
  doc["study_id"] = store::new_uuid();
  doc["created_at"] = store::utc_timestamp();
  doc["schema_version"] = store::kSchemaVersion;
  doc["config"] = to_json(cfg);

  json ds_list = json::array(), fits = json::array(), models = json::array(), explainers = json::array(),
       metric_list = json::array(), timings = json::array();
  std::vector<std::string> ds_names;
  for (const auto& o : outcomes) {
    ds_list.push_back(o.dataset);
    fits.push_back(o.fit);
    ds_names.push_back(o.dataset["name"].get<std::string>());
    for (const auto& a : o.algorithms) {
      models.push_back(a.model);
      explainers.push_back(a.explainer);
      metric_list.push_back(a.metrics);
      timings.push_back(a.timing);
    }
  }
  json order = json::array({cfg.preprocessing.use_onehot ? "onehot" : "ordinal"});
  if (cfg.preprocessing.use_minmax) order.push_back("minmax");
  if (cfg.preprocessing.use_pca) order.push_back("pca");
  doc["datasets"] = ds_list;
  doc["preprocessing"] = {{"config", doc["config"]["preprocessing"]}, {"order", order}, {"fits", fits}};
  doc["models"] = models;
  doc["explainers"] = explainers;
  doc["metrics"] = metric_list;

  stats::EffectBuckets buckets;
  doc["statistics"] = {{"algorithm_a", cfg.algorithm_a.name},
                       {"algorithm_b", cfg.algorithm_b.name},
                       {"alternative", "two-sided"},
                       {"ci_level", cfg.metrics.ci_level},
                       {"n_resamples", cfg.metrics.bootstrap_resamples},
                       {"effect_buckets", {{"small_upper", buckets.small_upper},
                                           {"medium_upper", buckets.medium_upper}}}};
  json comparison = json::array();
  if (cfg.metrics.statistics) {
    for (std::size_t j = 0; j < cfg.metrics.compare.size(); ++j) {
      const std::string& metric = cfg.metrics.compare[j];
      stats::PairedSamples samples{metric, {}, {}};
      for (const auto& o : outcomes) {
        samples.a.push_back(o.algorithms[0].values.at(metric));
        samples.b.push_back(o.algorithms[1].values.at(metric));
      }
      stats::CompareOptions opts{cfg.metrics.ci_level, cfg.metrics.bootstrap_resamples,
                                 seeds.take(cfg.master_seed, "bootstrap", j), buckets};
      comparison.push_back(comparison_json(stats::compare(samples, opts), ds_names, samples));
    }
  }
  doc["comparison"] = comparison;
  doc["seeds"] = {{"master_seed", cfg.master_seed},
                  {"derivation", "splitmix64(splitmix64(master_seed ^ fnv1a64(label)) ^ index)"},
                  {"derived", seeds.entries}};
  doc["environment"] = store::to_json(store::capture_environment());
  doc["timings"] = timings;
  doc["reproducibility_digest"] = "";
  doc["reproducibility_digest"] = store::reproducibility_digest(doc);
  return store::StudyRecord::from_document(std::move(doc));
}

RunResult run_study(const StudyConfig& cfg, const fs::path& store_root,
                    const std::optional<fs::path>& report_dir) {
  store::StudyRecord record = build_record(cfg);
  store::DocumentStore store(store_root);
  store.save(record);
  RunResult result{record, store_root / "records" / (record.study_id() + ".json"), {}};
  if (report_dir) result.report_files = write_reports(record.document(), *report_dir / record.study_id());
  return result;
}

report::EstimationPlotSpec plot_spec(const json& record, const std::string& metric) {
  for (const auto& c : record.at("comparison")) {
    if (c.at("metric").get<std::string>() != metric) continue;
    report::EstimationPlotSpec spec;
    spec.title = metric;
    spec.group_a_name = record.at("statistics").at("algorithm_a").get<std::string>();
    spec.group_b_name = record.at("statistics").at("algorithm_b").get<std::string>();
    spec.samples = {metric, c.at("a").get<std::vector<double>>(), c.at("b").get<std::vector<double>>()};
    auto& r = spec.comparison;
    r.metric = metric;
    r.point_estimate = c.at("point_estimate").get<double>();
    const json& ci = c.at("bootstrap_ci");
    r.bootstrap_ci = {ci.at("low").get<double>(),          ci.at("high").get<double>(),
                      ci.at("level").get<double>(),        ci.at("n_resamples").get<std::size_t>(),
                      ci.at("method").get<std::string>(), ci.at("seed").get<std::uint64_t>()};
    const json& w = c.at("wilcoxon");
    if (w.contains("incomputable"))
      r.wilcoxon_incomputable = w["incomputable"].get<std::string>();
    else
      r.wilcoxon = stats::WilcoxonResult{w.at("statistic").get<double>(), w.at("p_value").get<double>(),
                                         w.at("n_effective").get<std::size_t>(), w.at("exact").get<bool>()};
    const json& d = c.at("cohens_d");
    if (d.contains("incomputable")) {
      r.cohens_d_incomputable = d["incomputable"].get<std::string>();
    } else {
      r.cohens_d = d.at("value").get<double>();
      const auto& eb = record.at("statistics").at("effect_buckets");
      r.effect = stats::effect_label(*r.cohens_d, {eb.at("small_upper").get<double>(), eb.at("medium_upper").get<double>()});
    }
    std::size_t index = 0;
    const auto& names = record.at("config").at("metrics").at("compare");
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i].get<std::string>() == metric) index = i;
    spec.jitter_seed = derive_seed(record.at("seeds").at("master_seed").get<std::uint64_t>(), "report", index);
    return spec;
  }
  throw Error(ErrorCode::kNotFound, "no comparison for metric '" + metric + "'");
}

std::vector<fs::path> write_reports(const json& record, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  fs::path summary = out_dir / "summary.txt";
  write_file(summary, report::text_summary(record));
  written.push_back(summary);
  for (const auto& c : record.at("comparison")) {
    std::string metric = c.at("metric").get<std::string>();
    fs::path svg = out_dir / ("gardner_altman_" + metric + ".svg");
    write_file(svg, report::gardner_altman_svg(plot_spec(record, metric)));
    written.push_back(svg);
  }
  return written;
}

}  // namespace gridbench::study
