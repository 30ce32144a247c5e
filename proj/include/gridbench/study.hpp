#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridbench/data.hpp"
#include "gridbench/explain.hpp"
#include "gridbench/model.hpp"
#include "gridbench/preprocess.hpp"
#include "gridbench/report.hpp"
#include "gridbench/store.hpp"
#include "json.hpp"

namespace gridbench::study {

enum class ExplainerChoice { kBlackbox, kBasicJoin };

std::string_view to_string(ExplainerChoice choice);

struct AlgorithmSpec {
  std::string name;
  model::ModelKind kind = model::ModelKind::kStack;
  // Resolved hyperparameters of the top-level model.
  model::Hyperparameters hyper;
  // Stack composition; empty for a single model.
  std::vector<model::ModelSpec> first_level;
  model::ModelSpec second_level;
  std::size_t folds = 5;
  ExplainerChoice explainer = ExplainerChoice::kBlackbox;
};

struct DatasetSource {
  std::string name;  // empty: taken from the manifest
  std::string manifest;  // as written in the config
  std::filesystem::path manifest_path;  // resolved
  std::optional<data::SyntheticSpec> synthetic;
  std::optional<int> purdue_level;
};

struct ExplanationSettings {
  std::size_t background_size = 100;
  explain::ShapleyMode mode = explain::ShapleyMode::kAuto;
  std::size_t n_samples = 200;
  std::size_t max_instances = 20;
};

struct MetricSettings {
  bool classification = true;
  bool explanation = true;
  bool robustness = true;
  bool statistics = true;
  double sens_max_radius = 0.01;
  std::size_t sens_max_probes = 20;
  std::size_t morf_k = 5;
  std::size_t adversarial_random_dirs = 8;
  std::size_t adversarial_candidates = 50;
  std::size_t lipschitz_max_pairs = 2000;
  std::size_t bootstrap_resamples = 5000;
  double ci_level = 0.95;
  // Metrics compared across datasets; defaults to every enabled metric.
  std::vector<std::string> compare;
};

struct StudyConfig {
  std::uint64_t master_seed = 0;
  std::vector<DatasetSource> datasets;
  double train_fraction = 0.7;
  preprocess::PipelineConfig preprocessing;
  AlgorithmSpec algorithm_a;
  AlgorithmSpec algorithm_b;
  ExplanationSettings explanation;
  MetricSettings metrics;
  std::optional<std::filesystem::path> store_root;
  std::optional<std::filesystem::path> report_dir;
  std::size_t workers = 0;  // 0: one per logical core
  bool store_full_parameters = false;
};

// Schema and semantic validation, including that every manifest exists.
// Relative paths resolve against base_dir. Throws InvalidConfig,
// SchemaViolation or MissingFile; nothing is trained or loaded.
StudyConfig parse_config(const nlohmann::json& document, const std::filesystem::path& base_dir = ".");
StudyConfig load_config(const std::filesystem::path& path);

// Effective configuration with defaults filled in, minus output and worker
// settings. This is what a record stores.
nlohmann::json to_json(const StudyConfig& config);

// Every metric a record can carry, in reporting order.
const std::vector<std::string>& metric_names();

// Runs the whole study in memory and returns the validated record. Any
// failure throws; nothing is written.
store::StudyRecord build_record(const StudyConfig& config);

struct RunResult {
  store::StudyRecord record;
  std::filesystem::path record_path;
  std::vector<std::filesystem::path> report_files;
};

// build_record, then save to the store and write reports when report_dir is
// set (into <report_dir>/<study_id>/).
RunResult run_study(const StudyConfig& config, const std::filesystem::path& store_root,
                    const std::optional<std::filesystem::path>& report_dir);

// Plot input for one comparison entry, taken from the record alone.
report::EstimationPlotSpec plot_spec(const nlohmann::json& record, const std::string& metric);

// summary.txt plus one gardner_altman_<metric>.svg per comparison entry.
std::vector<std::filesystem::path> write_reports(const nlohmann::json& record,
                                                 const std::filesystem::path& out_dir);

}  // namespace gridbench::study
