#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gridbench/canonical_json.hpp"
#include "gridbench/report.hpp"
#include "gridbench/stats.hpp"
#include "gridbench/store.hpp"
#include "gridbench/study.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gridbench;

namespace {

constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;

const char* const kDefaultStore = "gridbench-store";

int fail(int code, const std::string& message) {
  std::cerr << "gridbench: " << message << "\n";
  return code;
}

bool is_validation(ErrorCode code) {
  return code == ErrorCode::kInvalidConfig || code == ErrorCode::kSchemaViolation ||
         code == ErrorCode::kMissingFile || code == ErrorCode::kMalformedManifest;
}

void write_text(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << bytes;
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

double metric_value(const json& metrics_entry, const json& timings, const std::string& metric) {
  for (const char* section : {"classification", "explanation", "robustness"})
    if (metrics_entry.contains(section) && metrics_entry[section].contains(metric))
      return metrics_entry[section][metric].get<double>();
  for (const auto& t : timings)
    if (t["algorithm"] == metrics_entry["algorithm"] && t["dataset"] == metrics_entry["dataset"] && t.contains(metric))
      return t[metric].get<double>();
  throw Error(ErrorCode::kNotFound, "metric '" + metric + "' not recorded for " +
                                        metrics_entry["algorithm"].get<std::string>() + " on " +
                                        metrics_entry["dataset"].get<std::string>());
}

// Comparison entry for `metric`: the recorded one, or computed from the
// per-dataset values with a seed derived from the record's master seed.
json comparison_for(const json& record, const std::string& metric) {
  for (const auto& c : record["comparison"])
    if (c["metric"] == metric) return c;
  const json& st = record["statistics"];
  std::string a_name = st["algorithm_a"], b_name = st["algorithm_b"];
  stats::PairedSamples samples{metric, {}, {}};
  std::vector<std::string> datasets;
  for (const auto& d : record["datasets"]) {
    std::string ds = d["name"];
    datasets.push_back(ds);
    for (const auto& m : record["metrics"]) {
      if (m["dataset"] != ds) continue;
      if (m["algorithm"] == a_name) samples.a.push_back(metric_value(m, record["timings"], metric));
      if (m["algorithm"] == b_name) samples.b.push_back(metric_value(m, record["timings"], metric));
    }
  }
  stats::CompareOptions opts;
  opts.level = st["ci_level"].get<double>();
  opts.n_resamples = st["n_resamples"].get<std::size_t>();
  opts.seed = derive_seed(record["seeds"]["master_seed"].get<std::uint64_t>(), "compare/" + metric);
  opts.buckets = {st["effect_buckets"]["small_upper"].get<double>(), st["effect_buckets"]["medium_upper"].get<double>()};
  auto r = stats::compare(samples, opts);
  json w = r.wilcoxon ? json{{"statistic", r.wilcoxon->statistic},
                             {"p_value", r.wilcoxon->p_value},
                             {"n_effective", r.wilcoxon->n_effective},
                             {"exact", r.wilcoxon->exact}}
                      : json{{"incomputable", r.wilcoxon_incomputable}};
  json d = r.cohens_d ? json{{"value", *r.cohens_d}, {"label", stats::to_string(*r.effect)}}
                      : json{{"incomputable", r.cohens_d_incomputable}};
  return {{"metric", metric},
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

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridbench: reproducible benchmark harness for intrusion detection classifiers"};
  app.require_subcommand(1);
  std::string store_flag;
  app.add_option("--store", store_flag, "Store root (overrides GRIDBENCH_STORE)");

  std::string config_path, run_report_dir;
  auto* run = app.add_subcommand("run", "Run a study from a config file");
  run->add_option("config", config_path, "Study config (JSON)")->required();
  run->add_option("--report-dir", run_report_dir, "Write reports under <dir>/<study_id>");

  std::string study_id, metric, compare_out, compare_svg;
  auto* compare = app.add_subcommand("compare", "Compare the two algorithms of a study on one metric");
  compare->add_option("study_id", study_id)->required();
  compare->add_option("metric", metric)->required();
  compare->add_option("--out", compare_out, "Write the comparison as JSON");
  compare->add_option("--svg", compare_svg, "Write a Gardner-Altman plot");

  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Regenerate reports from a stored record");
  report_cmd->add_option("study_id", study_id)->required();
  report_cmd->add_option("--out", report_out, "Output directory")->required();

  auto* datasets = app.add_subcommand("datasets", "Dataset listings");
  datasets->require_subcommand(1);
  std::string list_store, list_out;
  auto* list = datasets->add_subcommand("list", "List datasets used by stored studies");
  list->add_option("store", list_store, "Store root");
  list->add_option("--out", list_out, "Write the listing as JSON");

  std::string record_path;
  auto* validate = app.add_subcommand("validate", "Validate a record file against the schema");
  validate->add_option("record", record_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidationError;
  }

  auto store_root = [&](const fs::path& fallback) {
    if (!store_flag.empty()) return fs::path(store_flag);
    return store::resolve_store_root(fallback);
  };

  try {
    if (*run) {
      study::StudyConfig cfg;
      try {
        cfg = study::load_config(config_path);
      } catch (const Error& e) {
        return fail(kValidationError, e.what());
      }
      fs::path root = store_root(cfg.store_root.value_or(kDefaultStore));
      std::optional<fs::path> reports = cfg.report_dir;
      if (!run_report_dir.empty()) reports = fs::path(run_report_dir);
      auto result = study::run_study(cfg, root, reports);
      std::cerr << "study " << result.record.study_id() << " saved to " << result.record_path.string() << "\n"
                << "reproducibility digest " << result.record.reproducibility_digest() << "\n";
      for (const auto& f : result.report_files) std::cerr << "wrote " << f.string() << "\n";
      return kOk;
    }

    if (*compare) {
      store::DocumentStore db(store_root(kDefaultStore));
      json record = db.load(study_id).document();
      json c = comparison_for(record, metric);
      if (!compare_out.empty()) write_text(compare_out, canonical_dump(c));
      if (!compare_svg.empty()) {
        json copy = record;
        bool present = false;
        for (const auto& e : copy["comparison"]) present = present || e["metric"] == metric;
        if (!present) {
          copy["comparison"].push_back(c);
          copy["config"]["metrics"]["compare"].push_back(metric);
        }
        write_text(compare_svg, report::gardner_altman_svg(study::plot_spec(copy, metric)));
      }
      json st = c["cohens_d"];
      std::cerr << metric << ": mean difference " << report::format_label(c["point_estimate"].get<double>());
      if (st.contains("value")) std::cerr << ", d = " << report::format_label(st["value"].get<double>());
      if (c["wilcoxon"].contains("p_value"))
        std::cerr << ", p = " << report::format_label(c["wilcoxon"]["p_value"].get<double>());
      std::cerr << "\n";
      return kOk;
    }

    if (*report_cmd) {
      store::DocumentStore db(store_root(kDefaultStore));
      auto files = study::write_reports(db.load(study_id).document(), report_out);
      for (const auto& f : files) std::cerr << "wrote " << f.string() << "\n";
      return kOk;
    }

    if (*list) {
      fs::path root = !list_store.empty() ? fs::path(list_store) : store_root(kDefaultStore);
      if (!fs::is_directory(root)) return fail(kValidationError, "store not found: " + root.string());
      store::DocumentStore db(root);
      json out = json::array();
      for (const auto& summary : db.query()) {
        json record = db.load(summary.study_id).document();
        for (const auto& d : record["datasets"]) {
          out.push_back({{"study_id", summary.study_id},
                         {"created_at", summary.created_at},
                         {"name", d["name"]},
                         {"source", d["source"]},
                         {"n_rows", d["n_rows"]},
                         {"content_hash", d["content_hash"]}});
          std::printf("%s  %-20s %-9s %6s rows  %s\n", summary.study_id.c_str(),
                      d["name"].get<std::string>().c_str(), d["source"].get<std::string>().c_str(),
                      std::to_string(d["n_rows"].get<std::size_t>()).c_str(),
                      d["content_hash"].get<std::string>().substr(0, 16).c_str());
        }
      }
      if (!list_out.empty()) write_text(list_out, canonical_dump(out));
      return kOk;
    }

    if (*validate) {
      std::ifstream f(record_path, std::ios::binary);
      if (!f) return fail(kRuntimeError, "cannot read " + record_path);
      std::stringstream buf;
      buf << f.rdbuf();
      json doc;
      try {
        doc = json::parse(buf.str());
      } catch (const json::parse_error& e) {
        return fail(kValidationError, record_path + " is not valid JSON: " + e.what());
      }
      auto violations = store::validate_record(doc);
      if (!violations.empty()) return fail(kValidationError, record_path + ": " + store::format_violations(violations));
      std::cerr << record_path << ": valid\n";
      return kOk;
    }
  } catch (const Error& e) {
    return fail(is_validation(e.code()) && *run ? kValidationError : kRuntimeError, e.what());
  } catch (const std::exception& e) {
    return fail(kRuntimeError, e.what());
  }
  return kOk;
}
