#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridbench/common.hpp"
#include "json.hpp"

namespace gridbench::store {

using nlohmann::json;

inline constexpr std::string_view kSchemaVersion = "1.0";

// ---- schema validation ----

struct Violation {
  std::string path;  // JSON pointer
  std::string message;
};

// Validates against the supported subset: type, enum, required, properties,
// additionalProperties (false or a schema), items, minItems, minimum, oneOf
// and local $ref into "#/definitions/".
std::vector<Violation> validate(const json& document, const json& schema);

const json& record_schema();
const json& config_schema();
std::vector<Violation> validate_record(const json& document);

std::string format_violations(const std::vector<Violation>& violations);

// ---- environment ----

struct EnvironmentInfo {
  std::string cpu_model;
  std::uint64_t logical_cores = 0;
  std::uint64_t ram_bytes = 0;
  std::string os;
  std::string artifact_version;
  std::vector<std::string> warnings;
};

// Introspection hooks; an empty optional means the value is unavailable.
struct EnvironmentProbe {
  std::function<std::optional<std::string>()> cpu_model;
  std::function<std::optional<std::uint64_t>()> logical_cores;
  std::function<std::optional<std::uint64_t>()> ram_bytes;
  std::function<std::optional<std::string>()> os;
};

EnvironmentProbe system_probe();

// Never fails: unavailable values become "unknown" (or 0) plus a warning.
EnvironmentInfo capture_environment(const EnvironmentProbe& probe = system_probe());
json to_json(const EnvironmentInfo& env);

std::string_view artifact_version();

// ---- records ----

// A schema-valid study document. Records are immutable once built.
class StudyRecord {
 public:
  // Throws SchemaViolation naming the first offending path.
  static StudyRecord from_document(json document);

  const json& document() const noexcept { return doc_; }
  std::string study_id() const { return doc_.at("study_id").get<std::string>(); }
  std::string reproducibility_digest() const {
    return doc_.at("reproducibility_digest").get<std::string>();
  }
  std::string canonical() const;

 private:
  explicit StudyRecord(json document) : doc_(std::move(document)) {}
  json doc_;
};

// SHA-256 over the canonical record with run-specific fields removed
// (identity, timestamps, environment, timings and timing comparisons).
std::string reproducibility_digest(const json& record);

bool is_timing_metric(std::string_view metric);

std::string new_uuid();
std::string utc_timestamp();

struct QueryFilter {
  std::optional<std::string> dataset_name;
  std::optional<std::string> model_kind;
  // Inclusive bounds on created_at, compared as ISO-8601 text.
  std::optional<std::string> created_from;
  std::optional<std::string> created_to;
};

struct RecordSummary {
  std::string study_id;
  std::string created_at;
  std::vector<std::string> datasets;
  std::vector<std::string> model_kinds;
  std::string reproducibility_digest;
};

// <root>/records/<study_id>.json, <root>/index.json, <root>/schema/<version>.json.
// One writer at a time (advisory lock on <root>/.lock); readers never lock.
class DocumentStore {
 public:
  explicit DocumentStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  std::string save(const StudyRecord& record);
  StudyRecord load(const std::string& study_id) const;
  std::string load_bytes(const std::string& study_id) const;
  std::vector<RecordSummary> query(const QueryFilter& filter = {}) const;

  // Throws CorruptIndex when index.json is unreadable.
  std::vector<RecordSummary> read_index() const;
  void rebuild_index();

  // Test hook run after the temporary file is written and before the rename.
  std::function<void(const std::filesystem::path&)> before_rename;

 private:
  std::filesystem::path record_path(const std::string& study_id) const;
  std::vector<RecordSummary> scan_records() const;
  void write_index(const std::vector<RecordSummary>& entries);
  void atomic_write(const std::filesystem::path& target, const std::string& bytes);

  std::filesystem::path root_;
};

RecordSummary summarize(const json& record);

// Resolves the store root: GRIDBENCH_STORE wins over the fallback.
std::filesystem::path resolve_store_root(const std::filesystem::path& fallback);

}  // namespace gridbench::store
