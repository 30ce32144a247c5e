#include "gridbench/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/utsname.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "gridbench/canonical_json.hpp"

#ifndef GRIDBENCH_VERSION
#define GRIDBENCH_VERSION "0.0.0"
#endif

namespace gridbench::store {

namespace detail {
extern const char* const kRecordSchemaText;
extern const char* const kConfigSchemaText;
}  // namespace detail

namespace {

namespace fs = std::filesystem;

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out.push_back(c);
  }
  return out;
}

std::string_view type_name(const json& v) {
  switch (v.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "boolean";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "integer";
    case json::value_t::number_float: return "number";
    case json::value_t::string: return "string";
    case json::value_t::array: return "array";
    case json::value_t::object: return "object";
    default: return "unknown";
  }
}

bool type_matches(const json& v, const std::string& type) {
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "null") return v.is_null();
  return false;
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& doc, const json& schema, const std::string& path,
             std::vector<Violation>& out) const {
    if (auto ref = schema.find("$ref"); ref != schema.end()) {
      check(doc, resolve(ref->get<std::string>()), path, out);
      return;
    }
    if (auto one_of = schema.find("oneOf"); one_of != schema.end()) {
      std::size_t matches = 0;
      std::vector<Violation> closest;
      bool have_closest = false;
      for (const auto& alternative : *one_of) {
        std::vector<Violation> local;
        check(doc, alternative, path, local);
        if (local.empty()) ++matches;
        else if (!have_closest || local.size() < closest.size()) {
          closest = std::move(local);
          have_closest = true;
        }
      }
      if (matches == 0) {
        out.insert(out.end(), closest.begin(), closest.end());
      } else if (matches > 1) {
        out.push_back({path, "matches " + std::to_string(matches) + " alternatives of oneOf"});
      }
    }
    if (auto type = schema.find("type"); type != schema.end()) {
      bool ok = false;
      std::string expected;
      if (type->is_array()) {
        for (const auto& t : *type) {
          ok = ok || type_matches(doc, t.get<std::string>());
          expected += (expected.empty() ? "" : "|") + t.get<std::string>();
        }
      } else {
        expected = type->get<std::string>();
        ok = type_matches(doc, expected);
      }
      if (!ok) {
        out.push_back({path, "expected " + expected + ", found " + std::string(type_name(doc))});
        return;
      }
    }
    if (auto values = schema.find("enum"); values != schema.end()) {
      if (std::find(values->begin(), values->end(), doc) == values->end())
        out.push_back({path, "value " + doc.dump() + " not in enum " + values->dump()});
    }
    if (auto minimum = schema.find("minimum"); minimum != schema.end() && doc.is_number()) {
      if (doc.get<double>() < minimum->get<double>())
        out.push_back({path, "value below minimum " + minimum->dump()});
    }
    if (doc.is_object()) check_object(doc, schema, path, out);
    if (doc.is_array()) {
      if (auto min_items = schema.find("minItems"); min_items != schema.end() &&
                                                    doc.size() < min_items->get<std::size_t>())
        out.push_back({path, "fewer than " + min_items->dump() + " items"});
      if (auto items = schema.find("items"); items != schema.end())
        for (std::size_t i = 0; i < doc.size(); ++i)
          check(doc[i], *items, path + "/" + std::to_string(i), out);
    }
  }

 private:
  void check_object(const json& doc, const json& schema, const std::string& path,
                    std::vector<Violation>& out) const {
    if (auto required = schema.find("required"); required != schema.end())
      for (const auto& key : *required)
        if (!doc.contains(key.get<std::string>()))
          out.push_back({path + "/" + escape_pointer(key.get<std::string>()), "required property missing"});
    const json* properties = nullptr;
    if (auto p = schema.find("properties"); p != schema.end()) properties = &*p;
    auto additional = schema.find("additionalProperties");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      std::string child = path + "/" + escape_pointer(it.key());
      if (properties && properties->contains(it.key())) {
        check(it.value(), (*properties)[it.key()], child, out);
      } else if (additional != schema.end()) {
        if (additional->is_boolean()) {
          if (!additional->get<bool>()) out.push_back({child, "unknown property"});
        } else {
          check(it.value(), *additional, child, out);
        }
      }
    }
  }

  const json& resolve(const std::string& ref) const {
    for (std::string_view prefix : {"#/definitions/", "#/$defs/"}) {
      if (ref.rfind(prefix, 0) == 0) {
        std::string section(prefix.substr(2, prefix.size() - 3));
        std::string name = ref.substr(prefix.size());
        if (root_.contains(section) && root_[section].contains(name)) return root_[section][name];
      }
    }
    throw Error(ErrorCode::kSchemaViolation, "unresolvable $ref '" + ref + "'");
  }

  const json& root_;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::optional<std::string> proc_cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0 || line.rfind("Model", 0) == 0) {
      auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string value = line.substr(colon + 1);
      value.erase(0, value.find_first_not_of(" \t"));
      if (!value.empty()) return value;
    }
  }
  return std::nullopt;
}

class LockFile {
 public:
  explicit LockFile(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw Error(ErrorCode::kIo, "cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error(ErrorCode::kIo, "cannot lock " + path.string());
    }
  }
  ~LockFile() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  int fd_ = -1;
};

json summary_json(const RecordSummary& s) {
  return json{{"study_id", s.study_id},
              {"created_at", s.created_at},
              {"datasets", s.datasets},
              {"model_kinds", s.model_kinds},
              {"reproducibility_digest", s.reproducibility_digest}};
}

void sort_summaries(std::vector<RecordSummary>& entries) {
  std::sort(entries.begin(), entries.end(), [](const RecordSummary& a, const RecordSummary& b) {
    return std::tie(a.created_at, a.study_id) < std::tie(b.created_at, b.study_id);
  });
}

bool matches(const RecordSummary& s, const QueryFilter& f) {
  auto contains = [](const std::vector<std::string>& v, const std::string& x) {
    return std::find(v.begin(), v.end(), x) != v.end();
  };
  if (f.dataset_name && !contains(s.datasets, *f.dataset_name)) return false;
  if (f.model_kind && !contains(s.model_kinds, *f.model_kind)) return false;
  if (f.created_from && s.created_at < *f.created_from) return false;
  if (f.created_to && s.created_at > *f.created_to) return false;
  return true;
}

}  // namespace

std::vector<Violation> validate(const json& document, const json& schema) {
  std::vector<Violation> out;
  Validator(schema).check(document, schema, "", out);
  return out;
}

const json& record_schema() {
  static const json schema = json::parse(detail::kRecordSchemaText);
  return schema;
}

const json& config_schema() {
  static const json schema = json::parse(detail::kConfigSchemaText);
  return schema;
}

std::vector<Violation> validate_record(const json& document) { return validate(document, record_schema()); }

std::string format_violations(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += (v.path.empty() ? "/" : v.path) + ": " + v.message;
  }
  return out;
}

std::string_view artifact_version() { return GRIDBENCH_VERSION; }

EnvironmentProbe system_probe() {
  EnvironmentProbe probe;
  probe.cpu_model = proc_cpu_model;
  probe.logical_cores = []() -> std::optional<std::uint64_t> {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) return std::nullopt;
    return n;
  };
  probe.ram_bytes = []() -> std::optional<std::uint64_t> {
    long pages = ::sysconf(_SC_PHYS_PAGES);
    long page_size = ::sysconf(_SC_PAGE_SIZE);
    if (pages <= 0 || page_size <= 0) return std::nullopt;
    return static_cast<std::uint64_t>(pages) * static_cast<std::uint64_t>(page_size);
  };
  probe.os = []() -> std::optional<std::string> {
    struct utsname info {};
    if (::uname(&info) != 0) return std::nullopt;
    return std::string(info.sysname) + " " + info.release + " " + info.machine;
  };
  return probe;
}

EnvironmentInfo capture_environment(const EnvironmentProbe& probe) {
  EnvironmentInfo env;
  auto attempt = [&env](const auto& fn, const char* what) -> decltype(fn()) {
    try {
      if (fn) {
        auto value = fn();
        if (value) return value;
      }
    } catch (const std::exception& e) {
      env.warnings.push_back(std::string(what) + ": " + e.what());
      return std::nullopt;
    }
    env.warnings.push_back(std::string(what) + " unavailable");
    return std::nullopt;
  };
  env.cpu_model = attempt(probe.cpu_model, "cpu_model").value_or("unknown");
  env.logical_cores = attempt(probe.logical_cores, "logical_cores").value_or(0);
  env.ram_bytes = attempt(probe.ram_bytes, "ram_bytes").value_or(0);
  env.os = attempt(probe.os, "os").value_or("unknown");
  env.artifact_version = std::string(artifact_version());
  return env;
}

json to_json(const EnvironmentInfo& env) {
  json j{{"cpu_model", env.cpu_model},
         {"logical_cores", env.logical_cores},
         {"ram_bytes", env.ram_bytes},
         {"os", env.os},
         {"artifact_version", env.artifact_version}};
  if (!env.warnings.empty()) j["warnings"] = env.warnings;
  return j;
}

StudyRecord StudyRecord::from_document(json document) {
  auto violations = validate_record(document);
  if (!violations.empty()) throw Error(ErrorCode::kSchemaViolation, format_violations(violations));
  return StudyRecord(std::move(document));
}

std::string StudyRecord::canonical() const { return canonical_dump(doc_); }

bool is_timing_metric(std::string_view metric) {
  return metric == "train_time" || metric == "predict_time" || metric == "explain_time";
}

std::string reproducibility_digest(const json& record) {
  json copy = record;
  for (const char* key : {"study_id", "created_at", "environment", "timings", "reproducibility_digest"})
    copy.erase(key);
  if (copy.contains("comparison")) {
    json kept = json::array();
    for (const auto& entry : copy["comparison"])
      if (!is_timing_metric(entry.value("metric", ""))) kept.push_back(entry);
    copy["comparison"] = kept;
  }
  return sha256_hex(canonical_dump(copy));
}

std::string new_uuid() {
  std::random_device device;
  std::mt19937_64 engine((static_cast<std::uint64_t>(device()) << 32) ^ device() ^
                         static_cast<std::uint64_t>(
                             std::chrono::high_resolution_clock::now().time_since_epoch().count()));
  std::uint64_t hi = engine(), lo = engine();
  hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;  // version 4
  lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;  // RFC 4122 variant
  char buf[37];
  std::snprintf(buf, sizeof(buf), "%08llx-%04llx-%04llx-%04llx-%012llx",
                static_cast<unsigned long long>(hi >> 32),
                static_cast<unsigned long long>((hi >> 16) & 0xFFFF),
                static_cast<unsigned long long>(hi & 0xFFFF),
                static_cast<unsigned long long>(lo >> 48),
                static_cast<unsigned long long>(lo & 0xFFFFFFFFFFFFULL));
  return buf;
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  ::gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RecordSummary summarize(const json& record) {
  RecordSummary s;
  s.study_id = record.value("study_id", "");
  s.created_at = record.value("created_at", "");
  s.reproducibility_digest = record.value("reproducibility_digest", "");
  std::set<std::string> kinds;
  if (record.contains("datasets"))
    for (const auto& d : record["datasets"]) s.datasets.push_back(d.value("name", ""));
  if (record.contains("models")) {
    for (const auto& m : record["models"]) {
      kinds.insert(m.value("kind", ""));
      if (m.contains("first_level"))
        for (const auto& f : m["first_level"]) kinds.insert(f.value("kind", ""));
      if (m.contains("second_level")) kinds.insert(m["second_level"].value("kind", ""));
    }
  }
  s.model_kinds.assign(kinds.begin(), kinds.end());
  return s;
}

fs::path resolve_store_root(const fs::path& fallback) {
  if (const char* env = std::getenv("GRIDBENCH_STORE"); env && *env) return env;
  return fallback;
}

DocumentStore::DocumentStore(fs::path root) : root_(std::move(root)) {}

fs::path DocumentStore::record_path(const std::string& study_id) const {
  if (study_id.empty() || study_id.find_first_of("/\\") != std::string::npos || study_id[0] == '.')
    throw Error(ErrorCode::kNotFound, "invalid study id '" + study_id + "'");
  return root_ / "records" / (study_id + ".json");
}

void DocumentStore::atomic_write(const fs::path& target, const std::string& bytes) {
  static std::atomic<unsigned> counter{0};
  fs::path temp = target;
  temp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + temp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "short write to " + temp.string());
  }
  if (before_rename) before_rename(temp);
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp);
    throw Error(ErrorCode::kIo, "rename to " + target.string() + " failed: " + ec.message());
  }
}

std::string DocumentStore::save(const StudyRecord& record) {
  fs::create_directories(root_ / "records");
  fs::create_directories(root_ / "schema");
  LockFile lock(root_ / ".lock");

  fs::path schema_file = root_ / "schema" / (std::string(kSchemaVersion) + ".json");
  if (!fs::exists(schema_file)) atomic_write(schema_file, canonical_dump(record_schema()));

  const std::string id = record.study_id();
  fs::path target = record_path(id);
  if (fs::exists(target)) throw Error(ErrorCode::kIo, "record " + id + " already exists");
  atomic_write(target, record.canonical());

  std::vector<RecordSummary> entries;
  try {
    entries = read_index();
  } catch (const Error&) {
    entries = scan_records();
  }
  entries.erase(std::remove_if(entries.begin(), entries.end(),
                               [&](const RecordSummary& s) { return s.study_id == id; }),
                entries.end());
  entries.push_back(summarize(record.document()));
  write_index(entries);
  return id;
}

std::string DocumentStore::load_bytes(const std::string& study_id) const {
  fs::path path = record_path(study_id);
  if (!fs::exists(path)) throw Error(ErrorCode::kNotFound, "study " + study_id);
  return read_text(path);
}

StudyRecord DocumentStore::load(const std::string& study_id) const {
  json doc;
  try {
    doc = json::parse(load_bytes(study_id));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, "study " + study_id + " is not valid JSON: " + e.what());
  }
  return StudyRecord::from_document(std::move(doc));
}

std::vector<RecordSummary> DocumentStore::read_index() const {
  fs::path path = root_ / "index.json";
  if (!fs::exists(path)) {
    if (fs::exists(root_ / "records") && !fs::is_empty(root_ / "records"))
      throw Error(ErrorCode::kCorruptIndex, "index.json missing");
    return {};
  }
  try {
    json index = json::parse(read_text(path));
    std::vector<RecordSummary> entries;
    for (const auto& e : index.at("records")) {
      RecordSummary s;
      s.study_id = e.at("study_id").get<std::string>();
      s.created_at = e.at("created_at").get<std::string>();
      s.datasets = e.at("datasets").get<std::vector<std::string>>();
      s.model_kinds = e.at("model_kinds").get<std::vector<std::string>>();
      s.reproducibility_digest = e.at("reproducibility_digest").get<std::string>();
      entries.push_back(std::move(s));
    }
    return entries;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptIndex, e.what());
  }
}

std::vector<RecordSummary> DocumentStore::scan_records() const {
  std::vector<RecordSummary> entries;
  fs::path dir = root_ / "records";
  if (!fs::exists(dir)) return entries;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    try {
      entries.push_back(summarize(json::parse(read_text(entry.path()))));
    } catch (const json::exception&) {
      // Only complete documents are ever renamed into place; anything else is
      // foreign and ignored.
    }
  }
  sort_summaries(entries);
  return entries;
}

void DocumentStore::write_index(const std::vector<RecordSummary>& entries) {
  std::vector<RecordSummary> sorted = entries;
  sort_summaries(sorted);
  json index{{"schema_version", kSchemaVersion}, {"records", json::array()}};
  for (const auto& s : sorted) index["records"].push_back(summary_json(s));
  atomic_write(root_ / "index.json", canonical_dump(index));
}

void DocumentStore::rebuild_index() {
  fs::create_directories(root_);
  LockFile lock(root_ / ".lock");
  write_index(scan_records());
}

std::vector<RecordSummary> DocumentStore::query(const QueryFilter& filter) const {
  std::vector<RecordSummary> entries;
  try {
    entries = read_index();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kCorruptIndex) throw;
    entries = scan_records();
  }
  std::vector<RecordSummary> out;
  for (auto& s : entries)
    if (matches(s, filter)) out.push_back(std::move(s));
  sort_summaries(out);
  return out;
}

}  // namespace gridbench::store
