#include "gridbench/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace gridbench::data {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view raw) {
  std::string_view v = trim(raw);
  return v.empty() || v == "?" || v == "NA" || v == "N/A" || v == "NaN" ||
         v == "nan" || v == "null";
}

std::optional<double> parse_double(std::string_view raw) {
  std::string_view v = trim(raw);
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

void csv_quote(std::string& out, std::string_view field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

void validate_descriptors(const std::vector<FeatureDescriptor>& descriptors) {
  std::unordered_set<std::string> names;
  for (const auto& d : descriptors) {
    if (!names.insert(d.name).second)
      throw Error(ErrorCode::kInvalidSpec, "duplicate feature name '" + d.name + "'");
    if (d.kind == FeatureKind::kCategorical && d.categories.empty())
      throw Error(ErrorCode::kInvalidSpec,
                  "categorical feature '" + d.name + "' has no categories");
  }
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kNumeric ? "numeric" : "categorical";
}

FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "numeric") return FeatureKind::kNumeric;
  if (text == "categorical") return FeatureKind::kCategorical;
  throw Error(ErrorCode::kMalformedManifest,
              "unknown feature kind '" + std::string(text) + "'");
}

std::string format_number(double value) {
  if (value == 0.0) value = 0.0;  // folds -0 into 0
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Dataset::Dataset(std::string name, std::optional<int> purdue_level,
                 std::vector<FeatureDescriptor> descriptors, std::vector<Row> rows,
                 std::vector<int> labels, Provenance provenance,
                 std::vector<std::size_t> row_ids)
    : name_(std::move(name)),
      purdue_level_(purdue_level),
      descriptors_(std::move(descriptors)),
      rows_(std::move(rows)),
      labels_(std::move(labels)),
      provenance_(std::move(provenance)),
      row_ids_(std::move(row_ids)) {
  if (rows_.empty()) throw Error(ErrorCode::kInvalidSpec, "dataset has no rows");
  if (labels_.size() != rows_.size())
    throw Error(ErrorCode::kInvalidSpec, "label count differs from row count");
  if (purdue_level_ && (*purdue_level_ < 0 || *purdue_level_ > 5))
    throw Error(ErrorCode::kInvalidSpec, "purdue_level must be within 0..5");
  validate_descriptors(descriptors_);
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const Row& row = rows_[r];
    if (row.size() != descriptors_.size())
      throw Error(ErrorCode::kInvalidSpec, "row " + std::to_string(r) + " has " +
                                               std::to_string(row.size()) + " cells");
    for (std::size_t c = 0; c < row.size(); ++c) {
      bool numeric = std::holds_alternative<double>(row[c]);
      if (numeric != (descriptors_[c].kind == FeatureKind::kNumeric))
        throw Error(ErrorCode::kInvalidSpec,
                    "cell kind mismatch in column '" + descriptors_[c].name + "'");
    }
    if (labels_[r] != 0 && labels_[r] != 1)
      throw Error(ErrorCode::kNonBinaryLabel, "label must be 0 or 1");
  }
  if (row_ids_.empty()) {
    row_ids_.resize(rows_.size());
    for (std::size_t i = 0; i < row_ids_.size(); ++i) row_ids_[i] = i;
  } else if (row_ids_.size() != rows_.size()) {
    throw Error(ErrorCode::kInvalidSpec, "row id count differs from row count");
  }
  content_hash_ = sha256_hex(canonical_serialization());
}

std::size_t Dataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Row> rows;
  std::vector<int> labels;
  std::vector<std::size_t> ids;
  rows.reserve(indices.size());
  for (std::size_t i : indices) {
    rows.push_back(rows_.at(i));
    labels.push_back(labels_[i]);
    ids.push_back(row_ids_[i]);
  }
  return Dataset(name_, purdue_level_, descriptors_, std::move(rows),
                 std::move(labels), provenance_, std::move(ids));
}

std::string Dataset::canonical_serialization() const {
  std::string out;
  for (std::size_t c = 0; c < descriptors_.size(); ++c) {
    const auto& d = descriptors_[c];
    std::string field = d.name + ":" + std::string(to_string(d.kind));
    for (std::size_t k = 0; k < d.categories.size(); ++k)
      field += (k == 0 ? ":" : "|") + d.categories[k];
    csv_quote(out, field);
    out.push_back(',');
  }
  out += "label\n";
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    for (const Cell& cell : rows_[r]) {
      if (const double* v = std::get_if<double>(&cell))
        out += format_number(*v);
      else
        csv_quote(out, std::get<std::string>(cell));
      out.push_back(',');
    }
    out += labels_[r] ? "1\n" : "0\n";
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A blank line yields a single empty field; skip it.
    if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::kMalformedCsv, "unterminated quoted field");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

Dataset load_csv(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path))
    throw Error(ErrorCode::kMissingFile, manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedManifest, manifest_path.string() + ": " + e.what());
  }

  std::string csv_name;
  std::string label_column;
  std::set<std::string> positive;
  std::optional<std::set<std::string>> negative;
  std::vector<std::pair<std::string, FeatureKind>> columns;
  std::optional<int> purdue;
  std::string name;
  try {
    if (!manifest.is_object()) throw Error(ErrorCode::kMalformedManifest, "not an object");
    csv_name = manifest.at("csv_path").get<std::string>();
    label_column = manifest.at("label_column").get<std::string>();
    for (const auto& v : manifest.at("positive_label_values")) positive.insert(v.get<std::string>());
    if (manifest.contains("negative_label_values")) {
      negative.emplace();
      for (const auto& v : manifest["negative_label_values"]) negative->insert(v.get<std::string>());
    }
    for (const auto& col : manifest.at("columns")) {
      columns.emplace_back(col.at("name").get<std::string>(),
                           parse_feature_kind(col.at("kind").get<std::string>()));
    }
    if (manifest.contains("purdue_level") && !manifest["purdue_level"].is_null())
      purdue = manifest["purdue_level"].get<int>();
    name = manifest.value("name", manifest_path.stem().string());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedManifest, manifest_path.string() + ": " + e.what());
  }
  if (positive.empty())
    throw Error(ErrorCode::kMalformedManifest, "positive_label_values is empty");

  std::filesystem::path csv_path = csv_name;
  if (csv_path.is_relative()) csv_path = manifest_path.parent_path() / csv_path;
  if (!std::filesystem::exists(csv_path)) throw Error(ErrorCode::kMissingFile, csv_path.string());

  auto records = parse_csv(read_file(csv_path));
  if (records.empty()) throw Error(ErrorCode::kMalformedCsv, csv_path.string() + ": no header row");
  const auto& header = records.front();
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(std::string(trim(header[i])), i);

  auto label_it = position.find(label_column);
  if (label_it == position.end())
    throw Error(ErrorCode::kUnknownLabelColumn, "'" + label_column + "' not in " + csv_path.string());
  const std::size_t label_pos = label_it->second;

  std::vector<FeatureDescriptor> descriptors;
  std::vector<std::size_t> source;
  for (const auto& [col_name, kind] : columns) {
    if (col_name == label_column) continue;
    auto it = position.find(col_name);
    if (it == position.end())
      throw Error(ErrorCode::kMalformedManifest, "column '" + col_name + "' not in CSV header");
    descriptors.push_back({col_name, kind, {}});
    source.push_back(it->second);
  }

  std::vector<Row> rows;
  std::vector<int> labels;
  std::size_t dropped = 0;
  std::optional<std::string> seen_negative;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() > header.size())
      throw Error(ErrorCode::kMalformedCsv, "line " + std::to_string(r + 1) + " has extra fields");
    if (rec.size() < header.size() || is_missing(rec[label_pos])) {
      ++dropped;
      continue;
    }
    std::string label_value(trim(rec[label_pos]));
    int label;
    if (positive.count(label_value)) {
      label = 1;
    } else if (negative) {
      if (!negative->count(label_value))
        throw Error(ErrorCode::kNonBinaryLabel, "label value '" + label_value + "'");
      label = 0;
    } else {
      if (seen_negative && *seen_negative != label_value)
        throw Error(ErrorCode::kNonBinaryLabel, "label values '" + *seen_negative + "' and '" +
                                                    label_value + "' both outside the positive set");
      seen_negative = label_value;
      label = 0;
    }

    Row row;
    bool missing = false;
    for (std::size_t c = 0; c < descriptors.size() && !missing; ++c) {
      std::string_view raw = rec[source[c]];
      if (is_missing(raw)) {
        missing = true;
        break;
      }
      if (descriptors[c].kind == FeatureKind::kNumeric) {
        auto value = parse_double(raw);
        if (!value)
          throw Error(ErrorCode::kMalformedCsv, "line " + std::to_string(r + 1) + ", column '" +
                                                    descriptors[c].name + "': not a number");
        row.emplace_back(*value);
      } else {
        row.emplace_back(std::string(trim(raw)));
      }
    }
    if (missing) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(row));
    labels.push_back(label);
  }

  for (std::size_t c = 0; c < descriptors.size(); ++c) {
    if (descriptors[c].kind != FeatureKind::kCategorical) continue;
    auto& cats = descriptors[c].categories;
    for (const auto& row : rows) {
      const auto& v = std::get<std::string>(row[c]);
      if (std::find(cats.begin(), cats.end(), v) == cats.end()) cats.push_back(v);
    }
  }
  if (rows.empty()) throw Error(ErrorCode::kMalformedCsv, csv_path.string() + ": no complete rows");

  Provenance prov;
  prov.source = "csv";
  prov.manifest_path = manifest_path.string();
  prov.dropped_rows = dropped;
  return Dataset(name, purdue, std::move(descriptors), std::move(rows), std::move(labels),
                 std::move(prov));
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, std::string name) {
  if (spec.n < 10) throw Error(ErrorCode::kInvalidSpec, "n must be at least 10");
  if (!(spec.anomaly_fraction > 0.0 && spec.anomaly_fraction < 1.0))
    throw Error(ErrorCode::kInvalidSpec, "anomaly_fraction must lie in (0, 1)");
  if (!(spec.class_separation >= 0.0) || !std::isfinite(spec.class_separation))
    throw Error(ErrorCode::kInvalidSpec, "class_separation must be finite and >= 0");
  if (spec.d_numeric + spec.d_categorical == 0)
    throw Error(ErrorCode::kInvalidSpec, "at least one feature is required");
  if (spec.d_categorical > 0 && spec.categories_per_feature < 2)
    throw Error(ErrorCode::kInvalidSpec, "categories_per_feature must be at least 2");

  Rng rng(seed);
  auto anomalies = static_cast<std::size_t>(
      std::llround(spec.anomaly_fraction * static_cast<double>(spec.n)));
  anomalies = std::clamp<std::size_t>(anomalies, 1, spec.n - 1);
  std::vector<int> labels(spec.n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(anomalies), 1);
  rng.shuffle(labels);

  // Class-conditional category probabilities: both classes start uniform and
  // drift toward opposite linear ramps as separation grows.
  const std::size_t k = spec.categories_per_feature;
  const double mix = 1.0 - std::exp(-spec.class_separation);
  std::vector<double> cumulative[2];
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<double> p(k);
    double ramp_total = static_cast<double>(k * (k + 1)) / 2.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double ramp = static_cast<double>(cls == 1 ? j + 1 : k - j) / ramp_total;
      acc += (1.0 - mix) / static_cast<double>(k) + mix * ramp;
      p[j] = acc;
    }
    p.back() = 1.0;
    cumulative[cls] = std::move(p);
  }

  std::vector<FeatureDescriptor> descriptors;
  for (std::size_t j = 0; j < spec.d_numeric; ++j)
    descriptors.push_back({"num" + std::to_string(j), FeatureKind::kNumeric, {}});
  for (std::size_t j = 0; j < spec.d_categorical; ++j)
    descriptors.push_back({"cat" + std::to_string(j), FeatureKind::kCategorical, {}});

  std::vector<Row> rows;
  rows.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Row row;
    const double mean = labels[i] ? spec.class_separation : 0.0;
    for (std::size_t j = 0; j < spec.d_numeric; ++j) row.emplace_back(mean + rng.normal());
    for (std::size_t j = 0; j < spec.d_categorical; ++j) {
      double u = rng.uniform();
      const auto& cum = cumulative[labels[i]];
      std::size_t cat = static_cast<std::size_t>(
          std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
      cat = std::min(cat, k - 1);
      std::string value = "c" + std::to_string(cat);
      auto& cats = descriptors[spec.d_numeric + j].categories;
      if (std::find(cats.begin(), cats.end(), value) == cats.end()) cats.push_back(value);
      row.emplace_back(std::move(value));
    }
    rows.push_back(std::move(row));
  }

  Provenance prov;
  prov.source = "synthetic";
  prov.synthetic = spec;
  prov.synthetic_seed = seed;
  return Dataset(std::move(name), std::nullopt, std::move(descriptors), std::move(rows),
                 std::move(labels), std::move(prov));
}

SplitPair split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::kInvalidSpec, "train_fraction must lie in (0, 1)");
  Rng rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.labels()[i] == cls) members.push_back(i);
    rng.shuffle(members);
    auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(members.size()) + 0.5));
    if (n_train == 0 || n_train >= members.size())
      throw Error(ErrorCode::kDegenerateSplit,
                  "class " + std::to_string(cls) + " with " + std::to_string(members.size()) +
                      " rows cannot appear in both parts");
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return SplitPair{ds.subset(train_idx), ds.subset(test_idx), seed, train_fraction};
}

}  // namespace gridbench::data
