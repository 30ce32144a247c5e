#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gridbench/common.hpp"

namespace gridbench::data {

enum class FeatureKind { kNumeric, kCategorical };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  // Categorical only, in first-seen order.
  std::vector<std::string> categories;

  friend bool operator==(const FeatureDescriptor&, const FeatureDescriptor&) = default;
};

// A raw cell: numeric features hold double, categorical features hold text.
using Cell = std::variant<double, std::string>;
using Row = std::vector<Cell>;

struct SyntheticSpec {
  std::size_t n = 200;
  std::size_t d_numeric = 4;
  std::size_t d_categorical = 0;
  double anomaly_fraction = 0.3;
  double class_separation = 2.0;
  // Number of categories per categorical feature.
  std::size_t categories_per_feature = 3;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

// Where a dataset came from; recorded in study records.
struct Provenance {
  std::string source;  // "csv" or "synthetic"
  std::string manifest_path;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::uint64_t> synthetic_seed;
  std::size_t dropped_rows = 0;
};

// Immutable after construction.
class Dataset {
 public:
  Dataset(std::string name, std::optional<int> purdue_level,
          std::vector<FeatureDescriptor> descriptors, std::vector<Row> rows,
          std::vector<int> labels, Provenance provenance = {},
          std::vector<std::size_t> row_ids = {});

  const std::string& name() const noexcept { return name_; }
  std::optional<int> purdue_level() const noexcept { return purdue_level_; }
  const std::vector<FeatureDescriptor>& descriptors() const noexcept { return descriptors_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  // Index of each row in the source dataset; identity for freshly loaded data.
  const std::vector<std::size_t>& row_ids() const noexcept { return row_ids_; }
  const std::string& content_hash() const noexcept { return content_hash_; }

  std::size_t size() const noexcept { return rows_.size(); }
  std::size_t dimension() const noexcept { return descriptors_.size(); }
  std::size_t count_label(int label) const;

  // Subset in the given order; row_ids track back to the source rows.
  Dataset subset(const std::vector<std::size_t>& indices) const;

  // UTF-8 CSV: descriptor header line, then one line per row with the label
  // as the last field. Numbers use 17 significant digits.
  std::string canonical_serialization() const;

 private:
  std::string name_;
  std::optional<int> purdue_level_;
  std::vector<FeatureDescriptor> descriptors_;
  std::vector<Row> rows_;
  std::vector<int> labels_;
  Provenance provenance_;
  std::vector<std::size_t> row_ids_;
  std::string content_hash_;
};

struct SplitPair {
  Dataset train;
  Dataset test;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.0;
};

// Parses an RFC-4180 document into records. Throws MalformedCsv on an
// unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

Dataset load_csv(const std::filesystem::path& manifest_path);
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                           std::string name = "synthetic");
SplitPair split(const Dataset& ds, double train_fraction, std::uint64_t seed);

std::string format_number(double value);

}  // namespace gridbench::data
