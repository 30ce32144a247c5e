#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridbench {

enum class ErrorCode {
  kMissingFile,
  kMalformedManifest,
  kMalformedCsv,
  kUnknownLabelColumn,
  kNonBinaryLabel,
  kInvalidSpec,
  kDegenerateSplit,
  kInvalidConfig,
  kSchemaMismatch,
  kSingleClassTrainingSet,
  kNonFiniteFeature,
  kDimensionMismatch,
  kFoldTooSmall,
  kExactTooLarge,
  kSingleClassLabels,
  kKOutOfRange,
  kNoFlipFound,
  kAllInstancesIdentical,
  kAllPairsTied,
  kZeroDeviation,
  kEmptySamples,
  kSchemaViolation,
  kNotFound,
  kCorruptIndex,
  kIo,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  void append_row(std::span<const double> values);
  Matrix select_rows(std::span<const std::size_t> indices) const;
  std::vector<double> column_means() const;

  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Deterministic generator with portable distributions. The standard library's
// distributions are implementation-defined, which would make seeded results
// differ between toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

// Child seed = splitmix64(splitmix64(master ^ fnv1a64(label)) ^ index).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index = 0);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

double sigmoid(double z);
double l2_norm(std::span<const double> v);
double l2_distance(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v);

}  // namespace gridbench
