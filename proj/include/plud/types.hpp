#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plud/error.hpp"

namespace plud {

/// Row-major n x d matrix of 32-bit floats.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {}
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw InvalidArgument("embedding matrix: value count does not match shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const { return {values_.data() + i * cols_, cols_}; }
  std::span<float> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  float operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  float& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }

  const std::vector<float>& values() const noexcept { return values_; }

  /// Gathers the given rows into a new matrix, in the given order.
  EmbeddingMatrix select(std::span<const std::size_t> row_indices) const {
    EmbeddingMatrix out(row_indices.size(), cols_);
    for (std::size_t k = 0; k < row_indices.size(); ++k) {
      const auto src = row(row_indices[k]);
      std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
  }

  /// Index of the first row holding a non-finite value, if any.
  std::optional<std::size_t> first_non_finite_row() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) return i / (cols_ == 0 ? 1 : cols_);
    }
    return std::nullopt;
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

struct ItemRecord {
  std::string item_id;
  std::optional<std::string> source_uri;
  std::string subject_id;
  std::optional<std::string> captured_at;  // ISO-8601, UTC
  std::optional<std::size_t> embedding_row;
};

enum class Provenance { kManual, kClusterMajority, kSelfTrained, kPredicted };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kManual: return "MANUAL";
    case Provenance::kClusterMajority: return "CLUSTER_MAJORITY";
    case Provenance::kSelfTrained: return "SELF_TRAINED";
    case Provenance::kPredicted: return "PREDICTED";
  }
  return "?";
}

inline Provenance parse_provenance(std::string_view s) {
  if (s == "MANUAL") return Provenance::kManual;
  if (s == "CLUSTER_MAJORITY") return Provenance::kClusterMajority;
  if (s == "SELF_TRAINED") return Provenance::kSelfTrained;
  if (s == "PREDICTED") return Provenance::kPredicted;
  throw FormatError("unknown provenance '" + std::string(s) + "'");
}

/// Expert-originated labels may overwrite anything; machine labels may not
/// overwrite them.
constexpr bool is_expert(Provenance p) noexcept {
  return p == Provenance::kManual || p == Provenance::kClusterMajority;
}

struct LabelAssignment {
  std::string item_id;
  std::string label;
  Provenance provenance = Provenance::kManual;
  double confidence = 1.0;
  std::uint32_t iteration = 0;
  std::string assigned_at;
  bool shadowed = false;

  friend bool operator==(const LabelAssignment&, const LabelAssignment&) = default;
};

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDThh:mm[:ss[.frac]]` with optional `Z` or
/// `+hh:mm` offset. Also checks calendar ranges.
inline bool is_iso8601(std::string_view text) {
  static const std::regex pattern(
      R"(^(\d{4})-(\d{2})-(\d{2})(?:[T ](\d{2}):(\d{2})(?::(\d{2})(?:\.\d+)?)?(?:Z|[+-]\d{2}:?\d{2})?)?$)");
  std::cmatch m;
  const std::string s(text);
  if (!std::regex_match(s.c_str(), m, pattern)) return false;
  const int month = std::stoi(m[2].str());
  const int day = std::stoi(m[3].str());
  if (month < 1 || month > 12 || day < 1 || day > 31) return false;
  if (m[4].matched && (std::stoi(m[4].str()) > 23 || std::stoi(m[5].str()) > 59)) return false;
  if (m[6].matched && std::stoi(m[6].str()) > 60) return false;
  return true;
}

inline std::string utc_now_iso8601() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace plud
