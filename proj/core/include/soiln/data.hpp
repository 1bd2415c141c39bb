/*
 * Copyright 2026 The soiln Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Tabular datasets, the log target transform, and the two stratified
// partitioning schemes (landcover-stratified train/test split and
// target-quantile-stratified cross-validation folds).

#ifndef SOILN_DATA_HPP_
#define SOILN_DATA_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace soiln {

// Multiplier applied before the natural log in the target transform.
inline constexpr double kTargetScaleFactor = 100.0;

// A named landcover category. Names are non-empty; the two categories the
// pipeline reports on separately are Cropland and Grassland.
class Landcover {
 public:
  explicit Landcover(std::string name);

  static Landcover Cropland() { return Landcover("Cropland"); }
  static Landcover Grassland() { return Landcover("Grassland"); }

  const std::string& name() const noexcept { return name_; }

  friend auto operator<=>(const Landcover&, const Landcover&) = default;

 private:
  std::string name_;
};

// Dense row-major feature matrix with a per-cell missing mask. Missing cells
// hold a quiet NaN in `values` so raw reads never see stale numbers.
class FeatureTable {
 public:
  FeatureTable() = default;

  // Validates names (unique, count == n_cols), dimensions, and finiteness of
  // every non-missing cell. `missing` may be empty when nothing is missing.
  FeatureTable(std::vector<std::string> names, std::size_t n_rows,
               std::vector<double> values, std::vector<std::uint8_t> missing);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  double value(std::size_t row, std::size_t col) const noexcept {
    return values_[row * n_cols() + col];
  }
  bool is_missing(std::size_t row, std::size_t col) const noexcept {
    return missing_[row * n_cols() + col] != 0;
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {values_.data() + r * n_cols(), n_cols()};
  }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const std::uint8_t> missing_mask() const noexcept {
    return missing_;
  }

  std::optional<std::size_t> ColumnIndex(std::string_view name) const;

  FeatureTable SelectRows(std::span<const std::size_t> rows) const;
  // Throws MissingFeature when a requested name is absent.
  FeatureTable SelectColumns(std::span<const std::string> names) const;

 private:
  std::vector<std::string> names_;
  std::size_t n_rows_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> missing_;
};

enum class TargetScale { kOriginal, kTransformedLog };

struct TargetVector {
  std::vector<double> values;
  TargetScale scale = TargetScale::kOriginal;
};

struct Dataset {
  FeatureTable features;
  TargetVector target;
  std::vector<Landcover> landcover;
  std::optional<std::vector<std::string>> ids;

  std::size_t n_rows() const noexcept { return features.n_rows(); }

  // Checks row-count agreement, id uniqueness and the target-scale contract.
  void Validate() const;

  Dataset SelectRows(std::span<const std::size_t> rows) const;
  Dataset SelectFeatures(std::span<const std::string> names) const;
  // Rows whose landcover equals `cls`, in original order.
  std::vector<std::size_t> RowsOfClass(const Landcover& cls) const;
  // Distinct classes in ascending name order.
  std::vector<Landcover> Classes() const;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

struct FoldAssignment {
  std::vector<int> fold_of_row;
  int k = 0;
  int n_bins = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> RowsInFold(int fold) const;
  std::vector<std::size_t> RowsOutsideFold(int fold) const;
  std::uint64_t Hash() const;
};

struct CsvColumns {
  std::string target = "nitrogen";
  std::string landcover = "landcover";
  // Used when present in the header; absence is an error only if required.
  std::optional<std::string> id = "id";
  bool id_required = false;
};

// Reads the comma-separated dialect: header row, '.' decimals, and the
// tokens "", "NA" and "NaN" for missing feature cells.
Dataset LoadCsv(const std::filesystem::path& path, const CsvColumns& columns);

struct UnlabelledTable {
  FeatureTable features;
  std::optional<std::vector<std::string>> ids;
};

// Same dialect, for inputs that may lack the target and landcover columns.
// Those columns are skipped when present.
UnlabelledTable LoadFeatureCsv(const std::filesystem::path& path,
                               const CsvColumns& columns);

// Writes `ds` in the same dialect LoadCsv reads. Targets are written in
// original units; an id column is written only when ids are present.
void WriteCsv(const Dataset& ds, const std::filesystem::path& path,
              const CsvColumns& columns);

double TransformValue(double original) noexcept;
double InverseTransformValue(double transformed) noexcept;

// ln(100 * y) elementwise.
TargetVector TransformTarget(const TargetVector& y);
// exp(z) / 100 elementwise.
TargetVector InverseTransformTarget(const TargetVector& z);

// Per-class test counts are round-half-even(class_size * test_fraction),
// nudged so neither side of a class is empty.
SplitIndices StratifiedSplit(const Dataset& ds, double test_fraction,
                             std::uint64_t seed);

// Buckets rows into `n_bins` target-quantile bins and deals each shuffled bin
// round-robin across `k` folds, continuing the deal position from one bin to
// the next so global fold sizes also differ by at most one.
FoldAssignment StratifiedKFold(const TargetVector& y, int k, int n_bins,
                               std::uint64_t seed);

std::string SplitToJson(const SplitIndices& split);
SplitIndices SplitFromJson(std::string_view text);
std::string FoldsToJson(const FoldAssignment& folds);
FoldAssignment FoldsFromJson(std::string_view text);

}  // namespace soiln

#endif  // SOILN_DATA_HPP_
