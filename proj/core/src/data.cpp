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

#include "soiln/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "json.hpp"
#include "soiln/error.hpp"
#include "soiln/random.hpp"

namespace soiln {

using internal::FormatDouble;
using internal::ParseDouble;
using json = nlohmann::ordered_json;

Landcover::Landcover(std::string name) : name_(std::move(name)) {
  if (name_.empty()) {
    throw Error(ErrorCode::kParseError, "landcover category names are non-empty");
  }
}

FeatureTable::FeatureTable(std::vector<std::string> names, std::size_t n_rows,
                           std::vector<double> values,
                           std::vector<std::uint8_t> missing)
    : names_(std::move(names)),
      n_rows_(n_rows),
      values_(std::move(values)),
      missing_(std::move(missing)) {
  const std::size_t cells = n_rows_ * names_.size();
  if (values_.size() != cells) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature matrix has " + std::to_string(values_.size()) +
                    " cells, expected " + std::to_string(cells));
  }
  if (missing_.empty()) missing_.assign(cells, 0);
  if (missing_.size() != cells) {
    throw Error(ErrorCode::kDimensionMismatch,
                "missing mask size differs from the feature matrix");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : names_) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "duplicate feature name '" + name + "'");
    }
  }
  for (std::size_t i = 0; i < cells; ++i) {
    if (missing_[i]) {
      values_[i] = std::numeric_limits<double>::quiet_NaN();
    } else if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kParseError,
                  "non-finite feature value at row " +
                      std::to_string(i / names_.size()) + ", column '" +
                      names_[i % names_.size()] + "'");
    }
  }
}

std::optional<std::size_t> FeatureTable::ColumnIndex(
    std::string_view name) const {
  for (std::size_t c = 0; c < names_.size(); ++c) {
    if (names_[c] == name) return c;
  }
  return std::nullopt;
}

FeatureTable FeatureTable::SelectRows(std::span<const std::size_t> rows) const {
  const std::size_t cols = n_cols();
  std::vector<double> values(rows.size() * cols);
  std::vector<std::uint8_t> missing(rows.size() * cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(values_.begin() + rows[i] * cols, cols,
                values.begin() + i * cols);
    std::copy_n(missing_.begin() + rows[i] * cols, cols,
                missing.begin() + i * cols);
  }
  return FeatureTable(names_, rows.size(), std::move(values),
                      std::move(missing));
}

FeatureTable FeatureTable::SelectColumns(
    std::span<const std::string> names) const {
  std::vector<std::size_t> source;
  source.reserve(names.size());
  for (const auto& name : names) {
    const auto index = ColumnIndex(name);
    if (!index) {
      throw Error(ErrorCode::kMissingFeature, name);
    }
    source.push_back(*index);
  }
  const std::size_t cols = names.size();
  std::vector<double> values(n_rows_ * cols);
  std::vector<std::uint8_t> missing(n_rows_ * cols);
  for (std::size_t r = 0; r < n_rows_; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      values[r * cols + c] = value(r, source[c]);
      missing[r * cols + c] = missing_[r * n_cols() + source[c]];
    }
  }
  return FeatureTable(std::vector<std::string>(names.begin(), names.end()),
                      n_rows_, std::move(values), std::move(missing));
}

void Dataset::Validate() const {
  const std::size_t n = features.n_rows();
  if (target.values.size() != n || landcover.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "features, target and landcover disagree on row count");
  }
  if (ids) {
    if (ids->size() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "id column length");
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& id : *ids) {
      if (!seen.insert(id).second) {
        throw Error(ErrorCode::kDuplicateId, id);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double v = target.values[i];
    if (target.scale == TargetScale::kOriginal) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kNonPositiveTarget, "row " + std::to_string(i));
      }
    } else if (!std::isfinite(v)) {
      throw Error(ErrorCode::kParseError,
                  "non-finite transformed target at row " + std::to_string(i));
    }
  }
}

Dataset Dataset::SelectRows(std::span<const std::size_t> rows) const {
  Dataset out;
  out.features = features.SelectRows(rows);
  out.target.scale = target.scale;
  out.target.values.reserve(rows.size());
  out.landcover.reserve(rows.size());
  for (const std::size_t r : rows) {
    out.target.values.push_back(target.values[r]);
    out.landcover.push_back(landcover[r]);
  }
  if (ids) {
    std::vector<std::string> selected;
    selected.reserve(rows.size());
    for (const std::size_t r : rows) selected.push_back((*ids)[r]);
    out.ids = std::move(selected);
  }
  return out;
}

Dataset Dataset::SelectFeatures(std::span<const std::string> names) const {
  Dataset out = *this;
  out.features = features.SelectColumns(names);
  return out;
}

std::vector<std::size_t> Dataset::RowsOfClass(const Landcover& cls) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < landcover.size(); ++i) {
    if (landcover[i] == cls) rows.push_back(i);
  }
  return rows;
}

std::vector<Landcover> Dataset::Classes() const {
  std::set<Landcover> classes(landcover.begin(), landcover.end());
  return {classes.begin(), classes.end()};
}

std::vector<std::size_t> FoldAssignment::RowsInFold(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
    if (fold_of_row[i] == fold) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> FoldAssignment::RowsOutsideFold(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of_row.size(); ++i) {
    if (fold_of_row[i] != fold) rows.push_back(i);
  }
  return rows;
}

std::uint64_t FoldAssignment::Hash() const {
  std::uint64_t h = Fnv1a64(&k, sizeof(k));
  h = Fnv1a64(&n_bins, sizeof(n_bins), h);
  return Fnv1a64(fold_of_row.data(), fold_of_row.size() * sizeof(int), h);
}

namespace {

// With `labelled` false the target and landcover columns are optional and
// are dropped rather than parsed.
Dataset ParseCsv(const std::filesystem::path& path, const CsvColumns& columns,
                 bool labelled) {
  const std::string text = internal::ReadFile(path);
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      std::string_view line(text.data() + start, end - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      start = end + 1;
    }
  }
  while (!lines.empty() && internal::Trim(lines.back()).empty()) {
    lines.pop_back();
  }
  if (lines.empty()) {
    throw Error(ErrorCode::kParseError, path.string() + ": missing header row");
  }
  std::string_view header_line = lines.front();
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);

  std::vector<std::string> header = internal::SplitCsvRecord(header_line);
  for (auto& name : header) name = std::string(internal::Trim(name));

  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto target_col = find(columns.target);
  if (!target_col && labelled) throw Error(ErrorCode::kMissingColumn, columns.target);
  const auto landcover_col = find(columns.landcover);
  if (!landcover_col && labelled) {
    throw Error(ErrorCode::kMissingColumn, columns.landcover);
  }
  std::optional<std::size_t> id_col;
  if (columns.id) {
    id_col = find(*columns.id);
    if (!id_col && columns.id_required) {
      throw Error(ErrorCode::kMissingColumn, *columns.id);
    }
  }

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target_col || c == landcover_col || c == id_col) {
      continue;
    }
    feature_cols.push_back(c);
    names.push_back(header[c]);
  }

  const std::size_t n_rows = lines.size() - 1;
  const std::size_t n_cols = feature_cols.size();
  std::vector<double> values(n_rows * n_cols, 0.0);
  std::vector<std::uint8_t> missing(n_rows * n_cols, 0);
  Dataset ds;
  ds.target.scale = TargetScale::kOriginal;
  ds.target.values.reserve(n_rows);
  ds.landcover.reserve(n_rows);
  std::vector<std::string> ids;

  auto parse_error = [&](std::size_t row, std::size_t col,
                         std::string_view token) {
    return Error(ErrorCode::kParseError,
                 "row " + std::to_string(row) + ", column '" + header[col] +
                     "': token '" + std::string(token) + "'");
  };

  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::vector<std::string> cells =
        internal::SplitCsvRecord(lines[r + 1]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "row " + std::to_string(r) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    if (labelled) {
      const std::string& target_token = cells[*target_col];
      const auto target = ParseDouble(target_token);
      if (!target || std::isnan(*target) || std::isinf(*target)) {
        throw parse_error(r, *target_col, target_token);
      }
      if (!(*target > 0.0)) {
        throw Error(ErrorCode::kNonPositiveTarget, "row " + std::to_string(r));
      }
      ds.target.values.push_back(*target);

      const std::string_view lc = internal::Trim(cells[*landcover_col]);
      if (lc.empty()) throw parse_error(r, *landcover_col, lc);
      ds.landcover.emplace_back(std::string(lc));
    }

    if (id_col) ids.emplace_back(internal::Trim(cells[*id_col]));

    for (std::size_t j = 0; j < n_cols; ++j) {
      const std::string& token = cells[feature_cols[j]];
      if (internal::IsMissingToken(token)) {
        missing[r * n_cols + j] = 1;
        continue;
      }
      const auto v = ParseDouble(token);
      if (!v || !std::isfinite(*v)) {
        throw parse_error(r, feature_cols[j], token);
      }
      values[r * n_cols + j] = *v;
    }
  }

  ds.features = FeatureTable(std::move(names), n_rows, std::move(values),
                             std::move(missing));
  if (id_col) ds.ids = std::move(ids);
  if (labelled) ds.Validate();
  return ds;
}

}  // namespace

Dataset LoadCsv(const std::filesystem::path& path, const CsvColumns& columns) {
  return ParseCsv(path, columns, true);
}

UnlabelledTable LoadFeatureCsv(const std::filesystem::path& path,
                               const CsvColumns& columns) {
  Dataset ds = ParseCsv(path, columns, false);
  return {std::move(ds.features), std::move(ds.ids)};
}

void WriteCsv(const Dataset& ds, const std::filesystem::path& path,
              const CsvColumns& columns) {
  if (ds.target.scale != TargetScale::kOriginal) {
    throw Error(ErrorCode::kAlreadyTransformed,
                "WriteCsv expects original-scale targets");
  }
  const bool with_ids = ds.ids.has_value() && columns.id.has_value();
  std::string out;
  out.reserve(ds.n_rows() * (ds.features.n_cols() + 3) * 12);
  if (with_ids) {
    out += internal::EscapeCsvField(*columns.id);
    out += ',';
  }
  for (const auto& name : ds.features.names()) {
    out += internal::EscapeCsvField(name);
    out += ',';
  }
  out += internal::EscapeCsvField(columns.landcover);
  out += ',';
  out += internal::EscapeCsvField(columns.target);
  out += '\n';
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    if (with_ids) {
      out += internal::EscapeCsvField((*ds.ids)[r]);
      out += ',';
    }
    for (std::size_t c = 0; c < ds.features.n_cols(); ++c) {
      out += ds.features.is_missing(r, c) ? "NA"
                                          : FormatDouble(ds.features.value(r, c));
      out += ',';
    }
    out += internal::EscapeCsvField(ds.landcover[r].name());
    out += ',';
    out += FormatDouble(ds.target.values[r]);
    out += '\n';
  }
  internal::WriteFileAtomic(path, out);
}

double TransformValue(double original) noexcept {
  return std::log(kTargetScaleFactor * original);
}

double InverseTransformValue(double transformed) noexcept {
  return std::exp(transformed) / kTargetScaleFactor;
}

TargetVector TransformTarget(const TargetVector& y) {
  if (y.scale != TargetScale::kOriginal) {
    throw Error(ErrorCode::kAlreadyTransformed, "target is already log-scaled");
  }
  TargetVector out;
  out.scale = TargetScale::kTransformedLog;
  out.values.reserve(y.values.size());
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const double v = y.values[i];
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kNonPositiveTarget, "row " + std::to_string(i));
    }
    out.values.push_back(TransformValue(v));
  }
  return out;
}

TargetVector InverseTransformTarget(const TargetVector& z) {
  if (z.scale != TargetScale::kTransformedLog) {
    throw Error(ErrorCode::kAlreadyOriginal, "target is on the original scale");
  }
  TargetVector out;
  out.scale = TargetScale::kOriginal;
  out.values.reserve(z.values.size());
  for (const double v : z.values) out.values.push_back(InverseTransformValue(v));
  return out;
}

SplitIndices StratifiedSplit(const Dataset& ds, double test_fraction,
                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidFraction,
                "test fraction must lie in (0, 1), got " +
                    FormatDouble(test_fraction));
  }
  if (ds.landcover.size() != ds.n_rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "landcover length");
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.landcover.size(); ++i) {
    by_class[ds.landcover[i].name()].push_back(i);
  }

  SplitIndices split;
  split.seed = seed;
  Rng rng(seed);
  for (auto& [name, rows] : by_class) {
    const std::size_t n = rows.size();
    if (n < 2) throw Error(ErrorCode::kClassTooSmall, name);
    // nearbyint under the default rounding mode is round-half-to-even.
    auto n_test = static_cast<std::size_t>(
        std::nearbyint(static_cast<double>(n) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    rng.Shuffle(std::span<std::size_t>(rows));
    split.test.insert(split.test.end(), rows.begin(), rows.begin() + n_test);
    split.train.insert(split.train.end(), rows.begin() + n_test, rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

FoldAssignment StratifiedKFold(const TargetVector& y, int k, int n_bins,
                               std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidK, "k must be at least 2");
  if (n_bins < 1) throw Error(ErrorCode::kInvalidK, "n_bins must be positive");
  const std::size_t n = y.values.size();
  if (n < static_cast<std::size_t>(k) * static_cast<std::size_t>(n_bins)) {
    spdlog::warn(
        "stratified k-fold: {} rows is fewer than k * n_bins = {}; some "
        "bins will not reach every fold",
        n, k * n_bins);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return y.values[a] < y.values[b];
  });

  std::vector<std::vector<std::size_t>> bins(n_bins);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t bin = rank * static_cast<std::size_t>(n_bins) / n;
    bins[bin].push_back(order[rank]);
  }

  FoldAssignment folds;
  folds.k = k;
  folds.n_bins = n_bins;
  folds.seed = seed;
  folds.fold_of_row.assign(n, -1);
  Rng rng(seed);
  std::size_t deal = 0;
  for (auto& bin : bins) {
    rng.Shuffle(std::span<std::size_t>(bin));
    for (const std::size_t row : bin) {
      folds.fold_of_row[row] = static_cast<int>(deal % static_cast<std::size_t>(k));
      ++deal;
    }
  }
  return folds;
}

namespace {

json ParseJson(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError,
                std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string SplitToJson(const SplitIndices& split) {
  json doc;
  doc["seed"] = split.seed;
  doc["train"] = split.train;
  doc["test"] = split.test;
  return doc.dump(1) + "\n";
}

SplitIndices SplitFromJson(std::string_view text) {
  const json doc = ParseJson(text, "split file");
  try {
    SplitIndices split;
    split.seed = doc.at("seed").get<std::uint64_t>();
    split.train = doc.at("train").get<std::vector<std::size_t>>();
    split.test = doc.at("test").get<std::vector<std::size_t>>();
    return split;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("split file: ") + e.what());
  }
}

std::string FoldsToJson(const FoldAssignment& folds) {
  json doc;
  doc["seed"] = folds.seed;
  doc["k"] = folds.k;
  doc["n_bins"] = folds.n_bins;
  doc["fold_of_row"] = folds.fold_of_row;
  return doc.dump(1) + "\n";
}

FoldAssignment FoldsFromJson(std::string_view text) {
  const json doc = ParseJson(text, "fold file");
  try {
    FoldAssignment folds;
    folds.seed = doc.at("seed").get<std::uint64_t>();
    folds.k = doc.at("k").get<int>();
    folds.n_bins = doc.at("n_bins").get<int>();
    folds.fold_of_row = doc.at("fold_of_row").get<std::vector<int>>();
    return folds;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("fold file: ") + e.what());
  }
}

}  // namespace soiln
