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

// Regression tree ensembles: histogram binning, a second-order gradient
// boosted trainer for squared error, an extremely-randomized-trees trainer,
// and name-matched prediction over raw feature tables.

#ifndef SOILN_TREES_HPP_
#define SOILN_TREES_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "soiln/data.hpp"
#include "soiln/params.hpp"

namespace soiln {

// Quantized feature matrix. Codes are row-major; code c of feature f covers
// [edges[f][c-1], edges[f][c]) with open ends at the extremes.
struct BinnedTable {
  static constexpr std::uint8_t kMissingCode = 255;
  static constexpr int kMaxDataBins = 255;

  std::vector<std::uint8_t> codes;
  std::vector<std::vector<double>> bin_edges;
  std::vector<std::string> feature_names;
  std::size_t n_rows = 0;
  int n_bins = 0;

  std::size_t n_cols() const noexcept { return bin_edges.size(); }
  std::uint8_t code(std::size_t row, std::size_t col) const noexcept {
    return codes[row * n_cols() + col];
  }
  BinnedTable SelectRows(std::span<const std::size_t> rows) const;
};

// Quantile bin edges per feature over the non-missing values. At most
// min(n_bins, 255) data bins; a feature with no non-missing values (or a
// single distinct value) gets no edges and is never split on.
BinnedTable BinFeatures(const FeatureTable& ft, int n_bins);

// Index of the bin holding `value` for the given edges.
std::uint8_t BinCode(std::span<const double> edges, double value) noexcept;

struct TreeNode {
  // Internal nodes send a row left when value < threshold; missing values
  // follow default_left. Leaves have left == right == -1.
  std::uint32_t feature = 0;
  double threshold = 0.0;
  bool default_left = true;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
  // Training rows that reached the node; NaN when not recorded.
  double cover = std::numeric_limits<double>::quiet_NaN();
  // Loss reduction of a GBDT split; NaN for leaves and ExtraTrees nodes.
  double gain = std::numeric_limits<double>::quiet_NaN();

  bool is_leaf() const noexcept { return left < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::int32_t root = 0;
  int max_depth_reached = 0;

  // `row` is indexed by the owning ensemble's feature order; NaN = missing.
  double Predict(std::span<const double> row) const noexcept;
  // Returns the leaf index reached by `row`.
  std::int32_t LeafIndex(std::span<const double> row) const noexcept;
};

enum class EnsembleMode { kGbdt, kExtraTrees };

struct DataFingerprint {
  std::size_t n_rows = 0;
  std::uint64_t feature_hash = 0;
};

std::uint64_t FeatureNameHash(std::span<const std::string> names);

struct Ensemble {
  EnsembleMode mode = EnsembleMode::kGbdt;
  double base_score = 0.0;
  double learning_rate = 1.0;
  TargetScale target_scale = TargetScale::kTransformedLog;
  // Features the trees index into, in training order.
  std::vector<std::string> feature_names;
  std::vector<RegressionTree> trees;

  ParamMap training_params;
  std::uint64_t seed = 0;
  DataFingerprint fingerprint;

  // Multiplier applied to each tree's output: learning_rate for GBDT,
  // 1 / n_trees for ExtraTrees.
  double TreeWeight() const noexcept;

  // Throws CorruptModel on any structural violation: child indices out of
  // range, cycles or shared children, unreachable nodes, non-finite values
  // or thresholds, feature index out of range, duplicate feature names.
  void Validate() const;
};

struct GbdtParams {
  int n_trees = 300;
  double learning_rate = 0.1;
  int max_depth = 6;
  double min_child_weight = 1.0;
  double l2_lambda = 1.0;
  double subsample_rows = 1.0;
  double subsample_cols = 1.0;
  int n_bins = 256;
  std::uint64_t seed = 0;

  void Validate() const;
  ParamMap ToMap() const;
  // Overrides the fields named in `params`; unknown names are rejected.
  static GbdtParams FromMap(const ParamMap& params);
  static GbdtParams FromMap(const ParamMap& params, GbdtParams base);
};

struct ExtraTreesParams {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_samples_leaf = 1;
  int n_candidate_features = 0;  // 0 = every feature
  std::uint64_t seed = 0;

  void Validate(std::size_t n_cols) const;
  ParamMap ToMap() const;
  static ExtraTreesParams FromMap(const ParamMap& params);
  static ExtraTreesParams FromMap(const ParamMap& params,
                                  ExtraTreesParams base);
};

// Squared-error boosting on a log-scale target. Gradients are pred - y,
// hessians are 1; leaves are -sum(g) / (count + lambda).
Ensemble TrainGbdt(const BinnedTable& binned, const TargetVector& y,
                   const GbdtParams& params);

// Bins `ds.features` with params.n_bins and trains.
Ensemble FitGbdt(const Dataset& ds, const GbdtParams& params);

// Called after every boosting round with the round index and the in-sample
// predictions (transformed scale).
using RoundObserver =
    std::function<void(int round, std::span<const double> predictions)>;
Ensemble TrainGbdt(const BinnedTable& binned, const TargetVector& y,
                   const GbdtParams& params, const RoundObserver& observer);

Ensemble TrainExtraTrees(const Dataset& ds, const ExtraTreesParams& params);

// Predictions on the transformed scale. Columns are matched by name; extra
// columns are ignored, a missing one throws MissingFeature.
std::vector<double> Predict(const Ensemble& model, const FeatureTable& ft);

// The model's features gathered from `ft` in model order, NaN for missing.
std::vector<double> GatherFeatures(const Ensemble& model,
                                   const FeatureTable& ft);

}  // namespace soiln

#endif  // SOILN_TREES_HPP_
