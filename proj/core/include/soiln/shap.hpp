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

// Exact Shapley attributions for tree ensembles (path-dependent TreeSHAP,
// using per-node training cover as the background distribution) and
// SHAP-based feature ranking / top-k selection.

#ifndef SOILN_SHAP_HPP_
#define SOILN_SHAP_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "soiln/data.hpp"
#include "soiln/trees.hpp"

namespace soiln {

struct ShapMatrix {
  // Row-major n_rows x feature_names.size(), transformed-target units.
  std::vector<double> values;
  std::size_t n_rows = 0;
  std::vector<std::string> feature_names;
  // Cover-weighted expected model output.
  double base_value = 0.0;

  std::size_t n_features() const noexcept { return feature_names.size(); }
  double at(std::size_t row, std::size_t feature) const noexcept {
    return values[row * n_features() + feature];
  }
};

struct FeatureRanking {
  // (name, mean |shap|), importance descending, ties by name ascending.
  std::vector<std::pair<std::string, double>> entries;
};

// Attributions for every row of `ft` (columns matched by name). Throws
// MissingCoverCounts if any node lacks a recorded cover.
ShapMatrix TreeShap(const Ensemble& model, const FeatureTable& ft);

// Unscaled attributions of one tree for one row (model feature order),
// added into `phi`.
void TreeShapSingle(const RegressionTree& tree, std::span<const double> row,
                    std::span<double> phi);

// Cover-weighted mean leaf value of one tree.
double TreeExpectedValue(const RegressionTree& tree);

FeatureRanking RankFeatures(const ShapMatrix& shap);

// First min(k, n) names of the ranking. k must be at least 1.
std::vector<std::string> SelectTopK(const FeatureRanking& ranking, int k);

std::string RankingToCsv(const FeatureRanking& ranking);
std::string FeatureListToJson(std::span<const std::string> names);
std::vector<std::string> FeatureListFromJson(std::string_view text);

}  // namespace soiln

#endif  // SOILN_SHAP_HPP_
