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

// Re-derives every GBDT node from per-row sums over the raw feature values.

#ifndef SOILN_TESTS_GBDT_ORACLE_HPP_
#define SOILN_TESTS_GBDT_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "soiln/data.hpp"
#include "soiln/trees.hpp"

namespace soiln::testing {

struct RawSumReport {
  std::size_t nodes = 0;
  std::size_t splits = 0;
  std::size_t cover_mismatches = 0;
  // Splits that leave a child below min_child_weight or empty.
  std::size_t invalid_splits = 0;
  // Thresholds that are not bin edges of their feature.
  std::size_t off_edge = 0;
  // Splits beaten by some (feature, edge, default side) candidate.
  std::size_t suboptimal = 0;
  double max_gain_error = 0.0;
  // |leaf - (-G / (n + lambda))|
  double max_leaf_error = 0.0;

  bool Clean(double gain_tol, double leaf_tol) const {
    return cover_mismatches == 0 && invalid_splits == 0 && off_edge == 0 &&
           suboptimal == 0 && max_gain_error <= gain_tol && max_leaf_error <= leaf_tol;
  }
};

namespace oracle_detail {

inline std::vector<std::size_t> RowsAt(const RegressionTree& tree, const std::vector<double>& x,
                                       std::size_t cols, std::size_t n, std::int32_t target) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < n; ++r) {
    std::int32_t id = tree.root;
    const double* row = x.data() + r * cols;
    while (id != target && !tree.nodes[id].is_leaf()) {
      const TreeNode& node = tree.nodes[id];
      const double v = row[node.feature];
      const bool left = std::isnan(v) ? node.default_left : v < node.threshold;
      id = left ? node.left : node.right;
    }
    if (id == target) out.push_back(r);
  }
  return out;
}

struct RawSplit {
  bool valid = false;
  double gain = 0.0;
};

inline RawSplit RawGain(const std::vector<std::size_t>& rows, const std::vector<double>& x,
                        std::size_t cols, const std::vector<double>& g, std::size_t f,
                        double threshold, bool default_left, const GbdtParams& p) {
  double gl = 0.0, gr = 0.0;
  double nl = 0.0, nr = 0.0;
  for (const std::size_t r : rows) {
    const double v = x[r * cols + f];
    const bool left = std::isnan(v) ? default_left : v < threshold;
    if (left) {
      gl += g[r];
      nl += 1;
    } else {
      gr += g[r];
      nr += 1;
    }
  }
  const double G = gl + gr;
  const double n = nl + nr;
  RawSplit out;
  out.valid = nl > 0 && nr > 0 && nl >= p.min_child_weight && nr >= p.min_child_weight;
  out.gain = 0.5 * (gl * gl / (nl + p.l2_lambda) + gr * gr / (nr + p.l2_lambda) -
                    G * G / (n + p.l2_lambda));
  return out;
}

}  // namespace oracle_detail

// Trains with `p` (full rows and columns) and checks every node of every tree
// against direct summation of the squared-loss gradients at that round.
inline RawSumReport CheckAgainstRawSums(const Dataset& ds, const GbdtParams& p) {
  using namespace oracle_detail;
  const BinnedTable binned = BinFeatures(ds.features, p.n_bins);
  std::vector<std::vector<double>> before;
  std::vector<double> current;
  const Ensemble m =
      TrainGbdt(binned, ds.target, p, [&](int, std::span<const double> pred) {
        before.emplace_back(current);
        current.assign(pred.begin(), pred.end());
      });
  const std::size_t n = ds.n_rows();
  const std::size_t cols = ds.features.n_cols();
  const std::vector<double> x(ds.features.values().begin(), ds.features.values().end());
  RawSumReport report;
  if (m.trees.empty()) return report;
  before.front().assign(n, m.base_score);
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    const RegressionTree& tree = m.trees[t];
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = before[t][i] - ds.target.values[i];
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      ++report.nodes;
      const TreeNode& node = tree.nodes[id];
      const auto rows = RowsAt(tree, x, cols, n, static_cast<std::int32_t>(id));
      if (static_cast<double>(rows.size()) != node.cover) ++report.cover_mismatches;
      if (node.is_leaf()) {
        double G = 0.0;
        for (const auto r : rows) G += g[r];
        const double expect = -G / (static_cast<double>(rows.size()) + p.l2_lambda);
        report.max_leaf_error = std::max(report.max_leaf_error, std::abs(node.value - expect));
        continue;
      }
      ++report.splits;
      const RawSplit chosen =
          RawGain(rows, x, cols, g, node.feature, node.threshold, node.default_left, p);
      if (!chosen.valid || !(node.gain > 0.0)) ++report.invalid_splits;
      report.max_gain_error = std::max(report.max_gain_error, std::abs(node.gain - chosen.gain));
      const auto& edges = binned.bin_edges[node.feature];
      if (std::find(edges.begin(), edges.end(), node.threshold) == edges.end()) {
        ++report.off_edge;
      }
      bool beaten = false;
      for (std::size_t f = 0; f < cols && !beaten; ++f) {
        for (const double thr : binned.bin_edges[f]) {
          for (const bool dl : {true, false}) {
            const RawSplit alt = RawGain(rows, x, cols, g, f, thr, dl, p);
            if (alt.valid && alt.gain > node.gain + 1e-10) beaten = true;
          }
        }
      }
      report.suboptimal += beaten;
    }
  }
  return report;
}

}  // namespace soiln::testing

#endif  // SOILN_TESTS_GBDT_ORACLE_HPP_
