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

#include "soiln/shap.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "json.hpp"
#include "soiln/error.hpp"

namespace soiln {
namespace {

// One entry of the unique-feature path. `pweight` is the permutation weight
// of subsets with `i` ones for the element at position i.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void ExtendPath(PathElement* path, int depth, double zero_fraction,
                double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].pweight +=
        one_fraction * path[i].pweight * (i + 1) / static_cast<double>(depth + 1);
    path[i].pweight =
        zero_fraction * path[i].pweight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void UnwindPath(PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight =
          next_one_portion * (depth + 1) / ((i + 1) * one_fraction);
      next_one_portion = tmp - path[i].pweight * zero_fraction * (depth - i) /
                                   static_cast<double>(depth + 1);
    } else {
      path[i].pweight =
          path[i].pweight * (depth + 1) / (zero_fraction * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total permutation weight the path would carry with element `index` removed.
double UnwoundPathSum(const PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp =
          next_one_portion * (depth + 1) / ((i + 1) * one_fraction);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero_fraction * (depth - i) /
                                               static_cast<double>(depth + 1);
    } else if (zero_fraction != 0.0) {
      total += path[i].pweight / zero_fraction /
               ((depth - i) / static_cast<double>(depth + 1));
    }
  }
  return total;
}

class TreeShapWalker {
 public:
  TreeShapWalker(const RegressionTree& tree, int depth) : tree_(tree) {
    const auto d = static_cast<std::size_t>(depth) + 3;
    path_.resize(d * (d + 1) / 2);
  }

  void Run(std::span<const double> row, std::span<double> phi) {
    row_ = row;
    phi_ = phi;
    Recurse(tree_.root, 0, path_.data(), 1.0, 1.0, -1);
  }

 private:
  void Recurse(std::int32_t node_id, int depth, PathElement* parent_path,
               double parent_zero, double parent_one, int parent_feature) {
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth + 1, path);
    ExtendPath(path, depth, parent_zero, parent_one, parent_feature);

    const TreeNode& node = tree_.nodes[node_id];
    if (node.is_leaf()) {
      for (int i = 1; i <= depth; ++i) {
        const double w = UnwoundPathSum(path, depth, i);
        const PathElement& el = path[i];
        phi_[el.feature] += w * (el.one_fraction - el.zero_fraction) * node.value;
      }
      return;
    }

    const double v = row_[node.feature];
    const bool go_left = std::isnan(v) ? node.default_left : v < node.threshold;
    const std::int32_t hot = go_left ? node.left : node.right;
    const std::int32_t cold = go_left ? node.right : node.left;
    const double hot_zero = tree_.nodes[hot].cover / node.cover;
    const double cold_zero = tree_.nodes[cold].cover / node.cover;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    const int feature = static_cast<int>(node.feature);
    int index = 0;
    for (; index <= depth; ++index) {
      if (path[index].feature == feature) break;
    }
    if (index != depth + 1) {
      incoming_zero = path[index].zero_fraction;
      incoming_one = path[index].one_fraction;
      UnwindPath(path, depth, index);
      --depth;
    }
    Recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one,
            feature);
    Recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, feature);
  }

  const RegressionTree& tree_;
  std::span<const double> row_;
  std::span<double> phi_;
  std::vector<PathElement> path_;
};

// Longest root-to-leaf edge count, computed rather than trusted from the
// stored max_depth_reached.
int TreeDepth(const RegressionTree& tree) {
  int deepest = 0;
  std::vector<std::pair<std::int32_t, int>> stack{{tree.root, 0}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const TreeNode& node = tree.nodes[id];
    if (!node.is_leaf()) {
      stack.emplace_back(node.left, d + 1);
      stack.emplace_back(node.right, d + 1);
    }
  }
  return deepest;
}

void CheckCovers(const RegressionTree& tree, std::size_t index) {
  for (const auto& node : tree.nodes) {
    if (std::isnan(node.cover) || node.cover < 0.0) {
      throw Error(ErrorCode::kMissingCoverCounts,
                  "tree " + std::to_string(index) + " lacks cover counts");
    }
    if (!node.is_leaf() && !(node.cover > 0.0)) {
      throw Error(ErrorCode::kMissingCoverCounts,
                  "tree " + std::to_string(index) +
                      " has an internal node with zero cover");
    }
  }
}

// Path-dependent attributions at a leaf depend on the row only through which
// of the leaf's path features the row agrees with. LeafTable precomputes the
// per-feature contributions for every agreement mask, so evaluating a row is
// one pass over the tree.
class LeafTable {
 public:
  static constexpr std::size_t kMaxEntries = std::size_t{1} << 21;

  // Null when the tables would exceed kMaxEntries doubles.
  static std::unique_ptr<LeafTable> Build(const RegressionTree& tree, int depth) {
    std::size_t leaves = 0;
    for (const auto& node : tree.nodes) leaves += node.is_leaf() ? 1 : 0;
    const std::size_t d = static_cast<std::size_t>(depth);
    if (d >= 20 || leaves * (std::size_t{1} << d) * std::max<std::size_t>(d, 1) >
                       kMaxEntries) {
      return nullptr;
    }
    auto table = std::unique_ptr<LeafTable>(new LeafTable(tree));
    table->slot_.assign(tree.nodes.size(), -1);
    table->leaf_.assign(tree.nodes.size(), -1);
    std::vector<Frame> path;
    table->Collect(tree.root, path, depth);
    return table;
  }

  void Run(std::span<const double> row, std::span<double> phi) const {
    Visit(tree_.root, row, phi, 0, 0);
  }

 private:
  struct Frame {
    std::uint32_t feature;
    double zero_fraction;
  };
  struct Leaf {
    std::vector<std::uint32_t> features;
    // contributions[mask * features.size() + slot]
    std::vector<double> contributions;
  };

  explicit LeafTable(const RegressionTree& tree) : tree_(tree) {}

  void Collect(std::int32_t id, std::vector<Frame>& path, int depth) {
    const TreeNode& node = tree_.nodes[id];
    if (node.is_leaf()) {
      leaf_[id] = static_cast<std::int32_t>(leaves_.size());
      leaves_.push_back(Tabulate(path, node.value, depth));
      return;
    }
    int slot = -1;
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (path[i].feature == node.feature) slot = static_cast<int>(i);
    }
    slot_[id] = slot >= 0 ? slot : static_cast<int>(path.size());
    for (const std::int32_t child : {node.left, node.right}) {
      const double ratio = tree_.nodes[child].cover / node.cover;
      if (slot >= 0) {
        const double saved = path[slot].zero_fraction;
        path[slot].zero_fraction *= ratio;
        Collect(child, path, depth);
        path[slot].zero_fraction = saved;
      } else {
        path.push_back({node.feature, ratio});
        Collect(child, path, depth);
        path.pop_back();
      }
    }
  }

  static Leaf Tabulate(const std::vector<Frame>& frames, double value, int depth) {
    Leaf leaf;
    const std::size_t u = frames.size();
    for (const auto& f : frames) leaf.features.push_back(f.feature);
    leaf.contributions.assign((std::size_t{1} << u) * u, 0.0);
    const auto d = static_cast<std::size_t>(depth) + 2;
    std::vector<PathElement> path(d);
    for (std::size_t mask = 0; mask < (std::size_t{1} << u); ++mask) {
      ExtendPath(path.data(), 0, 1.0, 1.0, -1);
      for (std::size_t i = 0; i < u; ++i) {
        const double one = (mask >> i) & 1 ? 1.0 : 0.0;
        ExtendPath(path.data(), static_cast<int>(i + 1), frames[i].zero_fraction,
                   one, static_cast<int>(frames[i].feature));
      }
      for (std::size_t i = 0; i < u; ++i) {
        const int at = static_cast<int>(i + 1);
        const double w = UnwoundPathSum(path.data(), static_cast<int>(u), at);
        leaf.contributions[mask * u + i] =
            w * (path[at].one_fraction - path[at].zero_fraction) * value;
      }
    }
    return leaf;
  }

  // `seen` marks slots already on the path, `agree` those the row followed
  // at every occurrence.
  void Visit(std::int32_t id, std::span<const double> row, std::span<double> phi,
             std::uint32_t seen, std::uint32_t agree) const {
    const TreeNode& node = tree_.nodes[id];
    if (node.is_leaf()) {
      const Leaf& leaf = leaves_[leaf_[id]];
      const std::size_t u = leaf.features.size();
      const double* c = leaf.contributions.data() + agree * u;
      for (std::size_t i = 0; i < u; ++i) phi[leaf.features[i]] += c[i];
      return;
    }
    const double v = row[node.feature];
    const bool go_left = std::isnan(v) ? node.default_left : v < node.threshold;
    const std::uint32_t bit = std::uint32_t{1} << slot_[id];
    const bool repeat = (seen & bit) != 0;
    const std::uint32_t base_agree = repeat ? agree : (agree | bit);
    Visit(node.left, row, phi, seen | bit, go_left ? base_agree : (base_agree & ~bit));
    Visit(node.right, row, phi, seen | bit, go_left ? (base_agree & ~bit) : base_agree);
  }

  const RegressionTree& tree_;
  std::vector<int> slot_;
  std::vector<std::int32_t> leaf_;
  std::vector<Leaf> leaves_;
};

}  // namespace

void TreeShapSingle(const RegressionTree& tree, std::span<const double> row,
                    std::span<double> phi) {
  TreeShapWalker(tree, TreeDepth(tree)).Run(row, phi);
}

double TreeExpectedValue(const RegressionTree& tree) {
  // Same child/parent cover ratios the attribution walk uses.
  double total = 0.0;
  std::vector<std::pair<std::int32_t, double>> stack{{tree.root, 1.0}};
  while (!stack.empty()) {
    const auto [id, weight] = stack.back();
    stack.pop_back();
    const TreeNode& node = tree.nodes[id];
    if (node.is_leaf()) {
      total += weight * node.value;
      continue;
    }
    stack.emplace_back(node.left, weight * tree.nodes[node.left].cover / node.cover);
    stack.emplace_back(node.right, weight * tree.nodes[node.right].cover / node.cover);
  }
  return total;
}

ShapMatrix TreeShap(const Ensemble& model, const FeatureTable& ft) {
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    CheckCovers(model.trees[t], t);
  }
  const std::vector<double> x = GatherFeatures(model, ft);
  const std::size_t m = model.feature_names.size();
  const double weight = model.TreeWeight();

  ShapMatrix out;
  out.n_rows = ft.n_rows();
  out.feature_names = model.feature_names;
  out.values.assign(out.n_rows * m, 0.0);

  double expected = 0.0;
  for (const auto& tree : model.trees) expected += TreeExpectedValue(tree);
  out.base_value = model.base_score + weight * expected;

  // Tree-major so only one tree's tables are alive at a time.
  std::vector<double> phi(out.n_rows * m, 0.0);
  for (const auto& tree : model.trees) {
    const int depth = TreeDepth(tree);
    if (const auto table = LeafTable::Build(tree, depth)) {
      for (std::size_t r = 0; r < ft.n_rows(); ++r) {
        table->Run(std::span<const double>(x.data() + r * m, m),
                   std::span<double>(phi.data() + r * m, m));
      }
    } else {
      TreeShapWalker walker(tree, depth);
      for (std::size_t r = 0; r < ft.n_rows(); ++r) {
        walker.Run(std::span<const double>(x.data() + r * m, m),
                   std::span<double>(phi.data() + r * m, m));
      }
    }
  }
  for (std::size_t i = 0; i < phi.size(); ++i) out.values[i] = weight * phi[i];
  return out;
}

FeatureRanking RankFeatures(const ShapMatrix& shap) {
  if (shap.n_rows == 0 || shap.n_features() == 0) {
    throw Error(ErrorCode::kEmptyMatrix, "no attributions to rank");
  }
  const std::size_t m = shap.n_features();
  std::vector<double> sums(m, 0.0);
  for (std::size_t r = 0; r < shap.n_rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) sums[j] += std::abs(shap.at(r, j));
  }
  FeatureRanking ranking;
  ranking.entries.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    ranking.entries.emplace_back(shap.feature_names[j],
                                 sums[j] / static_cast<double>(shap.n_rows));
  }
  std::sort(ranking.entries.begin(), ranking.entries.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  return ranking;
}

std::vector<std::string> SelectTopK(const FeatureRanking& ranking, int k) {
  if (k < 1) throw Error(ErrorCode::kInvalidParams, "k must be at least 1");
  std::size_t count = static_cast<std::size_t>(k);
  if (count > ranking.entries.size()) {
    spdlog::warn("top-k: k = {} exceeds the {} ranked features; keeping all",
                 k, ranking.entries.size());
    count = ranking.entries.size();
  }
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    names.push_back(ranking.entries[i].first);
  }
  return names;
}

std::string RankingToCsv(const FeatureRanking& ranking) {
  std::string out = "name,importance\n";
  for (const auto& [name, importance] : ranking.entries) {
    out += internal::EscapeCsvField(name);
    out += ',';
    out += internal::FormatDouble(importance);
    out += '\n';
  }
  return out;
}

std::string FeatureListToJson(std::span<const std::string> names) {
  return nlohmann::json(std::vector<std::string>(names.begin(), names.end()))
             .dump(1) +
         "\n";
}

std::vector<std::string> FeatureListFromJson(std::string_view text) {
  try {
    return nlohmann::json::parse(text).get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError,
                std::string("feature list: ") + e.what());
  }
}

}  // namespace soiln
