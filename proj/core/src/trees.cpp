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

#include "soiln/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>
#include <utility>

#include <spdlog/spdlog.h>

#include "soiln/error.hpp"
#include "soiln/random.hpp"

namespace soiln {
namespace {

// Histogram slot layout: feature f owns slots [f * 256, f * 256 + 256); the
// missing code (255) lands in the feature's last slot.
constexpr std::size_t kSlotsPerFeature = 256;
// Subtrees rooted at or below this many rows grow from per-feature sorted
// row orders instead of dense histograms.
constexpr std::size_t kSortedRowLimit = 512;

struct HistBin {
  double g = 0.0;
  std::uint32_t n = 0;
};

using Histogram = std::vector<HistBin>;

struct SplitChoice {
  bool valid = false;
  double gain = 0.0;
  std::uint32_t feature = 0;
  int bin = 0;
  bool default_left = true;
};

std::vector<std::uint32_t> SampleIndices(std::size_t n, double fraction,
                                         Rng& rng) {
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  if (fraction >= 1.0) return all;
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction)));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.UniformInt(n - i);
    std::swap(all[i], all[j]);
  }
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

class GbdtTreeBuilder {
 public:
  GbdtTreeBuilder(const BinnedTable& binned, std::span<const double> grad,
                  const GbdtParams& params,
                  std::vector<std::uint32_t> features)
      : binned_(binned),
        grad_(grad),
        params_(params),
        features_(std::move(features)),
        n_cols_(binned.n_cols()) {}

  RegressionTree Build(std::vector<std::uint32_t> rows) {
    rows_ = std::move(rows);
    // Hessians are all 1, so a child's weight is its row count.
    inv_.resize(rows_.size() + 1);
    for (std::size_t n = 0; n < inv_.size(); ++n) {
      inv_[n] = 1.0 / (static_cast<double>(n) + params_.l2_lambda);
    }
    min_count_ = static_cast<std::uint32_t>(
        std::max(1.0, std::ceil(params_.min_child_weight)));
    scratch_.resize(rows_.size());
    tree_ = RegressionTree{};
    split_bins_.clear();
    Histogram hist;
    if (rows_.size() > kSortedRowLimit) {
      hist = Acquire();
      Fill(hist, 0, rows_.size());
    }
    Grow(0, rows_.size(), std::move(hist), 0);
    return std::move(tree_);
  }

  // Bin index of each node's split, parallel to the tree's nodes.
  const std::vector<int>& split_bins() const noexcept { return split_bins_; }

 private:
  double LeafScore(double g, std::uint32_t n) const noexcept {
    return g * g * inv_[n];
  }

  Histogram Acquire() {
    if (pool_.empty()) return Histogram(n_cols_ * kSlotsPerFeature);
    Histogram h = std::move(pool_.back());
    pool_.pop_back();
    return h;
  }

  void Release(Histogram h) {
    if (!h.empty()) pool_.push_back(std::move(h));
  }

  void Fill(Histogram& hist, std::size_t begin, std::size_t end) const {
    for (const std::uint32_t f : features_) {
      std::fill_n(hist.begin() + f * kSlotsPerFeature, kSlotsPerFeature,
                  HistBin{});
    }
    const std::uint8_t* codes = binned_.codes.data();
    const bool all_features = features_.size() == n_cols_;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t row = rows_[i];
      const double g = grad_[row];
      const std::uint8_t* row_codes = codes + row * n_cols_;
      if (all_features) {
        for (std::size_t f = 0; f < n_cols_; ++f) {
          HistBin& b = hist[f * kSlotsPerFeature + row_codes[f]];
          b.g += g;
          ++b.n;
        }
      } else {
        for (const std::uint32_t f : features_) {
          HistBin& b = hist[f * kSlotsPerFeature + row_codes[f]];
          b.g += g;
          ++b.n;
        }
      }
    }
  }

  void Subtract(Histogram& from, const Histogram& part) const {
    for (const std::uint32_t f : features_) {
      const std::size_t base = f * kSlotsPerFeature;
      for (std::size_t s = 0; s < kSlotsPerFeature; ++s) {
        from[base + s].g -= part[base + s].g;
        from[base + s].n -= part[base + s].n;
      }
    }
  }

  // Evaluates the left/right partition (GL, NL) vs the rest for one
  // threshold, under both routings of the missing rows when present.
  void Consider(double gl, std::uint32_t nl, double g_miss,
                std::uint32_t n_miss, double g_total, std::uint32_t n_total,
                double parent_score, std::uint32_t feature, int bin,
                SplitChoice& best) const {
    auto evaluate = [&](double g_left, std::uint32_t n_left, bool left) {
      const std::uint32_t n_right = n_total - n_left;
      if (n_left < min_count_ || n_right < min_count_) return;
      const double g_right = g_total - g_left;
      const double gain =
          0.5 * (g_left * g_left * inv_[n_left] +
                 g_right * g_right * inv_[n_right] - parent_score);
      if (gain > 0.0 && (!best.valid || gain > best.gain)) {
        best = {true, gain, feature, bin, left};
      }
    };
    evaluate(gl + g_miss, nl + n_miss, true);
    if (n_miss > 0) evaluate(gl, nl, false);
  }

  SplitChoice FindDense(const Histogram& hist, double g_total,
                        std::uint32_t n_total) const {
    SplitChoice best;
    const double parent_score = LeafScore(g_total, n_total);
    for (const std::uint32_t f : features_) {
      const int n_thresholds = static_cast<int>(binned_.bin_edges[f].size());
      if (n_thresholds == 0) continue;
      const HistBin* h = hist.data() + f * kSlotsPerFeature;
      const HistBin& miss = h[BinnedTable::kMissingCode];
      double gl = 0.0;
      std::uint32_t nl = 0;
      for (int c = 0; c < n_thresholds; ++c) {
        // An empty bin repeats the previous partition, which already won or
        // lost every tie.
        if (c > 0 && h[c].n == 0) continue;
        gl += h[c].g;
        nl += h[c].n;
        Consider(gl, nl, miss.g, miss.n, g_total, n_total, parent_score, f, c,
                 best);
      }
    }
    return best;
  }

  // Sorted mode: once a node is small, every feature's rows are ordered by
  // code (ties by row) and each child inherits its slice of those orders
  // through stable partitions. Rows are renumbered 0..n-1 in ascending order
  // for the subtree.
  void EnterSorted(std::size_t begin, std::size_t end, bool need_keys) {
    const std::size_t n = end - begin;
    n_sub_ = n;
    local_row_.assign(rows_.begin() + begin, rows_.begin() + end);
    local_grad_.resize(n);
    local_order_.resize(n);
    go_left_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      local_grad_[i] = grad_[local_row_[i]];
      local_order_[i] = static_cast<std::uint32_t>(i);
    }
    if (!need_keys) return;
    keys_.resize(features_.size() * n);
    key_scratch_.resize(n);
    std::uint32_t count[kSlotsPerFeature];
    for (std::size_t k = 0; k < features_.size(); ++k) {
      const std::uint32_t f = features_[k];
      std::fill_n(count, kSlotsPerFeature, 0u);
      for (std::size_t i = 0; i < n; ++i) {
        ++count[binned_.codes[local_row_[i] * n_cols_ + f]];
      }
      std::uint32_t offset = 0;
      for (std::size_t c = 0; c < kSlotsPerFeature; ++c) {
        const std::uint32_t m = count[c];
        count[c] = offset;
        offset += m;
      }
      std::uint64_t* out = keys_.data() + k * n;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t code = binned_.codes[local_row_[i] * n_cols_ + f];
        out[count[code]++] = (std::uint64_t{code} << 32) | i;
      }
    }
  }

  SplitChoice FindSorted(std::size_t lb, std::size_t le, double g_total,
                         std::uint32_t n_total) const {
    SplitChoice best;
    const double parent_score = LeafScore(g_total, n_total);
    for (std::size_t k = 0; k < features_.size(); ++k) {
      const std::uint32_t f = features_[k];
      const int n_thresholds = static_cast<int>(binned_.bin_edges[f].size());
      if (n_thresholds == 0) continue;
      const std::uint64_t* keys = keys_.data() + k * n_sub_ + lb;
      const std::size_t n = le - lb;
      // Missing rows sort last (code 255).
      double g_miss = 0.0;
      std::uint32_t n_miss = 0;
      std::size_t data_end = n;
      while (data_end > 0 &&
             (keys[data_end - 1] >> 32) == BinnedTable::kMissingCode) {
        --data_end;
      }
      for (std::size_t i = data_end; i < n; ++i) {
        g_miss += local_grad_[keys[i] & 0xffffffffu];
        ++n_miss;
      }
      if (data_end > 0 && (keys[0] >> 32) > 0) {
        Consider(0.0, 0, g_miss, n_miss, g_total, n_total, parent_score, f, 0,
                 best);
      }
      double gl = 0.0;
      std::uint32_t nl = 0;
      std::size_t i = 0;
      while (i < data_end) {
        const auto code = static_cast<int>(keys[i] >> 32);
        double run_g = 0.0;
        std::uint32_t run_n = 0;
        while (i < data_end && static_cast<int>(keys[i] >> 32) == code) {
          run_g += local_grad_[keys[i] & 0xffffffffu];
          ++run_n;
          ++i;
        }
        gl += run_g;
        nl += run_n;
        if (code < n_thresholds) {
          Consider(gl, nl, g_miss, n_miss, g_total, n_total, parent_score, f,
                   code, best);
        }
      }
    }
    return best;
  }

  std::int32_t GrowSorted(std::size_t lb, std::size_t le, int depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    split_bins_.push_back(-1);
    tree_.max_depth_reached = std::max(tree_.max_depth_reached, depth);

    const auto n = static_cast<std::uint32_t>(le - lb);
    double g_total = 0.0;
    for (std::size_t i = lb; i < le; ++i) g_total += local_grad_[local_order_[i]];
    tree_.nodes[id].cover = n;

    SplitChoice split;
    if (depth < params_.max_depth && n >= 2) {
      split = FindSorted(lb, le, g_total, n);
    }
    if (!split.valid) {
      tree_.nodes[id].value = -g_total / (n + params_.l2_lambda);
      return id;
    }

    std::size_t n_left = 0;
    for (std::size_t i = lb; i < le; ++i) {
      const std::uint32_t o = local_order_[i];
      const bool left = GoesLeft(local_row_[o], split);
      go_left_[o] = left;
      n_left += left;
    }
    auto partition = [this, lb, le](auto* data) {
      std::size_t l = lb;
      std::size_t r = 0;
      for (std::size_t i = lb; i < le; ++i) {
        const auto v = data[i];
        if (go_left_[v & 0xffffffffu]) {
          data[l++] = v;
        } else {
          key_scratch_[r++] = v;
        }
      }
      std::copy_n(key_scratch_.begin(), r, data + l);
    };
    partition(local_order_.data());
    if (depth + 1 < params_.max_depth) {
      for (std::size_t k = 0; k < features_.size(); ++k) {
        partition(keys_.data() + k * n_sub_);
      }
    }
    const std::size_t mid = lb + n_left;

    TreeNode& node = tree_.nodes[id];
    node.feature = split.feature;
    node.threshold = binned_.bin_edges[split.feature][split.bin];
    node.default_left = split.default_left;
    node.gain = split.gain;
    split_bins_[id] = split.bin;

    const std::int32_t left = GrowSorted(lb, mid, depth + 1);
    const std::int32_t right = GrowSorted(mid, le, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  bool GoesLeft(std::uint32_t row, const SplitChoice& split) const noexcept {
    const std::uint8_t code = binned_.codes[row * n_cols_ + split.feature];
    if (code == BinnedTable::kMissingCode) return split.default_left;
    return code <= split.bin;
  }

  std::int32_t Grow(std::size_t begin, std::size_t end, Histogram hist,
                    int depth) {
    if (end - begin <= kSortedRowLimit) {
      Release(std::move(hist));
      EnterSorted(begin, end, depth < params_.max_depth && end - begin >= 2);
      return GrowSorted(0, end - begin, depth);
    }
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    split_bins_.push_back(-1);
    tree_.max_depth_reached = std::max(tree_.max_depth_reached, depth);

    const auto n = static_cast<std::uint32_t>(end - begin);
    double g_total = 0.0;
    for (std::size_t i = begin; i < end; ++i) g_total += grad_[rows_[i]];
    tree_.nodes[id].cover = n;

    SplitChoice split;
    if (depth < params_.max_depth) {
      if (hist.empty()) {
        hist = Acquire();
        Fill(hist, begin, end);
      }
      split = FindDense(hist, g_total, n);
    }
    if (!split.valid) {
      Release(std::move(hist));
      tree_.nodes[id].value = -g_total / (n + params_.l2_lambda);
      return id;
    }

    // Stable partition keeps rows ascending within each child.
    std::size_t n_left = 0;
    std::size_t n_right = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t row = rows_[i];
      if (GoesLeft(row, split)) {
        rows_[begin + n_left++] = row;
      } else {
        scratch_[n_right++] = row;
      }
    }
    std::copy_n(scratch_.begin(), n_right, rows_.begin() + begin + n_left);
    const std::size_t mid = begin + n_left;

    Histogram left_hist;
    Histogram right_hist;
    if (!hist.empty() && std::max(n_left, n_right) > kSortedRowLimit) {
      const bool left_smaller = n_left <= n_right;
      Histogram small = Acquire();
      if (left_smaller) {
        Fill(small, begin, mid);
      } else {
        Fill(small, mid, end);
      }
      Subtract(hist, small);
      const std::size_t n_small = left_smaller ? n_left : n_right;
      if (n_small <= kSortedRowLimit) {
        Release(std::move(small));
        small = Histogram{};
      }
      if (left_smaller) {
        left_hist = std::move(small);
        right_hist = std::move(hist);
      } else {
        right_hist = std::move(small);
        left_hist = std::move(hist);
      }
    } else {
      Release(std::move(hist));
    }

    TreeNode& node = tree_.nodes[id];
    node.feature = split.feature;
    node.threshold = binned_.bin_edges[split.feature][split.bin];
    node.default_left = split.default_left;
    node.gain = split.gain;
    split_bins_[id] = split.bin;

    const std::int32_t left = Grow(begin, mid, std::move(left_hist), depth + 1);
    const std::int32_t right = Grow(mid, end, std::move(right_hist), depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  const BinnedTable& binned_;
  std::span<const double> grad_;
  const GbdtParams& params_;
  std::vector<std::uint32_t> features_;
  std::size_t n_cols_;

  RegressionTree tree_;
  std::vector<int> split_bins_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::uint32_t> scratch_;
  std::vector<Histogram> pool_;
  std::vector<double> inv_;
  std::uint32_t min_count_ = 1;

  std::size_t n_sub_ = 0;
  std::vector<std::uint32_t> local_row_;
  std::vector<double> local_grad_;
  std::vector<std::uint32_t> local_order_;
  std::vector<std::uint8_t> go_left_;
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint64_t> key_scratch_;
};

std::int32_t LeafOfBinnedRow(const RegressionTree& tree,
                             const std::vector<int>& split_bins,
                             const std::uint8_t* row_codes) noexcept {
  std::int32_t id = tree.root;
  while (!tree.nodes[id].is_leaf()) {
    const TreeNode& node = tree.nodes[id];
    const std::uint8_t code = row_codes[node.feature];
    const bool left = code == BinnedTable::kMissingCode
                          ? node.default_left
                          : code <= split_bins[id];
    id = left ? node.left : node.right;
  }
  return id;
}

class ExtraTreeBuilder {
 public:
  ExtraTreeBuilder(const FeatureTable& ft, std::span<const double> y,
                   const ExtraTreesParams& params, std::uint64_t tree_seed)
      : ft_(ft),
        y_(y),
        params_(params),
        rng_(tree_seed),
        n_candidates_(params.n_candidate_features == 0
                          ? ft.n_cols()
                          : static_cast<std::size_t>(
                                params.n_candidate_features)) {}

  RegressionTree Build() {
    rows_.resize(ft_.n_rows());
    std::iota(rows_.begin(), rows_.end(), 0u);
    scratch_.resize(rows_.size());
    features_.resize(ft_.n_cols());
    tree_ = RegressionTree{};
    Grow(0, rows_.size(), 0);
    return std::move(tree_);
  }

 private:
  struct Cut {
    bool valid = false;
    double score = 0.0;
    std::uint32_t feature = 0;
    double threshold = 0.0;
    bool default_left = true;
  };

  std::int32_t Grow(std::size_t begin, std::size_t end, int depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.max_depth_reached = std::max(tree_.max_depth_reached, depth);
    const std::size_t n = end - begin;
    tree_.nodes[id].cover = static_cast<double>(n);

    double sum = 0.0;
    double y_min = y_[rows_[begin]];
    double y_max = y_min;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y_[rows_[i]];
      sum += v;
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
    const double mean = sum / static_cast<double>(n);
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);

    const bool depth_capped = params_.max_depth > 0 && depth >= params_.max_depth;
    Cut best;
    if (!depth_capped && n >= 2 * min_leaf && y_min < y_max) {
      best = ChooseCut(begin, end, sum, min_leaf);
    }
    if (!best.valid) {
      // A constant node reproduces its value exactly.
      tree_.nodes[id].value =
          y_min == y_max ? y_min : std::clamp(mean, y_min, y_max);
      return id;
    }

    std::size_t n_left = 0;
    std::size_t n_right = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const std::uint32_t row = rows_[i];
      const bool left = ft_.is_missing(row, best.feature)
                            ? best.default_left
                            : ft_.value(row, best.feature) < best.threshold;
      if (left) {
        rows_[begin + n_left++] = row;
      } else {
        scratch_[n_right++] = row;
      }
    }
    std::copy_n(scratch_.begin(), n_right, rows_.begin() + begin + n_left);
    const std::size_t mid = begin + n_left;

    TreeNode& node = tree_.nodes[id];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.default_left = best.default_left;
    const std::int32_t left = Grow(begin, mid, depth + 1);
    const std::int32_t right = Grow(mid, end, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  Cut ChooseCut(std::size_t begin, std::size_t end, double sum,
                std::size_t min_leaf) {
    const std::size_t n_cols = features_.size();
    std::iota(features_.begin(), features_.end(), 0u);
    const double n = static_cast<double>(end - begin);
    const double parent = sum * sum / n;
    Cut best;
    for (std::size_t c = 0; c < n_candidates_; ++c) {
      const std::size_t j = c + rng_.UniformInt(n_cols - c);
      std::swap(features_[c], features_[j]);
      const std::uint32_t f = features_[c];

      double lo = 0.0;
      double hi = 0.0;
      bool any = false;
      for (std::size_t i = begin; i < end; ++i) {
        if (ft_.is_missing(rows_[i], f)) continue;
        const double v = ft_.value(rows_[i], f);
        if (!any) {
          lo = hi = v;
          any = true;
        } else {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      if (!any || !(lo < hi)) continue;
      const double threshold = lo + (hi - lo) * rng_.Uniform01();
      if (!(threshold > lo)) continue;

      double s_left = 0.0, s_miss = 0.0;
      std::size_t n_left = 0, n_miss = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t row = rows_[i];
        if (ft_.is_missing(row, f)) {
          s_miss += y_[row];
          ++n_miss;
        } else if (ft_.value(row, f) < threshold) {
          s_left += y_[row];
          ++n_left;
        }
      }
      auto consider = [&](double sl, std::size_t nl, bool default_left) {
        const std::size_t nr = (end - begin) - nl;
        if (nl < min_leaf || nr < min_leaf) return;
        const double sr = sum - sl;
        const double score = sl * sl / static_cast<double>(nl) +
                             sr * sr / static_cast<double>(nr) - parent;
        if (score > 0.0 && (!best.valid || score > best.score)) {
          best = {true, score, f, threshold, default_left};
        }
      };
      consider(s_left + s_miss, n_left + n_miss, true);
      if (n_miss > 0) consider(s_left, n_left, false);
    }
    return best;
  }

  const FeatureTable& ft_;
  std::span<const double> y_;
  const ExtraTreesParams& params_;
  Rng rng_;
  std::size_t n_candidates_;
  RegressionTree tree_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::uint32_t> scratch_;
  std::vector<std::uint32_t> features_;
};

void Corrupt(const std::string& reason) {
  throw Error(ErrorCode::kCorruptModel, reason);
}

}  // namespace

BinnedTable BinnedTable::SelectRows(std::span<const std::size_t> rows) const {
  BinnedTable out;
  out.bin_edges = bin_edges;
  out.feature_names = feature_names;
  out.n_bins = n_bins;
  out.n_rows = rows.size();
  out.codes.resize(rows.size() * n_cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(codes.begin() + rows[i] * n_cols(), n_cols(),
                out.codes.begin() + i * n_cols());
  }
  return out;
}

std::uint8_t BinCode(std::span<const double> edges, double value) noexcept {
  if (std::isnan(value)) return BinnedTable::kMissingCode;
  return static_cast<std::uint8_t>(
      std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

BinnedTable BinFeatures(const FeatureTable& ft, int n_bins) {
  if (n_bins < 2 || n_bins > 256) {
    throw Error(ErrorCode::kInvalidParams, "n_bins must lie in [2, 256]");
  }
  const int max_bins = std::min(n_bins, BinnedTable::kMaxDataBins);
  BinnedTable out;
  out.n_rows = ft.n_rows();
  out.n_bins = n_bins;
  out.feature_names = ft.names();
  out.bin_edges.resize(ft.n_cols());
  out.codes.resize(ft.n_rows() * ft.n_cols());

  std::vector<double> values;
  for (std::size_t f = 0; f < ft.n_cols(); ++f) {
    values.clear();
    for (std::size_t r = 0; r < ft.n_rows(); ++r) {
      if (!ft.is_missing(r, f)) values.push_back(ft.value(r, f));
    }
    auto& edges = out.bin_edges[f];
    if (values.empty()) {
      spdlog::warn("AllMissingFeature: '{}' has no observed values and will "
                   "not be split on",
                   ft.names()[f]);
    } else {
      std::sort(values.begin(), values.end());
      auto push_between = [&edges](double a, double b) {
        double edge = std::midpoint(a, b);
        if (!(edge > a)) edge = b;
        if (edges.empty() || edge > edges.back()) edges.push_back(edge);
      };
      std::vector<double> uniq(values);
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
        for (std::size_t i = 1; i < uniq.size(); ++i) {
          push_between(uniq[i - 1], uniq[i]);
        }
      } else {
        const std::size_t m = values.size();
        for (int j = 1; j < max_bins; ++j) {
          const std::size_t idx =
              static_cast<std::size_t>(j) * m / static_cast<std::size_t>(max_bins);
          if (idx == 0 || idx >= m) continue;
          const double a = values[idx - 1];
          double b = values[idx];
          if (a == b) {
            const auto next = std::upper_bound(values.begin() + idx, values.end(), a);
            if (next == values.end()) continue;
            b = *next;
          }
          push_between(a, b);
        }
      }
    }
    for (std::size_t r = 0; r < ft.n_rows(); ++r) {
      out.codes[r * ft.n_cols() + f] =
          ft.is_missing(r, f) ? BinnedTable::kMissingCode
                              : BinCode(edges, ft.value(r, f));
    }
  }
  return out;
}

std::int32_t RegressionTree::LeafIndex(
    std::span<const double> row) const noexcept {
  std::int32_t id = root;
  while (!nodes[id].is_leaf()) {
    const TreeNode& node = nodes[id];
    const double v = row[node.feature];
    const bool left = std::isnan(v) ? node.default_left : v < node.threshold;
    id = left ? node.left : node.right;
  }
  return id;
}

double RegressionTree::Predict(std::span<const double> row) const noexcept {
  return nodes[LeafIndex(row)].value;
}

std::uint64_t FeatureNameHash(std::span<const std::string> names) {
  std::uint64_t h = Fnv1a64(nullptr, 0);
  for (const auto& name : names) {
    h = Fnv1a64(name.data(), name.size(), h);
    h = Fnv1a64("\n", 1, h);
  }
  return h;
}

double Ensemble::TreeWeight() const noexcept {
  if (mode == EnsembleMode::kGbdt) return learning_rate;
  return trees.empty() ? 0.0 : 1.0 / static_cast<double>(trees.size());
}

void Ensemble::Validate() const {
  if (!std::isfinite(base_score)) Corrupt("base_score is not finite");
  if (!std::isfinite(learning_rate) || !(learning_rate > 0.0)) {
    Corrupt("learning_rate must be positive and finite");
  }
  std::unordered_set<std::string_view> names;
  for (const auto& name : feature_names) {
    if (name.empty()) Corrupt("empty feature name");
    if (!names.insert(name).second) Corrupt("duplicate feature name " + name);
  }
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const RegressionTree& tree = trees[t];
    const std::string where = "tree " + std::to_string(t);
    const auto n = static_cast<std::int64_t>(tree.nodes.size());
    if (n == 0) Corrupt(where + " has no nodes");
    if (tree.root < 0 || tree.root >= n) Corrupt(where + " root out of range");
    std::vector<char> seen(tree.nodes.size(), 0);
    std::vector<std::int32_t> stack{tree.root};
    seen[tree.root] = 1;
    std::size_t visited = 0;
    while (!stack.empty()) {
      const std::int32_t id = stack.back();
      stack.pop_back();
      ++visited;
      const TreeNode& node = tree.nodes[id];
      const std::string at = where + " node " + std::to_string(id);
      if (!std::isnan(node.cover) && !(node.cover >= 0.0 && std::isfinite(node.cover))) {
        Corrupt(at + " has an invalid cover");
      }
      if (std::isinf(node.gain)) Corrupt(at + " has an infinite gain");
      if (node.left < 0 && node.right < 0) {
        if (!std::isfinite(node.value)) Corrupt(at + " leaf value is not finite");
        continue;
      }
      for (const std::int32_t child : {node.left, node.right}) {
        if (child < 0 || child >= n) Corrupt(at + " child index out of range");
        if (seen[child]) Corrupt(at + " child is shared or cyclic");
        seen[child] = 1;
        stack.push_back(child);
      }
      if (node.feature >= feature_names.size()) {
        Corrupt(at + " feature index out of range");
      }
      if (!std::isfinite(node.threshold)) {
        Corrupt(at + " threshold is not finite");
      }
    }
    if (visited != tree.nodes.size()) Corrupt(where + " has unreachable nodes");
  }
}

Ensemble TrainGbdt(const BinnedTable& binned, const TargetVector& y,
                   const GbdtParams& params) {
  return TrainGbdt(binned, y, params, RoundObserver{});
}

Ensemble TrainGbdt(const BinnedTable& binned, const TargetVector& y,
                   const GbdtParams& params, const RoundObserver& observer) {
  params.Validate();
  const std::size_t n = binned.n_rows;
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "no training rows");
  if (y.values.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "target length differs from rows");
  }
  if (y.scale != TargetScale::kTransformedLog) {
    throw Error(ErrorCode::kInvalidParams,
                "GBDT trains on the log-transformed target");
  }

  Ensemble model;
  model.mode = EnsembleMode::kGbdt;
  model.learning_rate = params.learning_rate;
  model.target_scale = TargetScale::kTransformedLog;
  model.feature_names = binned.feature_names;
  model.training_params = params.ToMap();
  model.seed = params.seed;
  model.fingerprint = {n, FeatureNameHash(binned.feature_names)};

  double sum = 0.0;
  for (const double v : y.values) sum += v;
  model.base_score = sum / static_cast<double>(n);

  std::vector<double> pred(n, model.base_score);
  std::vector<double> grad(n);
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y.values[i];
    Rng rng(HashKey(params.seed, static_cast<std::uint64_t>(t), 0x9b));
    std::vector<std::uint32_t> rows = SampleIndices(n, params.subsample_rows, rng);
    std::vector<std::uint32_t> cols =
        SampleIndices(binned.n_cols(), params.subsample_cols, rng);

    GbdtTreeBuilder builder(binned, grad, params, std::move(cols));
    RegressionTree tree = builder.Build(std::move(rows));
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t leaf = LeafOfBinnedRow(
          tree, builder.split_bins(), binned.codes.data() + i * binned.n_cols());
      pred[i] += params.learning_rate * tree.nodes[leaf].value;
    }
    model.trees.push_back(std::move(tree));
    if (observer) observer(t, pred);
  }
  return model;
}

Ensemble FitGbdt(const Dataset& ds, const GbdtParams& params) {
  params.Validate();
  return TrainGbdt(BinFeatures(ds.features, params.n_bins), ds.target, params);
}

Ensemble TrainExtraTrees(const Dataset& ds, const ExtraTreesParams& params) {
  params.Validate(ds.features.n_cols());
  const std::size_t n = ds.n_rows();
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "no training rows");
  if (ds.target.values.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "target length differs from rows");
  }
  if (ds.target.scale != TargetScale::kTransformedLog) {
    throw Error(ErrorCode::kInvalidParams,
                "ExtraTrees trains on the log-transformed target");
  }
  if (ds.features.n_cols() == 0) {
    throw Error(ErrorCode::kInvalidParams, "no feature columns");
  }

  Ensemble model;
  model.mode = EnsembleMode::kExtraTrees;
  model.base_score = 0.0;
  model.learning_rate = 1.0;
  model.target_scale = TargetScale::kTransformedLog;
  model.feature_names = ds.features.names();
  model.training_params = params.ToMap();
  model.seed = params.seed;
  model.fingerprint = {n, FeatureNameHash(ds.features.names())};
  model.trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    ExtraTreeBuilder builder(
        ds.features, ds.target.values, params,
        HashKey(params.seed, static_cast<std::uint64_t>(t), 0xe7));
    model.trees.push_back(builder.Build());
  }
  return model;
}

std::vector<double> GatherFeatures(const Ensemble& model,
                                   const FeatureTable& ft) {
  std::vector<std::size_t> source;
  source.reserve(model.feature_names.size());
  for (const auto& name : model.feature_names) {
    const auto index = ft.ColumnIndex(name);
    if (!index) throw Error(ErrorCode::kMissingFeature, name);
    source.push_back(*index);
  }
  const std::size_t cols = source.size();
  std::vector<double> out(ft.n_rows() * cols);
  for (std::size_t r = 0; r < ft.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = ft.value(r, source[c]);
    }
  }
  return out;
}

std::vector<double> Predict(const Ensemble& model, const FeatureTable& ft) {
  const std::vector<double> x = GatherFeatures(model, ft);
  const std::size_t cols = model.feature_names.size();
  std::vector<double> out(ft.n_rows(), model.base_score);
  for (std::size_t r = 0; r < ft.n_rows(); ++r) {
    const std::span<const double> row(x.data() + r * cols, cols);
    if (model.mode == EnsembleMode::kGbdt) {
      double sum = 0.0;
      for (const auto& tree : model.trees) sum += tree.Predict(row);
      out[r] = model.base_score + model.learning_rate * sum;
    } else if (!model.trees.empty()) {
      // Running mean: exact when every tree agrees.
      double mean = 0.0;
      double k = 0.0;
      for (const auto& tree : model.trees) {
        k += 1.0;
        mean += (tree.Predict(row) - mean) / k;
      }
      out[r] = model.base_score + mean;
    }
  }
  return out;
}

}  // namespace soiln
