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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "soiln/random.hpp"
#include "test_util.hpp"

namespace soiln {
namespace {

using testing::CodeOf;
using testing::TempDir;
using testing::WriteFile;

Dataset ClassSizes(std::size_t n_crop, std::size_t n_grass) {
  const std::size_t n = n_crop + n_grass;
  std::vector<double> values(n);
  std::iota(values.begin(), values.end(), 0.0);
  std::vector<std::string> lc(n_crop, "Cropland");
  lc.insert(lc.end(), n_grass, "Grassland");
  return testing::MakeDataset({"x"}, values, std::vector<double>(n, 1.0), lc,
                              TargetScale::kOriginal);
}

std::size_t TestCount(const Dataset& ds, const SplitIndices& split,
                      const std::string& cls) {
  return static_cast<std::size_t>(
      std::count_if(split.test.begin(), split.test.end(), [&](std::size_t r) {
        return ds.landcover[r].name() == cls;
      }));
}

TEST(LoadCsv, PartitionsColumns) {
  TempDir dir;
  WriteFile(dir / "a.csv",
            "id,slope,ndvi,lc,n\n"
            "a,1.5,0.2,Cropland,1.1\n"
            "b,2.5,NA,Grassland,2.2\n"
            "c,,0.4,Cropland,3.3\n");
  const Dataset ds = LoadCsv(dir / "a.csv", {"n", "lc", "id"});
  EXPECT_EQ(ds.n_rows(), 3u);
  EXPECT_EQ(ds.features.n_cols(), 2u);
  EXPECT_EQ(ds.features.names(), (std::vector<std::string>{"slope", "ndvi"}));
  EXPECT_TRUE(ds.features.is_missing(1, 1));
  EXPECT_TRUE(ds.features.is_missing(2, 0));
  EXPECT_FALSE(ds.features.is_missing(0, 0));
  EXPECT_DOUBLE_EQ(ds.features.value(0, 0), 1.5);
  EXPECT_EQ(ds.target.scale, TargetScale::kOriginal);
  EXPECT_DOUBLE_EQ(ds.target.values[2], 3.3);
  EXPECT_EQ(ds.landcover[1].name(), "Grassland");
  ASSERT_TRUE(ds.ids.has_value());
  EXPECT_EQ((*ds.ids)[2], "c");
}

TEST(LoadCsv, NanTokenIsMissing) {
  TempDir dir;
  WriteFile(dir / "a.csv", "x,lc,n\nNaN,A,1\n2,A,1\n");
  const Dataset ds = LoadCsv(dir / "a.csv", {"n", "lc", std::nullopt});
  EXPECT_TRUE(ds.features.is_missing(0, 0));
  EXPECT_FALSE(ds.ids.has_value());
}

TEST(LoadCsv, ZeroTargetIsRejected) {
  TempDir dir;
  WriteFile(dir / "a.csv", "x,lc,n\n1,A,1\n2,A,0.0\n");
  EXPECT_EQ(CodeOf([&] { LoadCsv(dir / "a.csv", {"n", "lc"}); }),
            ErrorCode::kNonPositiveTarget);
}

TEST(LoadCsv, Errors) {
  TempDir dir;
  WriteFile(dir / "nolc.csv", "x,n\n1,1\n");
  EXPECT_EQ(CodeOf([&] { LoadCsv(dir / "nolc.csv", {"n", "lc"}); }),
            ErrorCode::kMissingColumn);
  WriteFile(dir / "bad.csv", "x,lc,n\nabc,A,1\n");
  EXPECT_EQ(CodeOf([&] { LoadCsv(dir / "bad.csv", {"n", "lc"}); }),
            ErrorCode::kParseError);
  WriteFile(dir / "ragged.csv", "x,lc,n\n1,A\n");
  EXPECT_EQ(CodeOf([&] { LoadCsv(dir / "ragged.csv", {"n", "lc"}); }),
            ErrorCode::kDimensionMismatch);
  WriteFile(dir / "dup.csv", "id,x,lc,n\na,1,A,1\na,2,A,1\n");
  EXPECT_EQ(CodeOf([&] { LoadCsv(dir / "dup.csv", {"n", "lc", "id"}); }),
            ErrorCode::kDuplicateId);
}

TEST(LoadCsv, WriteRoundTrip) {
  TempDir dir;
  const std::string text =
      "id,x,y,lc,n\nr0,0.1,NA,Cropland,1.25\nr1,1e-3,7,Grassland,0.5\n";
  WriteFile(dir / "a.csv", text);
  const CsvColumns cols{"n", "lc", "id"};
  const Dataset ds = LoadCsv(dir / "a.csv", cols);
  WriteCsv(ds, dir / "b.csv", cols);
  const Dataset back = LoadCsv(dir / "b.csv", cols);
  EXPECT_EQ(back.features.names(), ds.features.names());
  EXPECT_EQ(back.target.values, ds.target.values);
  EXPECT_EQ(back.ids, ds.ids);
  EXPECT_TRUE(back.features.is_missing(0, 1));
  EXPECT_EQ(back.features.value(1, 0), 1e-3);
}

TEST(LoadFeatureCsv, SkipsLabelColumns) {
  TempDir dir;
  WriteFile(dir / "a.csv", "id,x,lc,n,y\nq,1,A,2,3\n");
  const UnlabelledTable t = LoadFeatureCsv(dir / "a.csv", {"n", "lc", "id"});
  EXPECT_EQ(t.features.names(), (std::vector<std::string>{"x", "y"}));
  WriteFile(dir / "b.csv", "x,y\n1,2\n");
  EXPECT_EQ(LoadFeatureCsv(dir / "b.csv", {"n", "lc", "id"}).features.n_cols(),
            2u);
}

TEST(Transform, Examples) {
  EXPECT_EQ(TransformValue(0.01), 0.0);
  EXPECT_NEAR(TransformValue(2.5), 5.52146091786224643, 1e-14);
  EXPECT_NEAR(TransformValue(1.0), 4.60517018598809137, 1e-14);

  EXPECT_NEAR(InverseTransformValue(0.0), 0.01, 1e-17);
  // The input is ln(250) truncated to 9 decimals, so only the relative error
  // is below 1e-9.
  EXPECT_LE(std::abs(InverseTransformValue(5.521460917) - 2.5) / 2.5, 1e-9);
  const TargetVector back =
      InverseTransformTarget({{0.0, 4.605170186}, TargetScale::kTransformedLog});
  EXPECT_EQ(back.scale, TargetScale::kOriginal);
  EXPECT_NEAR(back.values[0], 0.01, 1e-9);
  EXPECT_NEAR(back.values[1], 1.0, 1e-9);
}

TEST(Transform, ScaleMarkers) {
  const TargetVector y{{1.0, 2.0}, TargetScale::kOriginal};
  const TargetVector z = TransformTarget(y);
  EXPECT_EQ(z.scale, TargetScale::kTransformedLog);
  EXPECT_EQ(CodeOf([&] { TransformTarget(z); }), ErrorCode::kAlreadyTransformed);
  EXPECT_EQ(CodeOf([&] { InverseTransformTarget(y); }),
            ErrorCode::kAlreadyOriginal);
  EXPECT_EQ(CodeOf([] {
              TransformTarget({{1.0, -2.0}, TargetScale::kOriginal});
            }),
            ErrorCode::kNonPositiveTarget);
}

TEST(Transform, RoundTripProperty) {
  Rng rng(7);
  TargetVector y;
  for (int i = 0; i < 10000; ++i) {
    y.values.push_back(std::pow(10.0, rng.Uniform(-4.0, 4.0)));
  }
  const TargetVector back = InverseTransformTarget(TransformTarget(y));
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    EXPECT_LE(std::abs(back.values[i] - y.values[i]) / y.values[i], 1e-12);
  }
}

TEST(StratifiedSplit, EqualClasses) {
  const Dataset ds = ClassSizes(100, 100);
  const SplitIndices split = StratifiedSplit(ds, 0.15, 3);
  EXPECT_EQ(TestCount(ds, split, "Cropland"), 15u);
  EXPECT_EQ(TestCount(ds, split, "Grassland"), 15u);
}

TEST(StratifiedSplit, FullSizeClassCounts) {
  const Dataset ds = ClassSizes(13937, 7307);
  const SplitIndices split = StratifiedSplit(ds, 0.15, 0);
  // 13937 * 0.15 = 2090.55 and 7307 * 0.15 = 1096.05.
  EXPECT_EQ(TestCount(ds, split, "Cropland"), 2091u);
  EXPECT_EQ(TestCount(ds, split, "Grassland"), 1096u);
}

TEST(StratifiedSplit, Deterministic) {
  const Dataset ds = ClassSizes(37, 23);
  const SplitIndices a = StratifiedSplit(ds, 0.2, 11);
  const SplitIndices b = StratifiedSplit(ds, 0.2, 11);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.seed, 11u);
  EXPECT_NE(StratifiedSplit(ds, 0.2, 12).test, a.test);
}

TEST(StratifiedSplit, HalfRoundsToEven) {
  // 10 * 0.25 = 2.5 rounds to 2; 14 * 0.25 = 3.5 rounds to 4.
  const Dataset ds = ClassSizes(10, 14);
  const SplitIndices split = StratifiedSplit(ds, 0.25, 1);
  EXPECT_EQ(TestCount(ds, split, "Cropland"), 2u);
  EXPECT_EQ(TestCount(ds, split, "Grassland"), 4u);
}

TEST(StratifiedSplit, NeitherSideEmpty) {
  const Dataset ds = ClassSizes(2, 3);
  const SplitIndices tiny = StratifiedSplit(ds, 0.01, 1);
  EXPECT_EQ(TestCount(ds, tiny, "Cropland"), 1u);
  EXPECT_EQ(TestCount(ds, tiny, "Grassland"), 1u);
  const SplitIndices huge = StratifiedSplit(ds, 0.99, 1);
  EXPECT_EQ(huge.train.size(), 2u);
}

TEST(StratifiedSplit, Errors) {
  const Dataset ds = ClassSizes(1, 5);
  EXPECT_EQ(CodeOf([&] { StratifiedSplit(ds, 0.15, 0); }),
            ErrorCode::kClassTooSmall);
  const Dataset ok = ClassSizes(5, 5);
  EXPECT_EQ(CodeOf([&] { StratifiedSplit(ok, 0.0, 0); }),
            ErrorCode::kInvalidFraction);
  EXPECT_EQ(CodeOf([&] { StratifiedSplit(ok, 1.0, 0); }),
            ErrorCode::kInvalidFraction);
}

TEST(StratifiedSplit, PartitionProperty) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_classes = 1 + rng.UniformInt(4);
    std::vector<std::string> lc;
    for (std::size_t c = 0; c < n_classes; ++c) {
      lc.insert(lc.end(), 2 + rng.UniformInt(60), "c" + std::to_string(c));
    }
    Rng order(trial);
    order.Shuffle(std::span<std::string>(lc));
    const std::size_t n = lc.size();
    const Dataset ds = testing::MakeDataset(
        {"x"}, std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), lc,
        TargetScale::kOriginal);
    const double f = rng.Uniform(0.05, 0.5);
    const SplitIndices split = StratifiedSplit(ds, f, trial);
    std::vector<std::size_t> all(split.train);
    all.insert(all.end(), split.test.begin(), split.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(n);
    std::iota(expect.begin(), expect.end(), 0u);
    ASSERT_EQ(all, expect);
    std::map<std::string, std::pair<double, double>> counts;
    for (const auto r : split.test) counts[lc[r]].first += 1;
    for (std::size_t r = 0; r < n; ++r) counts[lc[r]].second += 1;
    for (const auto& [name, c] : counts) {
      EXPECT_LE(std::abs(c.first / c.second - f), 1.0 / c.second) << name;
    }
  }
}

void ExpectBalanced(const TargetVector& y, const FoldAssignment& folds) {
  const int k = folds.k;
  std::vector<int> sizes(k, 0);
  for (const int f : folds.fold_of_row) {
    ASSERT_GE(f, 0);
    ASSERT_LT(f, k);
    ++sizes[f];
  }
  EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) -
                *std::min_element(sizes.begin(), sizes.end()),
            1);
  // Recompute the quantile bins independently from ranks.
  const std::size_t n = y.values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return y.values[a] < y.values[b];
  });
  std::vector<std::vector<int>> per_bin(folds.n_bins, std::vector<int>(k, 0));
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t bin = rank * folds.n_bins / n;
    ++per_bin[bin][folds.fold_of_row[order[rank]]];
  }
  for (const auto& bin : per_bin) {
    EXPECT_LE(*std::max_element(bin.begin(), bin.end()) -
                  *std::min_element(bin.begin(), bin.end()),
              1);
  }
}

TEST(StratifiedKFold, EqualValues) {
  const TargetVector y{std::vector<double>(10, 3.0),
                       TargetScale::kTransformedLog};
  const FoldAssignment folds = StratifiedKFold(y, 5, 1, 0);
  for (int f = 0; f < 5; ++f) EXPECT_EQ(folds.RowsInFold(f).size(), 2u);
}

TEST(StratifiedKFold, TwoRowsPerDecilePerFold) {
  TargetVector y;
  for (int i = 0; i < 100; ++i) y.values.push_back(i);
  const FoldAssignment folds = StratifiedKFold(y, 5, 10, 9);
  for (int decile = 0; decile < 10; ++decile) {
    std::vector<int> count(5, 0);
    for (int i = decile * 10; i < decile * 10 + 10; ++i) {
      ++count[folds.fold_of_row[i]];
    }
    for (int f = 0; f < 5; ++f) EXPECT_EQ(count[f], 2) << decile << " " << f;
  }
}

TEST(StratifiedKFold, DeterministicAndHashed) {
  TargetVector y;
  Rng rng(5);
  for (int i = 0; i < 77; ++i) y.values.push_back(rng.Normal());
  const FoldAssignment a = StratifiedKFold(y, 5, 10, 4);
  const FoldAssignment b = StratifiedKFold(y, 5, 10, 4);
  EXPECT_EQ(a.fold_of_row, b.fold_of_row);
  EXPECT_EQ(a.Hash(), b.Hash());
  const FoldAssignment c = StratifiedKFold(y, 5, 10, 5);
  EXPECT_NE(a.fold_of_row, c.fold_of_row);
  EXPECT_NE(a.Hash(), c.Hash());
}

TEST(StratifiedKFold, BalanceProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    TargetVector y;
    const std::size_t n = 2 + rng.UniformInt(400);
    for (std::size_t i = 0; i < n; ++i) {
      y.values.push_back(std::floor(rng.Uniform(0.0, 30.0)));
    }
    const int k = 2 + static_cast<int>(rng.UniformInt(6));
    const int bins = 1 + static_cast<int>(rng.UniformInt(12));
    ExpectBalanced(y, StratifiedKFold(y, k, bins, trial));
  }
}

TEST(StratifiedKFold, FoldRowsPartition) {
  TargetVector y;
  for (int i = 0; i < 23; ++i) y.values.push_back(i % 7);
  const FoldAssignment folds = StratifiedKFold(y, 4, 3, 1);
  std::set<std::size_t> seen;
  for (int f = 0; f < 4; ++f) {
    const auto in = folds.RowsInFold(f);
    const auto out = folds.RowsOutsideFold(f);
    EXPECT_EQ(in.size() + out.size(), 23u);
    seen.insert(in.begin(), in.end());
  }
  EXPECT_EQ(seen.size(), 23u);
}

TEST(StratifiedKFold, InvalidK) {
  const TargetVector y{{1, 2, 3}, TargetScale::kTransformedLog};
  EXPECT_EQ(CodeOf([&] { StratifiedKFold(y, 1, 1, 0); }), ErrorCode::kInvalidK);
}

TEST(Json, SplitAndFoldsRoundTrip) {
  const Dataset ds = ClassSizes(9, 12);
  const SplitIndices split = StratifiedSplit(ds, 0.3, 17);
  const SplitIndices back = SplitFromJson(SplitToJson(split));
  EXPECT_EQ(back.train, split.train);
  EXPECT_EQ(back.test, split.test);
  EXPECT_EQ(back.seed, split.seed);

  TargetVector y;
  for (int i = 0; i < 30; ++i) y.values.push_back(i * 0.5);
  const FoldAssignment folds = StratifiedKFold(y, 3, 4, 8);
  const FoldAssignment fb = FoldsFromJson(FoldsToJson(folds));
  EXPECT_EQ(fb.fold_of_row, folds.fold_of_row);
  EXPECT_EQ(fb.k, 3);
  EXPECT_EQ(fb.n_bins, 4);
  EXPECT_EQ(fb.seed, 8u);
  EXPECT_EQ(CodeOf([] { SplitFromJson("{not json"); }), ErrorCode::kParseError);
}

TEST(FeatureTable, Invariants) {
  EXPECT_EQ(CodeOf([] { FeatureTable({"a", "a"}, 1, {1.0, 2.0}, {}); }),
            ErrorCode::kDimensionMismatch);
  EXPECT_EQ(CodeOf([] { FeatureTable({"a"}, 2, {1.0}, {}); }),
            ErrorCode::kDimensionMismatch);
  const FeatureTable t({"a", "b"}, 2, {1, 2, 3, 4}, {});
  const std::vector<std::string> pick{"b"};
  const FeatureTable s = t.SelectColumns(pick);
  EXPECT_EQ(s.value(1, 0), 4.0);
  const std::vector<std::string> absent{"z"};
  EXPECT_EQ(CodeOf([&] { t.SelectColumns(absent); }), ErrorCode::kMissingFeature);
}

}  // namespace
}  // namespace soiln
