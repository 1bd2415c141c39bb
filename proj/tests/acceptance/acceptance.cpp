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

// Acceptance suite. Prints one PASS/FAIL line per criterion; exits nonzero if
// any selected criterion fails.

#include <fmt/format.h>
#include <sys/wait.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <json.hpp>
#include <map>
#include <numeric>
#include <sstream>

#include "gbdt_oracle.hpp"
#include "shap_oracle.hpp"
#include "soiln/metrics.hpp"
#include "soiln/persist.hpp"
#include "soiln/pipeline.hpp"
#include "soiln/random.hpp"
#include "soiln/shap.hpp"
#include "soiln/synth.hpp"
#include "soiln/trees.hpp"
#include "soiln/tuner.hpp"
#include "test_util.hpp"

namespace soiln {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;
using Clock = std::chrono::steady_clock;

// Failed checks are collected with a message; a criterion passes when none
// failed.
class Checks {
 public:
  void Expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok && failures_.size() < 8) failures_.push_back(what);
    failed_ += !ok;
  }
  void Note(std::string text) { notes_.push_back(std::move(text)); }
  bool ok() const { return failed_ == 0; }
  std::string Summary() const {
    std::string out;
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    if (failed_ > 0) {
      out += fmt::format("{}{} of {} checks failed", out.empty() ? "" : "; ", failed_, total_);
      for (const auto& f : failures_) out += "\n    " + f;
    }
    return out;
  }

 private:
  std::size_t total_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

int RunCli(const std::string& args) {
  const std::string cmd = std::string(SOILN_CLI_PATH) + " -q " + args;
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Dataset Transformed(const SynthSpec& spec) {
  Dataset ds = Generate(spec);
  ds.target = TransformTarget(ds.target);
  return ds;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (const char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

// 1. Comparison grid on the full-size synth dataset.
void ComparisonGrid(Checks& c) {
  testing::TempDir dir;
  const fs::path data = dir / "synth.csv";
  c.Expect(RunCli("synth --out " + data.string()) == 0, "synth command");
  const auto start = Clock::now();
  const int status = RunCli("compare --dataset " + data.string() + " --workdir " +
                            (dir / "work").string() + " --n-trials 3 --n-startup 2 --seed 1");
  const double secs = Seconds(start);
  c.Expect(status == 0, "compare command exit status");
  c.Expect(secs < 15 * 60, fmt::format("compare took {:.0f} s", secs));
  c.Note(fmt::format("compare on 21244 rows in {:.0f} s", secs));
  if (status != 0) return;

  std::istringstream in(testing::ReadFile(dir / "work" / "compare.csv"));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(SplitCsvLine(line));
  c.Expect(rows.size() == 7, fmt::format("{} lines, want header + 6", rows.size()));
  if (rows.size() != 7) return;
  const std::vector<std::string> header{"method",    "mape_total", "mape_crop",
                                        "mape_grass", "mae_total", "mae_crop",
                                        "mae_grass",  "features",  "parameters"};
  c.Expect(rows[0] == header, "header");
  for (std::size_t i = 1; i < 7; ++i) {
    const auto& r = rows[i];
    c.Expect(r.size() == header.size(), fmt::format("row {} width", i));
    if (r.size() != header.size()) continue;
    c.Expect(r[0] == (i <= 3 ? "GBDT" : "ExtraTrees"), "method of row " + std::to_string(i));
    const int regime = static_cast<int>((i - 1) % 3);
    c.Expect(r[7] == (regime == 0 ? "84" : "50"), "feature count of row " + std::to_string(i));
    c.Expect(r[8].rfind(regime == 2 ? "optimized" : "default", 0) == 0,
             "parameters of row " + std::to_string(i));
    for (std::size_t k = 1; k <= 6; ++k) {
      const double v = std::strtod(r[k].c_str(), nullptr);
      c.Expect(std::isfinite(v) && v > 0.0, fmt::format("row {} column {} = {}", i, k, r[k]));
    }
  }
}

// Random data in [0, 20) with missing cells and a nonlinear response. Coarse
// data holds integers below 6, so rows tie and bins repeat.
Dataset RandomRegression(Rng& rng, std::size_t n, std::size_t d, bool coarse = false) {
  std::vector<std::string> names;
  for (std::size_t f = 0; f < d; ++f) names.push_back("f" + std::to_string(f));
  std::vector<double> x(n * d);
  std::vector<std::uint8_t> miss(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.Uniform01() < 0.05) {
      miss[i] = 1;
      x[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      x[i] = coarse ? std::floor(rng.Uniform(0.0, 6.0)) : rng.Uniform(0.0, 20.0);
    }
  }
  Dataset ds;
  ds.features = FeatureTable(names, n, x, miss);
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.3 * rng.Normal();
    for (std::size_t f = 0; f < d; ++f) {
      const double v = x[i * d + f];
      if (!std::isnan(v)) y += std::sin(v * static_cast<double>(f + 1) * 0.37);
    }
    ds.target.values.push_back(y);
    ds.landcover.emplace_back("A");
  }
  ds.target.scale = TargetScale::kTransformedLog;
  return ds;
}

// 2. TreeSHAP against the exhaustive Shapley oracle.
void ShapExactness(Checks& c) {
  const auto start = Clock::now();
  Rng rng(20260);
  double worst = 0.0;
  std::size_t max_features = 0;
  for (int e = 0; e < 20; ++e) {
    const Dataset ds = RandomRegression(rng, 300, 12);
    GbdtParams p;
    p.n_trees = 1 + static_cast<int>(rng.UniformInt(50));
    p.max_depth = 1 + static_cast<int>(rng.UniformInt(4));
    p.learning_rate = rng.Uniform(0.05, 0.5);
    p.subsample_cols = rng.Uniform(0.5, 1.0);
    p.seed = rng.NextU64();
    const Ensemble m = FitGbdt(ds, p);
    max_features = std::max(max_features, testing::SplitFeatures(m).size());
    std::vector<std::size_t> rows(50);
    for (auto& r : rows) r = rng.UniformInt(ds.n_rows());
    const FeatureTable ft = ds.features.SelectRows(rows);
    const ShapMatrix s = TreeShap(m, ft);
    const std::vector<double> x = GatherFeatures(m, ft);
    const std::size_t cols = m.feature_names.size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto oracle =
          testing::BruteForceShap(m, std::span<const double>(x.data() + r * cols, cols));
      worst = std::max(worst, std::abs(s.base_value - oracle.base_value));
      for (std::size_t j = 0; j < cols; ++j) {
        worst = std::max(worst, std::abs(s.at(r, j) - oracle.phi[j]));
      }
    }
  }
  const double secs = Seconds(start);
  c.Expect(max_features <= 12, "split features per ensemble");
  c.Expect(worst <= 1e-9, fmt::format("max |phi - oracle| = {:.3g}", worst));
  c.Expect(secs < 60, fmt::format("took {:.1f} s", secs));
  c.Note(fmt::format("max |phi - oracle| {:.2g} over 20 x 50 rows, {:.1f} s", worst, secs));
}

// 3. Local accuracy on a default GBDT fitted to the default synth data.
void ShapLocalAccuracy(Checks& c) {
  const Dataset ds = Transformed(SynthSpec());
  const Ensemble m = FitGbdt(ds, GbdtParams());
  Rng rng(3);
  std::vector<std::size_t> rows(200);
  for (auto& r : rows) r = rng.UniformInt(ds.n_rows());
  const FeatureTable ft = ds.features.SelectRows(rows);
  const ShapMatrix s = TreeShap(m, ft);
  const std::vector<double> pred = Predict(m, ft);
  double worst = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double total = s.base_value;
    for (std::size_t j = 0; j < s.n_features(); ++j) total += s.at(r, j);
    worst = std::max(worst, std::abs(total - pred[r]));
  }
  c.Expect(worst <= 1e-9, fmt::format("max |base + sum phi - f(x)| = {:.3g}", worst));
  c.Note(fmt::format("max gap {:.2g} over 200 rows", worst));
}

// 4. GBDT training against direct summation.
void GbdtCorrectness(Checks& c) {
  SynthSpec spec;
  spec.n_rows = 5000;
  const Dataset ds = Transformed(spec);
  GbdtParams p;
  p.n_trees = 300;
  std::vector<double> rmse;
  TrainGbdt(BinFeatures(ds.features, p.n_bins), ds.target, p,
            [&](int, std::span<const double> pred) {
              rmse.push_back(Rmse(ds.target.values, pred));
            });
  c.Expect(rmse.size() == 300, "300 rounds observed");
  std::size_t increases = 0;
  for (std::size_t t = 1; t < rmse.size(); ++t) increases += rmse[t] > rmse[t - 1];
  c.Expect(increases == 0, fmt::format("{} rounds raised training RMSE", increases));
  c.Note(fmt::format("(a) RMSE {:.4f} -> {:.4f}", rmse.front(), rmse.back()));

  Rng rng(77);
  testing::RawSumReport all;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.UniformInt(19);
    const std::size_t d = 1 + rng.UniformInt(4);
    const Dataset small = RandomRegression(rng, n, d, true);
    GbdtParams q;
    q.n_trees = 4;
    q.max_depth = 4;
    q.learning_rate = rng.Uniform(0.1, 1.0);
    q.l2_lambda = rng.Uniform(0.0, 3.0);
    q.min_child_weight = trial % 2 == 0 ? 0.0 : rng.Uniform(0.0, 3.0);
    const auto r = testing::CheckAgainstRawSums(small, q);
    all.splits += r.splits;
    all.cover_mismatches += r.cover_mismatches;
    all.invalid_splits += r.invalid_splits;
    all.off_edge += r.off_edge;
    all.suboptimal += r.suboptimal;
    all.max_gain_error = std::max(all.max_gain_error, r.max_gain_error);
  }
  c.Expect(all.splits > 0, "no splits to check");
  c.Expect(all.max_gain_error <= 1e-10, fmt::format("max gain error {:.3g}", all.max_gain_error));
  c.Expect(all.cover_mismatches + all.invalid_splits + all.off_edge + all.suboptimal == 0,
           fmt::format("cover {} invalid {} off-edge {} suboptimal {}", all.cover_mismatches,
                       all.invalid_splits, all.off_edge, all.suboptimal));
  c.Note(fmt::format("(b) {} splits, max gain error {:.2g}", all.splits, all.max_gain_error));

  double leaf_error = 0.0;
  std::size_t leaves = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset small =
        RandomRegression(rng, 2 + rng.UniformInt(40), 1 + rng.UniformInt(4), true);
    GbdtParams q;
    q.n_trees = 5;
    q.max_depth = 3;
    q.l2_lambda = 0.0;
    const auto r = testing::CheckAgainstRawSums(small, q);
    leaf_error = std::max(leaf_error, r.max_leaf_error);
    leaves += r.nodes - r.splits;
  }
  c.Expect(leaf_error <= 1e-12, fmt::format("lambda=0 leaf error {:.3g}", leaf_error));
  c.Note(fmt::format("(c) {} leaves, max error {:.2g}", leaves, leaf_error));
}

// 5. End-to-end recovery on the default synth spec.
void SignalRecovery(Checks& c) {
  const SynthSpec spec;
  const Dataset ds = Transformed(spec);
  PipelineConfig cfg;
  cfg.tuner.n_trials = 4;
  cfg.tuner.n_startup = 2;
  cfg.seed = 11;
  const auto start = Clock::now();
  const PipelineResult r = RunPipeline(ds, cfg);
  const double secs = Seconds(start);

  const Dataset test = ds.SelectRows(r.split.test);
  const double r2 = R2(test.target.values, r.test_predictions);
  const double ceiling = OracleR2Ceiling(spec);
  const std::vector<double> latent = NoiselessLatent(spec, test);
  std::vector<double> oracle(latent.size());
  for (std::size_t i = 0; i < latent.size(); ++i) oracle[i] = InverseTransformValue(latent[i]);
  const double oracle_mape =
      Mape(InverseTransformTarget(test.target).values, oracle);
  const double mape = r.report.overall.mape_percent;
  c.Expect(r2 >= ceiling - 0.10, fmt::format("log-scale R2 {:.4f} < ceiling {:.4f} - 0.10", r2, ceiling));
  c.Expect(mape <= 1.25 * oracle_mape,
           fmt::format("MAPE {:.3f} > 1.25 x oracle {:.3f}", mape, oracle_mape));
  c.Expect(secs < 5 * 60, fmt::format("pipeline took {:.0f} s", secs));
  c.Note(fmt::format("R2 {:.4f} (ceiling {:.4f}), MAPE {:.3f}% (oracle {:.3f}%), {:.0f} s", r2,
                     ceiling, mape, oracle_mape, secs));

  const std::vector<std::string> informative = InformativeFeatureNames(spec);
  int complete = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthSpec s = spec;
    s.seed = 1000 + seed;
    const Dataset d = Transformed(s);
    const SplitIndices split = StratifiedSplit(d, cfg.test_fraction, seed);
    const auto top = SelectTopK(SelectionRanking(d.SelectRows(split.train), seed), 50);
    complete += std::all_of(informative.begin(), informative.end(), [&](const auto& name) {
      return std::find(top.begin(), top.end(), name) != top.end();
    });
  }
  c.Expect(complete >= 19, fmt::format("all informative features selected in {}/20", complete));
  c.Note(fmt::format("informative features all in top 50 in {}/20 runs", complete));
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 6. TPE against seeded random search, and on a 1-dim unimodal problem.
void TunerEfficacy(Checks& c) {
  const auto start = Clock::now();
  SynthSpec spec;
  spec.n_rows = 240;
  spec.n_noise = 10;
  spec.seed = 6;
  const Dataset ds = Transformed(spec);

  std::vector<double> tpe, random;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TunerConfig cfg;
    cfg.n_trials = 40;
    cfg.k_folds = 3;
    cfg.seed = seed;
    tpe.push_back(TuneGbdt(ds, DefaultGbdtSpace(), cfg).best_score);
    cfg.n_startup = cfg.n_trials;
    random.push_back(TuneGbdt(ds, DefaultGbdtSpace(), cfg).best_score);
  }
  const double tpe_median = Median(tpe), random_median = Median(random);
  c.Expect(tpe_median <= random_median,
           fmt::format("median TPE {:.5f} > random {:.5f}", tpe_median, random_median));
  c.Note(fmt::format("median best CV-RMSE TPE {:.5f} vs random {:.5f}", tpe_median,
                     random_median));

  GbdtParams base;
  base.n_trees = 100;
  base.max_depth = 3;
  ParamSpace space;
  space.dims = {ParamDim::Continuous("learning_rate", 0.01, 0.3, true)};
  const FoldAssignment folds = StratifiedKFold(ds.target, 3, 10, 0);
  const FoldTrainer trainer = GbdtFoldTrainer(ds, base);
  std::vector<double> grid;
  for (int i = 0; i < 200; ++i) {
    const double lr = 0.01 * std::pow(30.0, i / 199.0);
    grid.push_back(CrossValidate(ds.target, folds, {{"learning_rate", lr}}, trainer).score);
  }
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  const double decile = sorted[19];
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TunerConfig cfg;
    cfg.n_trials = 40;
    cfg.seed = seed;
    hits += Tune(ds.target, folds, space, cfg, trainer).best_score <= decile;
  }
  const double secs = Seconds(start);
  c.Expect(hits >= 16, fmt::format("1-dim best in grid top decile in {}/20", hits));
  c.Expect(secs < 20 * 60, fmt::format("took {:.0f} s", secs));
  c.Note(fmt::format("1-dim top decile in {}/20 seeds, {:.0f} s", hits, secs));
}

// 7. Split, fold and transform contracts.
void DataContracts(Checks& c) {
  Rng rng(7007);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_classes = 1 + rng.UniformInt(5);
    std::vector<std::string> lc;
    for (std::size_t k = 0; k < n_classes; ++k) {
      lc.insert(lc.end(), 2 + rng.UniformInt(300), "c" + std::to_string(k));
    }
    rng.Shuffle(std::span<std::string>(lc));
    const std::size_t n = lc.size();
    const Dataset ds = testing::MakeDataset({"x"}, std::vector<double>(n, 0.0),
                                            std::vector<double>(n, 1.0), lc,
                                            TargetScale::kOriginal);
    const SplitIndices split = StratifiedSplit(ds, 0.15, static_cast<std::uint64_t>(trial));
    std::map<std::string, std::pair<double, double>> counts;
    for (const auto r : split.test) counts[lc[r]].first += 1;
    for (const auto& name : lc) counts[name].second += 1;
    c.Expect(split.train.size() + split.test.size() == n, "split covers rows");
    for (const auto& [name, k] : counts) {
      c.Expect(std::abs(k.first / k.second - 0.15) <= 1.0 / k.second,
               fmt::format("trial {} class {}: {}/{}", trial, name, k.first, k.second));
    }
  }

  for (int trial = 0; trial < 300; ++trial) {
    TargetVector y{{}, TargetScale::kTransformedLog};
    const std::size_t n = 10 + rng.UniformInt(2000);
    for (std::size_t i = 0; i < n; ++i) y.values.push_back(std::floor(rng.Uniform(0.0, 50.0)));
    const int k = 2 + static_cast<int>(rng.UniformInt(9));
    const int bins = 1 + static_cast<int>(rng.UniformInt(12));
    const FoldAssignment folds = StratifiedKFold(y, k, bins, static_cast<std::uint64_t>(trial));
    std::vector<int> sizes(k, 0);
    for (const int f : folds.fold_of_row) ++sizes[f];
    c.Expect(*std::max_element(sizes.begin(), sizes.end()) -
                     *std::min_element(sizes.begin(), sizes.end()) <=
                 1,
             fmt::format("trial {} global fold sizes", trial));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return y.values[a] < y.values[b]; });
    std::vector<std::vector<int>> per_bin(bins, std::vector<int>(k, 0));
    for (std::size_t rank = 0; rank < n; ++rank) {
      ++per_bin[rank * bins / n][folds.fold_of_row[order[rank]]];
    }
    for (const auto& b : per_bin) {
      c.Expect(*std::max_element(b.begin(), b.end()) - *std::min_element(b.begin(), b.end()) <= 1,
               fmt::format("trial {} per-bin fold sizes", trial));
    }
  }

  TargetVector y{{}, TargetScale::kOriginal};
  for (int i = 0; i < 10000; ++i) y.values.push_back(std::pow(10.0, rng.Uniform(-4.0, 4.0)));
  const TargetVector back = InverseTransformTarget(TransformTarget(y));
  double worst = 0.0;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    worst = std::max(worst, std::abs(back.values[i] - y.values[i]) / y.values[i]);
  }
  c.Expect(worst <= 1e-12, fmt::format("round-trip relative error {:.3g}", worst));
  c.Note(fmt::format("1000 splits, 300 fold assignments, round-trip error {:.2g}", worst));
}

// 8. Metric examples and identities.
void MetricOracles(Checks& c) {
  using V = std::vector<double>;
  c.Expect(Rmse(V{1.5, -2}, V{1.5, -2}) == 0.0, "rmse perfect");
  c.Expect(Rmse(V{0, 0}, V{3, 4}) == std::sqrt(12.5), "rmse [0,0] [3,4]");
  c.Expect(Rmse(V{1}, V{0}) == 1.0, "rmse [1] [0]");
  c.Expect(Mae(V{1.5, -2}, V{1.5, -2}) == 0.0, "mae perfect");
  c.Expect(Mae(V{1, 3}, V{2, 5}) == 1.5, "mae [1,3] [2,5]");
  c.Expect(Mae(V{0, 0}, V{3, 4}) == 3.5, "mae [0,0] [3,4]");
  c.Expect(Mape(V{0.5, 2}, V{0.5, 2}) == 0.0, "mape perfect");
  c.Expect(Mape(V{2}, V{1}) == 50.0, "mape [2] [1]");
  // 1.1 and 1.8 are not representable; the correctly rounded result of the
  // stored inputs lies 2 ulps above 10.
  const double m = Mape(V{1, 2}, V{1.1, 1.8});
  c.Expect(std::abs(m - 10.0) <= 4 * (std::nextafter(10.0, 11.0) - 10.0),
           fmt::format("mape [1,2] [1.1,1.8] = {:.17g}", m));

  Rng rng(88);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t n = 1 + rng.UniformInt(30);
    V y(n), yhat(n);
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = rng.Uniform(-50, 50);
      yhat[j] = rng.Uniform(-50, 50);
    }
    c.Expect(Rmse(y, yhat) * (1 + 1e-15) >= Mae(y, yhat), "rmse >= mae");
  }

  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.UniformInt(200);
    TargetVector y{{}, TargetScale::kOriginal};
    std::vector<double> z;
    std::vector<Landcover> labels;
    for (std::size_t i = 0; i < n; ++i) {
      y.values.push_back(rng.Uniform(0.1, 5.0));
      z.push_back(std::log(100.0 * rng.Uniform(0.1, 5.0)));
      labels.emplace_back(i < 2 ? (i ? "B" : "A") : (rng.Uniform01() < 0.6 ? "A" : "B"));
    }
    const EvalReport r = Evaluate(y, z, labels);
    double weighted = 0.0;
    for (const auto& [name, set] : r.per_class) weighted += set.mae * static_cast<double>(set.n);
    worst = std::max(worst, std::abs(weighted / static_cast<double>(r.n_total) - r.overall.mae));
  }
  c.Expect(worst <= 1e-12, fmt::format("weighted per-class MAE gap {:.3g}", worst));
  c.Note(fmt::format("weighted MAE gap {:.2g}; mape example {:.17g}", worst, m));
}

bool BitEqual(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// 9. Persistence round-trips and corrupted files.
void Persistence(Checks& c) {
  SynthSpec spec;
  spec.n_rows = 4000;
  spec.missing_rate = 0.03;
  const Dataset train = Transformed(spec);
  spec.seed = 99;
  spec.n_rows = 1000;
  const FeatureTable probe = Generate(spec).features;

  GbdtParams gp;
  gp.n_trees = 200;
  const Ensemble gbdt = FitGbdt(train, gp);
  ExtraTreesParams ep;
  ep.n_trees = 30;
  const Ensemble et = TrainExtraTrees(train, ep);
  testing::TempDir dir;
  for (const Ensemble* m : {&gbdt, &et}) {
    SaveModel(*m, dir / "model.json");
    const Ensemble back = LoadModel(dir / "model.json");
    c.Expect(BitEqual(Predict(*m, probe), Predict(back, probe)),
             m == &gbdt ? "gbdt round-trip" : "extratrees round-trip");
  }

  GbdtParams small;
  small.n_trees = 3;
  small.max_depth = 3;
  const Json doc = Json::parse(ModelToJson(FitGbdt(train, small)));
  auto node_of = [](Json& d, const char* kind) -> Json& {
    for (auto& n : d["trees"][0]["nodes"]) {
      if (n["kind"] == kind) return n;
    }
    throw std::logic_error("no node");
  };
  struct Case {
    const char* name;
    std::function<std::string()> text;
    ErrorCode want;
  };
  const std::vector<Case> cases = {
      {"bad child index",
       [&] {
         Json d = doc;
         node_of(d, "split")["left"] = 100000;
         return d.dump();
       },
       ErrorCode::kCorruptModel},
      {"non-finite leaf",
       [&] {
         Json d = doc;
         node_of(d, "leaf")["value"] = 0.0;
         std::string t = d.dump();
         const auto at = t.find("\"value\":0.0");
         return t.replace(at, 11, "\"value\":1e999");
       },
       ErrorCode::kCorruptModel},
      {"unknown version",
       [&] {
         Json d = doc;
         d["format_version"] = 99;
         return d.dump();
       },
       ErrorCode::kUnsupportedVersion},
      {"truncation", [&] { const std::string t = doc.dump(); return t.substr(0, t.size() / 2); },
       ErrorCode::kCorruptModel},
      {"wrong feature name",
       [&] {
         Json d = doc;
         node_of(d, "split")["feature"] = "no_such_feature";
         return d.dump();
       },
       ErrorCode::kCorruptModel},
  };
  for (const auto& k : cases) {
    const std::string text = k.text();
    const ErrorCode got = testing::CodeOf([&] { ModelFromJson(text); });
    c.Expect(got == k.want, fmt::format("{}: got {}", k.name, ErrorCodeName(got)));
  }
  c.Note("both modes bit-exact on 1000 rows; 5 mutation classes rejected");
}

// 10. Two pipeline runs through the CLI give identical artifacts.
void Determinism(Checks& c) {
  testing::TempDir dir;
  const fs::path data = dir / "synth.csv";
  c.Expect(RunCli("synth --out " + data.string() + " --rows 2000 --seed 8") == 0, "synth");
  const std::string flags = " --dataset " + data.string() +
                            " --n-trials 3 --n-startup 2 --seed 4 --workdir ";
  c.Expect(RunCli("run" + flags + (dir / "a").string()) == 0, "first run");
  c.Expect(RunCli("run" + flags + (dir / "b").string()) == 0, "second run");
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("manifest", 0) == 0) continue;
    c.Expect(fs::exists(dir / "b" / name) &&
                 testing::ReadFile(entry.path()) == testing::ReadFile(dir / "b" / name),
             name + " differs");
    ++compared;
  }
  c.Expect(compared >= 8, fmt::format("only {} artifacts", compared));
  const Json ma = Json::parse(testing::ReadFile(dir / "a" / "manifest-run.json"));
  const Json mb = Json::parse(testing::ReadFile(dir / "b" / "manifest-run.json"));
  c.Expect(ma["outputs"] == mb["outputs"], "manifest output hashes differ");
  c.Note(fmt::format("{} artifacts byte-identical", compared));
}

struct Criterion {
  int id;
  const char* title;
  void (*run)(Checks&);
};

constexpr Criterion kCriteria[] = {
    {1, "comparison grid", ComparisonGrid},
    {2, "TreeSHAP exactness", ShapExactness},
    {3, "SHAP local accuracy", ShapLocalAccuracy},
    {4, "GBDT correctness", GbdtCorrectness},
    {5, "end-to-end signal recovery", SignalRecovery},
    {6, "tuner efficacy", TunerEfficacy},
    {7, "data contracts", DataContracts},
    {8, "metric oracles", MetricOracles},
    {9, "persistence", Persistence},
    {10, "determinism", Determinism},
};

}  // namespace
}  // namespace soiln

int main(int argc, char** argv) {
  CLI::App app{"soiln acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const auto& crit : soiln::kCriteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), crit.id) == only.end()) continue;
    const auto start = soiln::Clock::now();
    soiln::Checks checks;
    try {
      crit.run(checks);
    } catch (const std::exception& e) {
      checks.Expect(false, std::string("threw: ") + e.what());
    }
    all_pass = all_pass && checks.ok();
    fmt::print("criterion {:>2} {} {} [{:.1f} s]: {}\n", crit.id, checks.ok() ? "PASS" : "FAIL",
               crit.title, soiln::Seconds(start), checks.Summary());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
