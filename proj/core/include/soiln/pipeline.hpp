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

// The end-to-end workflow (split, SHAP selection, tuning, final fit,
// evaluation) and the on-disk plumbing the command-line tool shares:
// configuration files, staged artifact writes, manifests and workdir locks.

#ifndef SOILN_PIPELINE_HPP_
#define SOILN_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "soiln/data.hpp"
#include "soiln/metrics.hpp"
#include "soiln/shap.hpp"
#include "soiln/trees.hpp"
#include "soiln/tuner.hpp"

namespace soiln {

inline constexpr std::string_view kVersion = "0.1.0";

struct PipelineConfig {
  std::filesystem::path dataset;
  std::filesystem::path workdir = "soiln-work";
  // Extra copy of the trained model; the workdir always holds model.json.
  std::filesystem::path model;
  CsvColumns columns;
  double test_fraction = 0.15;
  int k_folds = 5;
  int top_k_features = 50;
  int cv_strata = 10;
  // k_folds, n_strata and seed are taken from the fields above.
  TunerConfig tuner;
  std::uint64_t seed = 0;
  // Restricts every stage to one landcover class.
  std::optional<std::string> landcover;

  void Validate() const;
  TunerConfig EffectiveTuner() const;
};

std::string PipelineConfigToJson(const PipelineConfig& cfg);
// Fields absent from `text` keep their values from `base`. Unknown keys are
// rejected with InvalidParams.
PipelineConfig PipelineConfigFromJson(std::string_view text,
                                      const PipelineConfig& base);

// Loads cfg.dataset, applies the landcover filter and log-transforms the
// target.
Dataset LoadPipelineDataset(const PipelineConfig& cfg);
Dataset FilterLandcover(const Dataset& ds, const std::string& landcover);

// Default-parameter GBDT on `train`, then mean |SHAP| over the same rows.
FeatureRanking SelectionRanking(const Dataset& train, std::uint64_t seed);

// Test-split evaluation in original units.
EvalReport EvaluateModel(const Ensemble& model, const Dataset& test);

struct PipelineResult {
  SplitIndices split;
  FeatureRanking ranking;
  std::vector<std::string> selected;
  FoldAssignment folds;
  TuneResult tuning;
  Ensemble model;
  std::vector<double> test_predictions;  // transformed scale
  EvalReport report;
};

// `ds` must hold transformed targets.
PipelineResult RunPipeline(const Dataset& ds, const PipelineConfig& cfg);

// Six rows: {GBDT, ExtraTrees} x {all features with defaults, selected
// features with defaults, selected features with tuned parameters}.
struct ComparisonRow {
  std::string method;
  std::string features;
  std::string parameters;
  EvalReport report;
};
std::vector<ComparisonRow> RunComparison(const Dataset& ds,
                                         const PipelineConfig& cfg);
std::string ComparisonToCsv(std::span<const ComparisonRow> rows);

// id,predicted (original units). Row numbers stand in for missing ids.
std::string PredictionsCsv(std::span<const double> transformed,
                           const std::optional<std::vector<std::string>>& ids);
// id,landcover,observed,predicted (original units).
std::string ScatterCsv(const Dataset& ds, std::span<const double> transformed);

// Hex FNV-1a of a byte string, as recorded in manifests.
std::string HashHex(std::string_view bytes);

// Holds <workdir>/.soiln.lock for its lifetime; throws Locked if another
// command owns it.
class WorkdirLock {
 public:
  explicit WorkdirLock(const std::filesystem::path& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Collects a command's outputs in <workdir>/.staging and moves them into the
// workdir only on Commit, together with manifest.json. Destroying an
// uncommitted stage discards its files.
class ArtifactStage {
 public:
  ArtifactStage(std::filesystem::path workdir, std::string command);
  ~ArtifactStage();
  ArtifactStage(const ArtifactStage&) = delete;
  ArtifactStage& operator=(const ArtifactStage&) = delete;

  void Write(const std::string& name, std::string_view contents);
  void RecordInput(const std::filesystem::path& path);
  void RecordSeed(const std::string& name, std::uint64_t seed);
  void RecordConfig(std::string json);
  void Commit();

 private:
  std::filesystem::path workdir_;
  std::filesystem::path staging_;
  std::string command_;
  std::string config_json_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::uint64_t>> seeds_;
  std::vector<std::pair<std::string, std::string>> outputs_;
  bool committed_ = false;
};

}  // namespace soiln

#endif  // SOILN_PIPELINE_HPP_
