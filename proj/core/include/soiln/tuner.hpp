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

// Hyperparameter search with a Tree-structured Parzen Estimator over k-fold
// cross-validated RMSE (log-target units).

#ifndef SOILN_TUNER_HPP_
#define SOILN_TUNER_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "soiln/data.hpp"
#include "soiln/params.hpp"
#include "soiln/trees.hpp"

namespace soiln {

enum class DimKind { kContinuous, kInteger, kCategorical };

struct ParamDim {
  std::string name;
  DimKind kind = DimKind::kContinuous;
  double low = 0.0;
  double high = 1.0;
  bool log_scale = false;
  std::vector<std::string> choices;

  static ParamDim Continuous(std::string name, double low, double high,
                             bool log_scale = false);
  static ParamDim Integer(std::string name, std::int64_t low, std::int64_t high);
  static ParamDim Categorical(std::string name, std::vector<std::string> choices);

  bool Contains(const ParamValue& v) const;
};

struct ParamSpace {
  std::vector<ParamDim> dims;

  // Throws EmptySpace when there are no dims, InvalidParams on bad bounds.
  void Validate() const;
  bool Contains(const ParamMap& params) const;
};

ParamSpace DefaultGbdtSpace();
ParamSpace DefaultExtraTreesSpace(std::size_t n_cols);

struct Trial {
  int index = 0;
  ParamMap params;
  // Mean of fold_scores.
  double score = 0.0;
  std::vector<double> fold_scores;
  std::uint64_t seed = 0;
  std::uint64_t folds_hash = 0;
};

struct TunerConfig {
  int n_trials = 50;
  int n_startup = 10;
  double gamma = 0.25;
  int n_candidates = 24;
  int k_folds = 5;
  // Target-quantile bins used to stratify the folds.
  int n_strata = 10;
  std::uint64_t seed = 0;

  // n_startup may equal n_trials, which turns the search into seeded random
  // sampling.
  void Validate() const;
};

// Next configuration to evaluate. Uniform in sampling scale while the history
// is shorter than n_startup, otherwise the TPE choice.
ParamMap Suggest(std::span<const Trial> history, const ParamSpace& space,
                 const TunerConfig& cfg);

// Held-out predictions for `valid` from a model trained on `train` (both row
// lists index into the CV dataset).
using FoldTrainer = std::function<std::vector<double>(
    std::span<const std::size_t> train, std::span<const std::size_t> valid,
    const ParamMap& params)>;

// RMSE per held-out fold; throws FoldMismatch if the folds do not cover the
// dataset.
Trial CrossValidate(const TargetVector& z, const FoldAssignment& folds,
                    const ParamMap& params, const FoldTrainer& trainer);

// GBDT on a transformed-target dataset. Bins the features once; each fold
// trains on a row subset of that binning.
FoldTrainer GbdtFoldTrainer(const Dataset& ds, GbdtParams base);
FoldTrainer ExtraTreesFoldTrainer(const Dataset& ds, ExtraTreesParams base);

Trial CrossValidateGbdt(const Dataset& ds, const GbdtParams& params,
                        const FoldAssignment& folds);

struct TuneResult {
  ParamMap best_params;
  double best_score = 0.0;
  std::vector<Trial> history;
};

// Runs n_trials rounds of Suggest then CrossValidate over one fold assignment.
// The best trial is the lowest score, earliest on ties.
TuneResult Tune(const TargetVector& z, const FoldAssignment& folds,
                const ParamSpace& space, const TunerConfig& cfg,
                const FoldTrainer& trainer);

// Stratified folds from cfg, GBDT trainer seeded from `base`.
TuneResult TuneGbdt(const Dataset& ds, const ParamSpace& space,
                    const TunerConfig& cfg, const GbdtParams& base = GbdtParams());

// CSV: index, one column per param, fold_1..fold_k, score.
std::string HistoryToCsv(std::span<const Trial> history);

}  // namespace soiln

#endif  // SOILN_TUNER_HPP_
