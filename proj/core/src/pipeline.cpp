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

#include "soiln/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <system_error>

#include "csv.hpp"
#include "json.hpp"
#include "soiln/error.hpp"
#include "soiln/random.hpp"

namespace soiln {
namespace {

using Json = nlohmann::ordered_json;

// Runs one workflow stage, prefixing any library error with the stage name.
template <typename Fn>
auto InStage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.detail());
  }
}

[[noreturn]] void BadConfig(const std::string& why) {
  throw Error(ErrorCode::kInvalidParams, "config: " + why);
}

void CheckKeys(const Json& obj, std::initializer_list<std::string_view> allowed,
               const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const auto name : allowed) known = known || key == name;
    if (!known) BadConfig("unknown key '" + where + key + "'");
  }
}

std::vector<double> ToOriginal(std::span<const double> transformed) {
  std::vector<double> out(transformed.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = InverseTransformValue(transformed[i]);
  }
  return out;
}

std::string IdOf(const std::optional<std::vector<std::string>>& ids, std::size_t row) {
  return ids ? (*ids)[row] : std::to_string(row);
}

}  // namespace

void PipelineConfig::Validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidFraction, "test_fraction must lie in (0, 1)");
  }
  if (k_folds < 2) throw Error(ErrorCode::kInvalidK, "k_folds must be at least 2");
  if (cv_strata < 1) throw Error(ErrorCode::kInvalidK, "cv_strata must be at least 1");
  if (top_k_features < 1) BadConfig("top_k_features must be at least 1");
  if (landcover && landcover->empty()) BadConfig("landcover filter is empty");
  EffectiveTuner().Validate();
}

TunerConfig PipelineConfig::EffectiveTuner() const {
  TunerConfig t = tuner;
  t.k_folds = k_folds;
  t.n_strata = cv_strata;
  t.seed = seed;
  return t;
}

std::string PipelineConfigToJson(const PipelineConfig& cfg) {
  Json doc = Json::object();
  doc["dataset"] = cfg.dataset.string();
  doc["workdir"] = cfg.workdir.string();
  doc["model"] = cfg.model.string();
  doc["columns"] = {{"target", cfg.columns.target},
                    {"landcover", cfg.columns.landcover},
                    {"id", cfg.columns.id ? Json(*cfg.columns.id) : Json(nullptr)}};
  doc["test_fraction"] = cfg.test_fraction;
  doc["k_folds"] = cfg.k_folds;
  doc["top_k_features"] = cfg.top_k_features;
  doc["cv_strata"] = cfg.cv_strata;
  doc["seed"] = cfg.seed;
  doc["landcover"] = cfg.landcover ? Json(*cfg.landcover) : Json(nullptr);
  doc["tuner"] = {{"n_trials", cfg.tuner.n_trials},
                  {"n_startup", cfg.tuner.n_startup},
                  {"gamma", cfg.tuner.gamma},
                  {"n_candidates", cfg.tuner.n_candidates}};
  return doc.dump(1) + "\n";
}

PipelineConfig PipelineConfigFromJson(std::string_view text,
                                      const PipelineConfig& base) {
  PipelineConfig cfg = base;
  try {
    const Json doc = Json::parse(text);
    if (!doc.is_object()) BadConfig("expected a JSON object");
    CheckKeys(doc,
              {"dataset", "workdir", "model", "columns", "test_fraction", "k_folds",
               "top_k_features", "cv_strata", "seed", "landcover", "tuner"},
              "");
    if (doc.contains("dataset")) cfg.dataset = doc["dataset"].get<std::string>();
    if (doc.contains("workdir")) cfg.workdir = doc["workdir"].get<std::string>();
    if (doc.contains("model")) cfg.model = doc["model"].get<std::string>();
    if (doc.contains("columns")) {
      const Json& c = doc["columns"];
      CheckKeys(c, {"target", "landcover", "id"}, "columns.");
      if (c.contains("target")) cfg.columns.target = c["target"].get<std::string>();
      if (c.contains("landcover")) {
        cfg.columns.landcover = c["landcover"].get<std::string>();
      }
      if (c.contains("id")) {
        cfg.columns.id = c["id"].is_null() ? std::nullopt
                                           : std::optional(c["id"].get<std::string>());
      }
    }
    if (doc.contains("test_fraction")) cfg.test_fraction = doc["test_fraction"].get<double>();
    if (doc.contains("k_folds")) cfg.k_folds = doc["k_folds"].get<int>();
    if (doc.contains("top_k_features")) {
      cfg.top_k_features = doc["top_k_features"].get<int>();
    }
    if (doc.contains("cv_strata")) cfg.cv_strata = doc["cv_strata"].get<int>();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("landcover")) {
      cfg.landcover = doc["landcover"].is_null()
                          ? std::nullopt
                          : std::optional(doc["landcover"].get<std::string>());
    }
    if (doc.contains("tuner")) {
      const Json& t = doc["tuner"];
      CheckKeys(t, {"n_trials", "n_startup", "gamma", "n_candidates"}, "tuner.");
      if (t.contains("n_trials")) cfg.tuner.n_trials = t["n_trials"].get<int>();
      if (t.contains("n_startup")) cfg.tuner.n_startup = t["n_startup"].get<int>();
      if (t.contains("gamma")) cfg.tuner.gamma = t["gamma"].get<double>();
      if (t.contains("n_candidates")) cfg.tuner.n_candidates = t["n_candidates"].get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    BadConfig(e.what());
  }
  return cfg;
}

Dataset FilterLandcover(const Dataset& ds, const std::string& landcover) {
  const std::vector<std::size_t> rows = ds.RowsOfClass(Landcover(landcover));
  if (rows.empty()) {
    throw Error(ErrorCode::kClassTooSmall, "no rows with landcover " + landcover);
  }
  return ds.SelectRows(rows);
}

Dataset LoadPipelineDataset(const PipelineConfig& cfg) {
  return InStage("load", [&] {
    Dataset ds = LoadCsv(cfg.dataset, cfg.columns);
    if (cfg.landcover) ds = FilterLandcover(ds, *cfg.landcover);
    ds.target = TransformTarget(ds.target);
    return ds;
  });
}

FeatureRanking SelectionRanking(const Dataset& train, std::uint64_t seed) {
  GbdtParams params;
  params.seed = seed;
  const Ensemble model = FitGbdt(train, params);
  return RankFeatures(TreeShap(model, train.features));
}

EvalReport EvaluateModel(const Ensemble& model, const Dataset& test) {
  const std::vector<double> pred = Predict(model, test.features);
  const TargetVector truth = test.target.scale == TargetScale::kOriginal
                                 ? test.target
                                 : InverseTransformTarget(test.target);
  return Evaluate(truth, pred, test.landcover);
}

PipelineResult RunPipeline(const Dataset& ds, const PipelineConfig& cfg) {
  cfg.Validate();
  PipelineResult out;
  out.split = InStage("split", [&] {
    return StratifiedSplit(ds, cfg.test_fraction, cfg.seed);
  });
  const Dataset train = ds.SelectRows(out.split.train);
  const Dataset test = ds.SelectRows(out.split.test);

  out.ranking = InStage("select", [&] { return SelectionRanking(train, cfg.seed); });
  out.selected = SelectTopK(out.ranking, cfg.top_k_features);
  const Dataset train_sel = train.SelectFeatures(out.selected);

  const TunerConfig tuner = cfg.EffectiveTuner();
  GbdtParams base;
  base.seed = cfg.seed;
  out.folds = InStage("folds", [&] {
    return StratifiedKFold(train_sel.target, tuner.k_folds, tuner.n_strata, cfg.seed);
  });
  out.tuning = InStage("tune", [&] {
    return Tune(train_sel.target, out.folds, DefaultGbdtSpace(), tuner,
                GbdtFoldTrainer(train_sel, base));
  });

  out.model = InStage("train", [&] {
    return FitGbdt(train_sel, GbdtParams::FromMap(out.tuning.best_params, base));
  });
  InStage("evaluate", [&] {
    out.test_predictions = Predict(out.model, test.features);
    out.report = EvaluateModel(out.model, test);
  });
  return out;
}

std::vector<ComparisonRow> RunComparison(const Dataset& ds, const PipelineConfig& cfg) {
  cfg.Validate();
  const SplitIndices split = StratifiedSplit(ds, cfg.test_fraction, cfg.seed);
  const Dataset train = ds.SelectRows(split.train);
  const Dataset test = ds.SelectRows(split.test);
  const std::vector<std::string> selected = SelectTopK(
      InStage("select", [&] { return SelectionRanking(train, cfg.seed); }),
      cfg.top_k_features);
  const Dataset train_sel = train.SelectFeatures(selected);
  const std::string all_count = std::to_string(train.features.n_cols());
  const std::string sel_count = std::to_string(selected.size());

  const TunerConfig tuner = cfg.EffectiveTuner();
  const FoldAssignment folds =
      StratifiedKFold(train_sel.target, tuner.k_folds, tuner.n_strata, cfg.seed);

  GbdtParams gbdt;
  gbdt.seed = cfg.seed;
  ExtraTreesParams et;
  et.seed = cfg.seed;

  std::vector<ComparisonRow> rows;
  InStage("gbdt", [&] {
    rows.push_back({"GBDT", all_count, "default",
                    EvaluateModel(FitGbdt(train, gbdt), test)});
    rows.push_back({"GBDT", sel_count, "default",
                    EvaluateModel(FitGbdt(train_sel, gbdt), test)});
    const TuneResult tuned = Tune(train_sel.target, folds, DefaultGbdtSpace(), tuner,
                                  GbdtFoldTrainer(train_sel, gbdt));
    rows.push_back(
        {"GBDT", sel_count, "optimized: " + ParamMapToString(tuned.best_params),
         EvaluateModel(FitGbdt(train_sel, GbdtParams::FromMap(tuned.best_params, gbdt)),
                       test)});
  });
  InStage("extratrees", [&] {
    rows.push_back({"ExtraTrees", all_count, "default",
                    EvaluateModel(TrainExtraTrees(train, et), test)});
    rows.push_back({"ExtraTrees", sel_count, "default",
                    EvaluateModel(TrainExtraTrees(train_sel, et), test)});
    const TuneResult tuned =
        Tune(train_sel.target, folds, DefaultExtraTreesSpace(selected.size()), tuner,
             ExtraTreesFoldTrainer(train_sel, et));
    rows.push_back(
        {"ExtraTrees", sel_count, "optimized: " + ParamMapToString(tuned.best_params),
         EvaluateModel(
             TrainExtraTrees(train_sel, ExtraTreesParams::FromMap(tuned.best_params, et)),
             test)});
  });
  return rows;
}

std::string ComparisonToCsv(std::span<const ComparisonRow> rows) {
  std::string out = ComparisonCsvHeader();
  for (const auto& row : rows) {
    out += ComparisonCsvRow(row.method, row.report, row.features, row.parameters);
  }
  return out;
}

std::string PredictionsCsv(std::span<const double> transformed,
                           const std::optional<std::vector<std::string>>& ids) {
  std::string out = "id,predicted\n";
  const std::vector<double> pred = ToOriginal(transformed);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out += internal::EscapeCsvField(IdOf(ids, i));
    out += ',';
    out += internal::FormatDouble(pred[i]);
    out += '\n';
  }
  return out;
}

std::string ScatterCsv(const Dataset& ds, std::span<const double> transformed) {
  if (transformed.size() != ds.n_rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "one prediction per row expected");
  }
  std::string out = "id,landcover,observed,predicted\n";
  const std::vector<double> pred = ToOriginal(transformed);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double observed = ds.target.scale == TargetScale::kOriginal
                                ? ds.target.values[i]
                                : InverseTransformValue(ds.target.values[i]);
    out += internal::EscapeCsvField(IdOf(ds.ids, i));
    out += ',';
    out += internal::EscapeCsvField(ds.landcover[i].name());
    out += ',';
    out += internal::FormatDouble(observed);
    out += ',';
    out += internal::FormatDouble(pred[i]);
    out += '\n';
  }
  return out;
}

std::string HashHex(std::string_view bytes) {
  char buffer[24];
  std::snprintf(buffer, sizeof(buffer), "%016" PRIx64,
                Fnv1a64(bytes.data(), bytes.size()));
  return buffer;
}

WorkdirLock::WorkdirLock(const std::filesystem::path& workdir)
    : path_(workdir / ".soiln.lock") {
  std::error_code ec;
  std::filesystem::create_directories(workdir, ec);
  if (ec) throw Error(ErrorCode::kIo, workdir.string() + ": " + ec.message());
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw Error(ErrorCode::kLocked, path_.string() + " exists; another command "
                                                       "is using this workdir");
    }
    throw Error(ErrorCode::kIo, path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

WorkdirLock::~WorkdirLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

ArtifactStage::ArtifactStage(std::filesystem::path workdir, std::string command)
    : workdir_(std::move(workdir)),
      staging_(workdir_ / (".staging-" + command)),
      command_(std::move(command)) {
  std::error_code ec;
  std::filesystem::remove_all(staging_, ec);
  std::filesystem::create_directories(staging_, ec);
  if (ec) throw Error(ErrorCode::kIo, staging_.string() + ": " + ec.message());
}

ArtifactStage::~ArtifactStage() {
  if (!committed_) {
    std::error_code ec;
    std::filesystem::remove_all(staging_, ec);
  }
}

void ArtifactStage::Write(const std::string& name, std::string_view contents) {
  internal::WriteFileAtomic(staging_ / name, contents);
  outputs_.emplace_back(name, HashHex(contents));
}

void ArtifactStage::RecordInput(const std::filesystem::path& path) {
  inputs_.emplace_back(path.string(), HashHex(internal::ReadFile(path)));
}

void ArtifactStage::RecordSeed(const std::string& name, std::uint64_t seed) {
  seeds_.emplace_back(name, seed);
}

void ArtifactStage::RecordConfig(std::string json) { config_json_ = std::move(json); }

void ArtifactStage::Commit() {
  Json manifest = Json::object();
  manifest["tool"] = "soiln";
  manifest["version"] = kVersion;
  manifest["command"] = command_;
  manifest["config"] = config_json_.empty() ? Json(nullptr) : Json::parse(config_json_);
  Json seeds = Json::object();
  for (const auto& [name, seed] : seeds_) seeds[name] = seed;
  manifest["seeds"] = std::move(seeds);
  Json inputs = Json::array();
  for (const auto& [path, hash] : inputs_) {
    inputs.push_back({{"path", path}, {"fnv1a64", hash}});
  }
  manifest["inputs"] = std::move(inputs);
  Json outputs = Json::array();
  for (const auto& [path, hash] : outputs_) {
    outputs.push_back({{"path", path}, {"fnv1a64", hash}});
  }
  manifest["outputs"] = std::move(outputs);
  const std::string manifest_name = "manifest-" + command_ + ".json";
  internal::WriteFileAtomic(staging_ / manifest_name, manifest.dump(1) + "\n");

  std::vector<std::string> names;
  for (const auto& entry : outputs_) names.push_back(entry.first);
  names.push_back(manifest_name);
  for (const auto& name : names) {
    std::error_code ec;
    std::filesystem::rename(staging_ / name, workdir_ / name, ec);
    if (ec) throw Error(ErrorCode::kIo, "promoting " + name + ": " + ec.message());
  }
  std::error_code ec;
  std::filesystem::remove_all(staging_, ec);
  committed_ = true;
}

}  // namespace soiln
