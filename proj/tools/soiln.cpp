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

// soiln: batch command-line front end.
//
//   soiln synth           --out data.csv [--rows N ...]
//   soiln split|select|tune|train|evaluate|run|compare  [pipeline options]
//   soiln predict         --model m.json --input x.csv --out p.csv
//   soiln export-scatter  --model m.json --input x.csv --out s.csv [--split f]
//
// Pipeline options may come from --config FILE; flags override the file.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "soiln/data.hpp"
#include "soiln/error.hpp"
#include "soiln/metrics.hpp"
#include "soiln/params.hpp"
#include "soiln/persist.hpp"
#include "soiln/pipeline.hpp"
#include "soiln/shap.hpp"
#include "soiln/synth.hpp"
#include "soiln/trees.hpp"
#include "soiln/tuner.hpp"

namespace fs = std::filesystem;
using namespace soiln;

namespace {

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, path.string() + ": cannot open");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Flag values that, when given, override the config file.
struct PipelineFlags {
  std::string config;
  std::optional<std::string> dataset, workdir, model;
  std::optional<std::string> target_column, landcover_column, id_column;
  std::optional<double> test_fraction;
  std::optional<int> k_folds, top_k, cv_strata;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> landcover;
  std::optional<int> n_trials, n_startup, n_candidates;
  std::optional<double> gamma;

  void Attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON pipeline config");
    cmd->add_option("--dataset", dataset, "Input CSV");
    cmd->add_option("--workdir", workdir, "Directory for stage artifacts");
    cmd->add_option("--model", model, "Extra model output / model to read");
    cmd->add_option("--target-column", target_column);
    cmd->add_option("--landcover-column", landcover_column);
    cmd->add_option("--id-column", id_column);
    cmd->add_option("--test-fraction", test_fraction);
    cmd->add_option("--k-folds", k_folds);
    cmd->add_option("--top-k", top_k, "Features kept after SHAP ranking");
    cmd->add_option("--cv-strata", cv_strata, "Target-quantile bins for CV folds");
    cmd->add_option("--seed", seed);
    cmd->add_option("--landcover", landcover, "Restrict to one landcover class");
    cmd->add_option("--n-trials", n_trials);
    cmd->add_option("--n-startup", n_startup);
    cmd->add_option("--gamma", gamma);
    cmd->add_option("--n-candidates", n_candidates);
  }

  PipelineConfig Resolve() const {
    PipelineConfig cfg;
    if (!config.empty()) cfg = PipelineConfigFromJson(Slurp(config), cfg);
    if (dataset) cfg.dataset = *dataset;
    if (workdir) cfg.workdir = *workdir;
    if (model) cfg.model = *model;
    if (target_column) cfg.columns.target = *target_column;
    if (landcover_column) cfg.columns.landcover = *landcover_column;
    if (id_column) cfg.columns.id = *id_column;
    if (test_fraction) cfg.test_fraction = *test_fraction;
    if (k_folds) cfg.k_folds = *k_folds;
    if (top_k) cfg.top_k_features = *top_k;
    if (cv_strata) cfg.cv_strata = *cv_strata;
    if (seed) cfg.seed = *seed;
    if (landcover) cfg.landcover = *landcover;
    if (n_trials) cfg.tuner.n_trials = *n_trials;
    if (n_startup) cfg.tuner.n_startup = *n_startup;
    if (gamma) cfg.tuner.gamma = *gamma;
    if (n_candidates) cfg.tuner.n_candidates = *n_candidates;
    cfg.Validate();
    if (cfg.dataset.empty()) {
      throw Error(ErrorCode::kInvalidParams, "config: no dataset given");
    }
    return cfg;
  }
};

// Lock, stage and manifest bookkeeping shared by the workdir commands.
class WorkdirCommand {
 public:
  WorkdirCommand(const PipelineConfig& cfg, const std::string& name)
      : cfg_(cfg), lock_(cfg.workdir), stage_(cfg.workdir, name) {
    stage_.RecordConfig(PipelineConfigToJson(cfg));
    stage_.RecordSeed("seed", cfg.seed);
    stage_.RecordInput(cfg.dataset);
  }

  fs::path Path(const std::string& name) const { return cfg_.workdir / name; }

  std::string ReadArtifact(const std::string& name) {
    const fs::path path = Path(name);
    stage_.RecordInput(path);
    return Slurp(path);
  }

  bool HasArtifact(const std::string& name) const { return fs::exists(Path(name)); }

  ArtifactStage& stage() { return stage_; }

  // Promotes the staged outputs, then copies the model to cfg.model if set.
  void Commit() {
    stage_.Commit();
    if (!cfg_.model.empty() && fs::exists(Path("model.json"))) {
      const std::string text = Slurp(Path("model.json"));
      const fs::path tmp = cfg_.model.string() + ".tmp";
      std::ofstream(tmp, std::ios::binary) << text;
      fs::rename(tmp, cfg_.model);
    }
  }

 private:
  const PipelineConfig& cfg_;
  WorkdirLock lock_;
  ArtifactStage stage_;
};

struct Splits {
  Dataset train;
  Dataset test;
};

Splits ApplySplit(const Dataset& ds, const SplitIndices& split) {
  return {ds.SelectRows(split.train), ds.SelectRows(split.test)};
}

std::vector<std::string> SelectedOrAll(WorkdirCommand& cmd, const Dataset& ds) {
  if (cmd.HasArtifact("selected_features.json")) {
    return FeatureListFromJson(cmd.ReadArtifact("selected_features.json"));
  }
  return ds.features.names();
}

fs::path ModelPath(const PipelineConfig& cfg) {
  return cfg.model.empty() ? cfg.workdir / "model.json" : cfg.model;
}

std::vector<double> PredictOrSchemaError(const Ensemble& model, const FeatureTable& ft) {
  try {
    return Predict(model, ft);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMissingFeature) {
      throw Error(ErrorCode::kSchemaMismatch, "dataset lacks model feature " + e.detail());
    }
    throw;
  }
}

void WriteRunArtifacts(ArtifactStage& stage, const PipelineResult& r) {
  stage.Write("split.json", SplitToJson(r.split));
  stage.Write("ranking.csv", RankingToCsv(r.ranking));
  stage.Write("selected_features.json", FeatureListToJson(r.selected));
  stage.Write("folds.json", FoldsToJson(r.folds));
  stage.Write("trials.csv", HistoryToCsv(r.tuning.history));
  stage.Write("best_params.json", ParamMapToJson(r.tuning.best_params));
  stage.Write("model.json", ModelToJson(r.model));
  stage.Write("report.json", ReportToJson(r.report));
}

int CmdSplit(const PipelineConfig& cfg) {
  WorkdirCommand cmd(cfg, "split");
  const Dataset ds = LoadPipelineDataset(cfg);
  cmd.stage().Write("split.json", SplitToJson(StratifiedSplit(ds, cfg.test_fraction, cfg.seed)));
  cmd.Commit();
  return 0;
}

int CmdSelect(const PipelineConfig& cfg) {
  WorkdirCommand cmd(cfg, "select");
  const Dataset ds = LoadPipelineDataset(cfg);
  const Splits s = ApplySplit(ds, SplitFromJson(cmd.ReadArtifact("split.json")));
  const FeatureRanking ranking = SelectionRanking(s.train, cfg.seed);
  cmd.stage().Write("ranking.csv", RankingToCsv(ranking));
  cmd.stage().Write("selected_features.json",
                    FeatureListToJson(SelectTopK(ranking, cfg.top_k_features)));
  cmd.Commit();
  return 0;
}

int CmdTune(const PipelineConfig& cfg) {
  WorkdirCommand cmd(cfg, "tune");
  const Dataset ds = LoadPipelineDataset(cfg);
  const Splits s = ApplySplit(ds, SplitFromJson(cmd.ReadArtifact("split.json")));
  const Dataset train = s.train.SelectFeatures(SelectedOrAll(cmd, s.train));
  const TunerConfig tuner = cfg.EffectiveTuner();
  const FoldAssignment folds =
      StratifiedKFold(train.target, tuner.k_folds, tuner.n_strata, cfg.seed);
  GbdtParams base;
  base.seed = cfg.seed;
  const TuneResult result = Tune(train.target, folds, DefaultGbdtSpace(), tuner,
                                 GbdtFoldTrainer(train, base));
  cmd.stage().Write("folds.json", FoldsToJson(folds));
  cmd.stage().Write("trials.csv", HistoryToCsv(result.history));
  cmd.stage().Write("best_params.json", ParamMapToJson(result.best_params));
  cmd.Commit();
  return 0;
}

int CmdTrain(const PipelineConfig& cfg) {
  WorkdirCommand cmd(cfg, "train");
  const Dataset ds = LoadPipelineDataset(cfg);
  const Splits s = ApplySplit(ds, SplitFromJson(cmd.ReadArtifact("split.json")));
  const Dataset train = s.train.SelectFeatures(SelectedOrAll(cmd, s.train));
  GbdtParams params;
  params.seed = cfg.seed;
  if (cmd.HasArtifact("best_params.json")) {
    params = GbdtParams::FromMap(ParamMapFromJson(cmd.ReadArtifact("best_params.json")),
                                 params);
  }
  cmd.stage().Write("model.json", ModelToJson(FitGbdt(train, params)));
  cmd.Commit();
  return 0;
}

int CmdEvaluate(const PipelineConfig& cfg) {
  WorkdirCommand cmd(cfg, "evaluate");
  const Dataset ds = LoadPipelineDataset(cfg);
  const fs::path model_path = ModelPath(cfg);
  cmd.stage().RecordInput(model_path);
  const Ensemble model = LoadModel(model_path);
  const Dataset test = cmd.HasArtifact("split.json")
                           ? ApplySplit(ds, SplitFromJson(cmd.ReadArtifact("split.json"))).test
                           : ds;
  PredictOrSchemaError(model, test.features);
  cmd.stage().Write("report.json", ReportToJson(EvaluateModel(model, test)));
  cmd.Commit();
  return 0;
}

int CmdRun(const PipelineConfig& cfg) {
  WorkdirCommand cmd(cfg, "run");
  const PipelineResult result = RunPipeline(LoadPipelineDataset(cfg), cfg);
  WriteRunArtifacts(cmd.stage(), result);
  cmd.Commit();
  spdlog::info("test MAPE {:.3f}%  MAE {:.4f}", result.report.overall.mape_percent,
               result.report.overall.mae);
  return 0;
}

int CmdCompare(const PipelineConfig& cfg) {
  WorkdirCommand cmd(cfg, "compare");
  const std::vector<ComparisonRow> rows = RunComparison(LoadPipelineDataset(cfg), cfg);
  cmd.stage().Write("compare.csv", ComparisonToCsv(rows));
  cmd.Commit();
  return 0;
}

struct ModelIo {
  std::string model;
  std::string input;
  std::string out;
  std::string split;
  std::string target_column = "nitrogen";
  std::string landcover_column = "landcover";
  std::string id_column = "id";

  void Attach(CLI::App* cmd, bool with_split) {
    cmd->add_option("--model", model, "Model file")->required();
    cmd->add_option("--input,--dataset", input, "Input CSV")->required();
    cmd->add_option("--out", out, "Output CSV")->required();
    cmd->add_option("--target-column", target_column);
    cmd->add_option("--landcover-column", landcover_column);
    cmd->add_option("--id-column", id_column);
    if (with_split) {
      cmd->add_option("--split", split, "Split file; restricts output to test rows");
    }
  }

  CsvColumns Columns() const { return {target_column, landcover_column, id_column, false}; }
};

// Writes one output file next to its manifest, through a staging directory.
void WriteSingleOutput(const std::string& command, const ModelIo& io,
                       const std::string& contents) {
  const fs::path out(io.out);
  const fs::path dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
  ArtifactStage stage(dir, command);
  stage.RecordInput(io.model);
  stage.RecordInput(io.input);
  if (!io.split.empty()) stage.RecordInput(io.split);
  stage.Write(out.filename().string(), contents);
  stage.Commit();
}

int CmdPredict(const ModelIo& io) {
  const Ensemble model = LoadModel(io.model);
  const UnlabelledTable table = LoadFeatureCsv(io.input, io.Columns());
  const std::vector<double> pred = PredictOrSchemaError(model, table.features);
  WriteSingleOutput("predict", io, PredictionsCsv(pred, table.ids));
  return 0;
}

int CmdExportScatter(const ModelIo& io) {
  const Ensemble model = LoadModel(io.model);
  Dataset ds = LoadCsv(io.input, io.Columns());
  if (!io.split.empty()) ds = ds.SelectRows(SplitFromJson(Slurp(io.split)).test);
  const std::vector<double> pred = PredictOrSchemaError(model, ds.features);
  WriteSingleOutput("export-scatter", io, ScatterCsv(ds, pred));
  return 0;
}

struct SynthFlags {
  std::string out;
  SynthSpec spec;
  std::string class_mix;

  void Attach(CLI::App* cmd) {
    cmd->add_option("--out", out, "Output CSV")->required();
    cmd->add_option("--rows", spec.n_rows)->capture_default_str();
    cmd->add_option("--informative", spec.n_informative)->capture_default_str();
    cmd->add_option("--noise-features", spec.n_noise)->capture_default_str();
    cmd->add_option("--noise-sd", spec.noise_sd)->capture_default_str();
    cmd->add_option("--missing-rate", spec.missing_rate)->capture_default_str();
    cmd->add_option("--seed", spec.seed)->capture_default_str();
    cmd->add_option("--class-mix", class_mix,
                    "Comma-separated NAME=FRACTION pairs, e.g. Cropland=0.6,Grassland=0.4");
  }

  SynthSpec Resolve() const {
    SynthSpec s = spec;
    if (!class_mix.empty()) {
      s.class_mix.clear();
      std::stringstream items(class_mix);
      std::string item;
      while (std::getline(items, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
          throw Error(ErrorCode::kInvalidSpec, "class mix entry '" + item + "'");
        }
        double fraction = 0.0;
        try {
          fraction = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kInvalidSpec, "class mix entry '" + item + "'");
        }
        s.class_mix.emplace_back(item.substr(0, eq), fraction);
      }
    }
    return s;
  }
};

int CmdSynth(const SynthFlags& flags) {
  const SynthSpec spec = flags.Resolve();
  const Dataset ds = Generate(spec);
  const fs::path out(flags.out);
  const fs::path dir = out.parent_path().empty() ? fs::path(".") : out.parent_path();
  ArtifactStage stage(dir, "synth");
  stage.RecordSeed("seed", spec.seed);
  // WriteCsv writes straight to a path, so render through a staging file.
  const fs::path tmp = dir / (".synth-" + out.filename().string());
  WriteCsv(ds, tmp, CsvColumns{});
  stage.Write(out.filename().string(), Slurp(tmp));
  fs::remove(tmp);
  std::ostringstream oracle;
  oracle.precision(17);
  oracle << "{\n \"noise_sd\": " << spec.noise_sd
         << ",\n \"latent_variance\": " << LatentVariance(spec)
         << ",\n \"oracle_r2_ceiling\": " << OracleR2Ceiling(spec) << "\n}\n";
  stage.Write(out.stem().string() + ".oracle.json", oracle.str());
  stage.Commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"soiln: soil nitrogen regression toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  SynthFlags synth;
  synth.Attach(app.add_subcommand("synth", "Generate a synthetic dataset"));

  struct Workdir {
    const char* name;
    const char* help;
    int (*run)(const PipelineConfig&);
  };
  const Workdir workdir_commands[] = {
      {"split", "Stratified train/test split", CmdSplit},
      {"select", "SHAP ranking and top-k selection", CmdSelect},
      {"tune", "Hyperparameter search with cross-validation", CmdTune},
      {"train", "Fit the final model", CmdTrain},
      {"evaluate", "Score the model on the test split", CmdEvaluate},
      {"run", "All stages end to end", CmdRun},
      {"compare", "GBDT vs ExtraTrees under three regimes", CmdCompare},
  };
  std::vector<PipelineFlags> flags(std::size(workdir_commands));
  std::vector<CLI::App*> subcommands;
  for (std::size_t i = 0; i < std::size(workdir_commands); ++i) {
    CLI::App* cmd = app.add_subcommand(workdir_commands[i].name, workdir_commands[i].help);
    flags[i].Attach(cmd);
    subcommands.push_back(cmd);
  }

  ModelIo predict_io;
  CLI::App* predict = app.add_subcommand("predict", "Predictions in original units");
  predict_io.Attach(predict, false);
  ModelIo scatter_io;
  CLI::App* scatter =
      app.add_subcommand("export-scatter", "Observed vs predicted table for plotting");
  scatter_io.Attach(scatter, true);

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("soiln");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug
                            : quiet ? spdlog::level::err : spdlog::level::info);

  try {
    if (app.got_subcommand("synth")) return CmdSynth(synth);
    if (predict->parsed()) return CmdPredict(predict_io);
    if (scatter->parsed()) return CmdExportScatter(scatter_io);
    for (std::size_t i = 0; i < subcommands.size(); ++i) {
      if (subcommands[i]->parsed()) return workdir_commands[i].run(flags[i].Resolve());
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 1;
  }
  return 1;
}
