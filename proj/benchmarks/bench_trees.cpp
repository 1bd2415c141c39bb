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

#include <benchmark/benchmark.h>

#include "soiln/synth.hpp"
#include "soiln/trees.hpp"

namespace {

soiln::Dataset Synth(std::size_t rows) {
  soiln::SynthSpec spec;
  spec.n_rows = rows;
  soiln::Dataset ds = soiln::Generate(spec);
  ds.target = soiln::TransformTarget(ds.target);
  return ds;
}

void BM_BinFeatures(benchmark::State& state) {
  const soiln::Dataset ds = Synth(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(soiln::BinFeatures(ds.features, 256));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BinFeatures)->Arg(2000)->Arg(21244)->Unit(benchmark::kMillisecond);

// Per-tree cost: rows x depth.
void BM_GbdtTrain(benchmark::State& state) {
  const soiln::Dataset ds = Synth(static_cast<std::size_t>(state.range(0)));
  const soiln::BinnedTable binned = soiln::BinFeatures(ds.features, 256);
  soiln::GbdtParams p;
  p.n_trees = 10;
  p.max_depth = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(soiln::TrainGbdt(binned, ds.target, p));
  state.SetItemsProcessed(state.iterations() * p.n_trees);
}
BENCHMARK(BM_GbdtTrain)
    ->Args({400, 6})
    ->Args({2000, 6})
    ->Args({21244, 6})
    ->Args({21244, 10})
    ->Unit(benchmark::kMillisecond);

void BM_ExtraTreesTrain(benchmark::State& state) {
  const soiln::Dataset ds = Synth(static_cast<std::size_t>(state.range(0)));
  soiln::ExtraTreesParams p;
  p.n_trees = 5;
  for (auto _ : state) benchmark::DoNotOptimize(soiln::TrainExtraTrees(ds, p));
  state.SetItemsProcessed(state.iterations() * p.n_trees);
}
BENCHMARK(BM_ExtraTreesTrain)->Arg(2000)->Arg(21244)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const soiln::Dataset ds = Synth(21244);
  soiln::GbdtParams p;
  p.n_trees = static_cast<int>(state.range(0));
  const soiln::Ensemble m = soiln::FitGbdt(ds, p);
  for (auto _ : state) benchmark::DoNotOptimize(soiln::Predict(m, ds.features));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.n_rows()));
}
BENCHMARK(BM_Predict)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
