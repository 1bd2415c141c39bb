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

#include <map>
#include <numeric>

#include "soiln/shap.hpp"
#include "soiln/synth.hpp"

namespace {

struct Fixture {
  soiln::Dataset ds;
  soiln::Ensemble model;
};

const Fixture& Trained(int depth) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(depth);
  if (it == cache.end()) {
    soiln::SynthSpec spec;
    spec.n_rows = 5000;
    Fixture f;
    f.ds = soiln::Generate(spec);
    f.ds.target = soiln::TransformTarget(f.ds.target);
    soiln::GbdtParams p;
    p.n_trees = 100;
    p.max_depth = depth;
    f.model = soiln::FitGbdt(f.ds, p);
    it = cache.emplace(depth, std::move(f)).first;
  }
  return it->second;
}

void BM_TreeShap(benchmark::State& state) {
  const Fixture& f = Trained(static_cast<int>(state.range(0)));
  std::vector<std::size_t> rows(500);
  std::iota(rows.begin(), rows.end(), 0u);
  const soiln::FeatureTable ft = f.ds.features.SelectRows(rows);
  for (auto _ : state) benchmark::DoNotOptimize(soiln::TreeShap(f.model, ft));
  state.SetItemsProcessed(state.iterations() * 500);
}
BENCHMARK(BM_TreeShap)->Arg(4)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_RankFeatures(benchmark::State& state) {
  const Fixture& f = Trained(6);
  const soiln::ShapMatrix s = soiln::TreeShap(f.model, f.ds.features);
  for (auto _ : state) benchmark::DoNotOptimize(soiln::RankFeatures(s));
}
BENCHMARK(BM_RankFeatures)->Unit(benchmark::kMicrosecond);

}  // namespace
