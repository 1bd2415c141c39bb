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

// Seeded synthetic soil datasets with a known response surface.
//
// Informative features u_0..u_9 are iid U[0, 1]. The latent (log-scale)
// response is
//
//   z = 4.3 + 0.05 * s(u) + offset(landcover)
//   s(u) = 10 sin(pi u0 u1) + 20 (u2 - 0.5)^2 + 10 u3 + 5 u4
//        + 5 sin(2 pi u5) + 8 u6 u7 + 6 |u8 - 0.5| + 4 u9
//
// with offsets Cropland -0.1, Grassland +0.2 and 0 for any other class. A
// term is dropped when the spec has too few informative features to supply
// its inputs. Landcover is assigned by the rank of the last informative
// feature: the lowest-ranked rows take the first class of the mix, and so
// on, so class membership is recoverable from the features. Observed targets
// are exp(z + noise) / 100 with Gaussian noise of sd `noise_sd`.

#ifndef SOILN_SYNTH_HPP_
#define SOILN_SYNTH_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "soiln/data.hpp"

namespace soiln {

inline constexpr int kMaxInformative = 10;
// Puts the population R^2 ceiling of the default spec at 0.85.
inline constexpr double kDefaultNoiseSd = 0.1559;

struct SynthSpec {
  std::size_t n_rows = 21244;
  int n_informative = 10;
  int n_noise = 74;
  double noise_sd = kDefaultNoiseSd;
  std::vector<std::pair<std::string, double>> class_mix = {
      {"Cropland", 13937.0 / 21244.0}, {"Grassland", 7307.0 / 21244.0}};
  double missing_rate = 0.0;
  std::uint64_t seed = 42;

  // Throws InvalidSpec.
  void Validate() const;
  int n_features() const noexcept { return n_informative + n_noise; }
};

double LandcoverOffset(std::string_view landcover) noexcept;

// Noiseless log-scale response for one row. `informative` holds the first
// n_informative feature values.
double LatentResponse(std::span<const double> informative,
                      std::string_view landcover);

std::vector<std::string> InformativeFeatureNames(const SynthSpec& spec);
std::vector<std::string> SynthFeatureNames(const SynthSpec& spec);

Dataset Generate(const SynthSpec& spec);

// Noiseless latent response of every row of a generated dataset.
std::vector<double> NoiselessLatent(const SynthSpec& spec, const Dataset& ds);

// Variance of the latent response in the population, by simulation.
double LatentVariance(const SynthSpec& spec, std::size_t samples = 1'000'000);

// Var(latent) / (Var(latent) + noise_sd^2): the best R^2 any model can reach
// on the log scale.
double OracleR2Ceiling(const SynthSpec& spec,
                       std::size_t samples = 1'000'000);

}  // namespace soiln

#endif  // SOILN_SYNTH_HPP_
