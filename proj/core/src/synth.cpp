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

#include "soiln/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <set>

#include "soiln/error.hpp"
#include "soiln/random.hpp"

namespace soiln {
namespace {

enum Stream : std::uint64_t {
  kFeatureStream = 1,
  kNoiseStream = 2,
  kMissingStream = 3,
  kVarianceStream = 4,
};

constexpr double kIntercept = 4.3;
constexpr double kScale = 0.05;

double Uniform(std::uint64_t seed, std::uint64_t row, std::uint64_t col,
               std::uint64_t stream) {
  return ToUnit(HashKey(seed, row, col, stream));
}

double Gaussian(std::uint64_t seed, std::uint64_t row, std::uint64_t stream) {
  double u1 = Uniform(seed, row, 0, stream);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = Uniform(seed, row, 1, stream);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Class sizes by largest remainder: every count is within one of n * f.
std::vector<std::size_t> ClassCounts(const SynthSpec& spec) {
  const std::size_t k = spec.class_mix.size();
  std::vector<std::size_t> counts(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = static_cast<double>(spec.n_rows) * spec.class_mix[c].second;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < spec.n_rows; ++i, ++assigned) {
    ++counts[remainders[i % k].second];
  }
  return counts;
}

}  // namespace

void SynthSpec::Validate() const {
  auto fail = [](const std::string& why) {
    throw Error(ErrorCode::kInvalidSpec, why);
  };
  if (n_rows == 0) fail("n_rows must be positive");
  if (n_informative < 1 || n_informative > kMaxInformative) {
    fail("n_informative must lie in [1, 10]");
  }
  if (n_noise < 0) fail("n_noise must be non-negative");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    fail("noise_sd must be finite and non-negative");
  }
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    fail("missing_rate must lie in [0, 1)");
  }
  if (class_mix.empty()) fail("class_mix is empty");
  double total = 0.0;
  std::set<std::string> names;
  for (const auto& [name, fraction] : class_mix) {
    if (name.empty()) fail("class names are non-empty");
    if (!names.insert(name).second) fail("duplicate class " + name);
    if (!(fraction >= 0.0)) fail("class fractions are non-negative");
    total += fraction;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("class fractions must sum to 1");
}

double LandcoverOffset(std::string_view landcover) noexcept {
  if (landcover == "Cropland") return -0.1;
  if (landcover == "Grassland") return 0.2;
  return 0.0;
}

double LatentResponse(std::span<const double> u, std::string_view landcover) {
  const std::size_t n = u.size();
  const double pi = std::numbers::pi;
  double s = 0.0;
  if (n > 1) s += 10.0 * std::sin(pi * u[0] * u[1]);
  if (n > 2) s += 20.0 * (u[2] - 0.5) * (u[2] - 0.5);
  if (n > 3) s += 10.0 * u[3];
  if (n > 4) s += 5.0 * u[4];
  if (n > 5) s += 5.0 * std::sin(2.0 * pi * u[5]);
  if (n > 7) s += 8.0 * u[6] * u[7];
  if (n > 8) s += 6.0 * std::abs(u[8] - 0.5);
  if (n > 9) s += 4.0 * u[9];
  return kIntercept + kScale * s + LandcoverOffset(landcover);
}

std::vector<std::string> InformativeFeatureNames(const SynthSpec& spec) {
  std::vector<std::string> names;
  char buffer[32];
  for (int i = 0; i < spec.n_informative; ++i) {
    std::snprintf(buffer, sizeof(buffer), "inf_%02d", i);
    names.emplace_back(buffer);
  }
  return names;
}

std::vector<std::string> SynthFeatureNames(const SynthSpec& spec) {
  std::vector<std::string> names = InformativeFeatureNames(spec);
  char buffer[32];
  for (int i = 0; i < spec.n_noise; ++i) {
    std::snprintf(buffer, sizeof(buffer), "noise_%02d", i);
    names.emplace_back(buffer);
  }
  return names;
}

Dataset Generate(const SynthSpec& spec) {
  spec.Validate();
  const std::size_t n = spec.n_rows;
  const auto m = static_cast<std::size_t>(spec.n_features());
  const auto n_inf = static_cast<std::size_t>(spec.n_informative);

  std::vector<double> truth(n * m);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      truth[r * m + c] = Uniform(spec.seed, r, c, kFeatureStream);
    }
  }

  // Landcover by rank of the last informative feature.
  const std::size_t driver = n_inf - 1;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return truth[a * m + driver] < truth[b * m + driver];
  });
  const std::vector<std::size_t> counts = ClassCounts(spec);
  std::vector<std::size_t> class_of_row(n);
  {
    std::size_t rank = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
      for (std::size_t i = 0; i < counts[c]; ++i) class_of_row[order[rank++]] = c;
    }
  }

  Dataset ds;
  ds.target.scale = TargetScale::kOriginal;
  ds.target.values.resize(n);
  ds.landcover.reserve(n);
  std::vector<std::string> ids;
  ids.reserve(n);
  std::vector<double> values(n * m);
  std::vector<std::uint8_t> missing(n * m, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::string& cls = spec.class_mix[class_of_row[r]].first;
    const double latent = LatentResponse(
        std::span<const double>(truth.data() + r * m, n_inf), cls);
    const double noise =
        spec.noise_sd > 0.0 ? spec.noise_sd * Gaussian(spec.seed, r, kNoiseStream)
                            : 0.0;
    ds.target.values[r] = InverseTransformValue(latent + noise);
    ds.landcover.emplace_back(cls);
    ids.push_back(std::to_string(r));
    for (std::size_t c = 0; c < m; ++c) {
      const bool drop = spec.missing_rate > 0.0 &&
                        Uniform(spec.seed, r, c, kMissingStream) < spec.missing_rate;
      missing[r * m + c] = drop ? 1 : 0;
      values[r * m + c] = drop ? 0.0 : truth[r * m + c];
    }
  }
  ds.features = FeatureTable(SynthFeatureNames(spec), n, std::move(values),
                             std::move(missing));
  ds.ids = std::move(ids);
  return ds;
}

std::vector<double> NoiselessLatent(const SynthSpec& spec, const Dataset& ds) {
  spec.Validate();
  const std::vector<std::string> names = InformativeFeatureNames(spec);
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    const auto c = ds.features.ColumnIndex(name);
    if (!c) throw Error(ErrorCode::kMissingFeature, name);
    cols.push_back(*c);
  }
  // Missing cells hide the true value; recover it from the row id stream.
  std::vector<double> out(ds.n_rows());
  std::vector<double> u(cols.size());
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (!ds.features.is_missing(r, cols[j])) {
        u[j] = ds.features.value(r, cols[j]);
      } else if (ds.ids) {
        const std::uint64_t source_row = std::stoull((*ds.ids)[r]);
        u[j] = Uniform(spec.seed, source_row, j, kFeatureStream);
      } else {
        throw Error(ErrorCode::kInvalidSpec,
                    "missing informative value without a row id");
      }
    }
    out[r] = LatentResponse(u, ds.landcover[r].name());
  }
  return out;
}

double LatentVariance(const SynthSpec& spec, std::size_t samples) {
  spec.Validate();
  const auto n_inf = static_cast<std::size_t>(spec.n_informative);
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& entry : spec.class_mix) {
    acc += entry.second;
    cumulative.push_back(acc);
  }
  std::vector<double> u(n_inf);
  // Welford accumulation.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t j = 0; j < n_inf; ++j) {
      u[j] = Uniform(spec.seed, i, j, kVarianceStream);
    }
    std::size_t cls = 0;
    while (cls + 1 < cumulative.size() && u[n_inf - 1] >= cumulative[cls]) ++cls;
    const double z = LatentResponse(u, spec.class_mix[cls].first);
    const double delta = z - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (z - mean);
  }
  return samples > 1 ? m2 / static_cast<double>(samples - 1) : 0.0;
}

double OracleR2Ceiling(const SynthSpec& spec, std::size_t samples) {
  const double signal = LatentVariance(spec, samples);
  const double noise = spec.noise_sd * spec.noise_sd;
  return signal / (signal + noise);
}

}  // namespace soiln
