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

#include "soiln/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "soiln/error.hpp"
#include "soiln/metrics.hpp"
#include "soiln/random.hpp"

namespace soiln {
namespace {

constexpr std::uint64_t kSuggestStream = 0x7e;

[[noreturn]] void BadSpace(const std::string& why) {
  throw Error(ErrorCode::kInvalidParams, "param space: " + why);
}

// Bounds of a numeric dim in sampling scale (log for log dims, widened by
// half a unit for integers so rounding gives every value equal width).
std::pair<double, double> SamplingBounds(const ParamDim& dim) {
  if (dim.kind == DimKind::kInteger) return {dim.low - 0.5, dim.high + 0.5};
  if (dim.log_scale) return {std::log(dim.low), std::log(dim.high)};
  return {dim.low, dim.high};
}

double ToSampling(const ParamDim& dim, const ParamValue& v) {
  const double x = AsDouble(v);
  return dim.kind == DimKind::kContinuous && dim.log_scale ? std::log(x) : x;
}

ParamValue FromSampling(const ParamDim& dim, double x) {
  if (dim.kind == DimKind::kInteger) {
    const double r = std::clamp(std::nearbyint(x), dim.low, dim.high);
    return static_cast<std::int64_t>(r);
  }
  double v = dim.log_scale ? std::exp(x) : x;
  return std::clamp(v, dim.low, dim.high);
}

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Mixture of Gaussians truncated to [low, high], one component per
// observation plus a broad prior component.
class ParzenEstimator {
 public:
  ParzenEstimator(std::vector<double> observations, double low, double high)
      : low_(low), high_(high) {
    const double range = high - low;
    const double prior_mu = 0.5 * (low + high);
    observations.push_back(prior_mu);
    std::vector<std::size_t> order(observations.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return observations[a] < observations[b];
    });
    const std::size_t n = observations.size();
    const double min_sigma =
        range / std::min(100.0, 1.0 + static_cast<double>(n - 1));
    mu_.resize(n);
    sigma_.resize(n);
    for (std::size_t i = 0; i < n; ++i) mu_[i] = observations[order[i]];
    for (std::size_t i = 0; i < n; ++i) {
      const double left = i > 0 ? mu_[i] - mu_[i - 1] : mu_[i] - low;
      const double right = i + 1 < n ? mu_[i + 1] - mu_[i] : high - mu_[i];
      sigma_[i] = std::clamp(std::max(left, right), min_sigma, range);
      if (order[i] == n - 1) sigma_[i] = range;
    }
    mass_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      mass_[i] = NormalCdf((high - mu_[i]) / sigma_[i]) -
                 NormalCdf((low - mu_[i]) / sigma_[i]);
    }
  }

  double Sample(Rng& rng) const {
    const std::size_t i = rng.UniformInt(mu_.size());
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double x = mu_[i] + sigma_[i] * rng.Normal();
      if (x >= low_ && x < high_) return x;
    }
    return std::clamp(mu_[i], low_, high_);
  }

  double LogDensity(double x) const {
    double total = 0.0;
    for (std::size_t i = 0; i < mu_.size(); ++i) {
      const double t = (x - mu_[i]) / sigma_[i];
      total += std::exp(-0.5 * t * t) /
               (sigma_[i] * std::sqrt(2.0 * std::numbers::pi) * mass_[i]);
    }
    return std::log(total / static_cast<double>(mu_.size()));
  }

  // Probability of the unit-width bucket centred on integer k.
  double LogBucketMass(double k) const {
    double total = 0.0;
    for (std::size_t i = 0; i < mu_.size(); ++i) {
      const double hi = NormalCdf((k + 0.5 - mu_[i]) / sigma_[i]);
      const double lo = NormalCdf((k - 0.5 - mu_[i]) / sigma_[i]);
      total += (hi - lo) / mass_[i];
    }
    return std::log(std::max(total / static_cast<double>(mu_.size()),
                             std::numeric_limits<double>::min()));
  }

 private:
  double low_;
  double high_;
  std::vector<double> mu_;
  std::vector<double> sigma_;
  std::vector<double> mass_;
};

class CategoricalEstimator {
 public:
  CategoricalEstimator(const ParamDim& dim, std::span<const Trial* const> trials)
      : weights_(dim.choices.size(), 1.0) {
    for (const Trial* trial : trials) {
      const auto& choice = std::get<std::string>(trial->params.at(dim.name));
      const auto it = std::find(dim.choices.begin(), dim.choices.end(), choice);
      if (it != dim.choices.end()) weights_[it - dim.choices.begin()] += 1.0;
    }
    total_ = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  }

  std::size_t Sample(Rng& rng) const {
    double u = rng.Uniform01() * total_;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (u < weights_[i]) return i;
      u -= weights_[i];
    }
    return weights_.size() - 1;
  }

  double LogProbability(std::size_t i) const {
    return std::log(weights_[i] / total_);
  }

 private:
  std::vector<double> weights_;
  double total_ = 0.0;
};

ParamMap UniformSample(const ParamSpace& space, Rng& rng) {
  ParamMap out;
  for (const auto& dim : space.dims) {
    switch (dim.kind) {
      case DimKind::kCategorical:
        out[dim.name] = dim.choices[rng.UniformInt(dim.choices.size())];
        break;
      case DimKind::kInteger: {
        const auto low = static_cast<std::int64_t>(dim.low);
        const auto span = static_cast<std::uint64_t>(dim.high - dim.low) + 1;
        out[dim.name] = low + static_cast<std::int64_t>(rng.UniformInt(span));
        break;
      }
      case DimKind::kContinuous: {
        const auto [a, b] = SamplingBounds(dim);
        out[dim.name] = FromSampling(dim, rng.Uniform(a, b));
        break;
      }
    }
  }
  return out;
}

ParamMap TpeSample(std::span<const Trial> history, const ParamSpace& space,
                   const TunerConfig& cfg, Rng& rng) {
  std::vector<const Trial*> sorted;
  sorted.reserve(history.size());
  for (const auto& trial : history) sorted.push_back(&trial);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Trial* a, const Trial* b) {
    if (a->score != b->score) return a->score < b->score;
    return a->index < b->index;
  });
  const std::size_t n = sorted.size();
  std::size_t n_good = static_cast<std::size_t>(std::ceil(cfg.gamma * static_cast<double>(n)));
  n_good = std::clamp<std::size_t>(n_good, 1, n - 1);
  const std::span<const Trial* const> good(sorted.data(), n_good);
  const std::span<const Trial* const> bad(sorted.data() + n_good, n - n_good);

  const auto candidates = static_cast<std::size_t>(cfg.n_candidates);
  std::vector<ParamMap> drawn(candidates);
  std::vector<double> score(candidates, 0.0);
  for (const auto& dim : space.dims) {
    if (dim.kind == DimKind::kCategorical) {
      const CategoricalEstimator l(dim, good);
      const CategoricalEstimator g(dim, bad);
      for (std::size_t c = 0; c < candidates; ++c) {
        const std::size_t i = l.Sample(rng);
        drawn[c][dim.name] = dim.choices[i];
        score[c] += l.LogProbability(i) - g.LogProbability(i);
      }
      continue;
    }
    const auto [a, b] = SamplingBounds(dim);
    auto observations = [&](std::span<const Trial* const> trials) {
      std::vector<double> xs;
      xs.reserve(trials.size());
      for (const Trial* t : trials) xs.push_back(ToSampling(dim, t->params.at(dim.name)));
      return xs;
    };
    const ParzenEstimator l(observations(good), a, b);
    const ParzenEstimator g(observations(bad), a, b);
    for (std::size_t c = 0; c < candidates; ++c) {
      const double x = l.Sample(rng);
      const ParamValue v = FromSampling(dim, x);
      drawn[c][dim.name] = v;
      if (dim.kind == DimKind::kInteger) {
        const double k = AsDouble(v);
        score[c] += l.LogBucketMass(k) - g.LogBucketMass(k);
      } else {
        const double xs = ToSampling(dim, v);
        score[c] += l.LogDensity(xs) - g.LogDensity(xs);
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates; ++c) {
    if (score[c] > score[best]) best = c;
  }
  return drawn[best];
}

}  // namespace

ParamDim ParamDim::Continuous(std::string name, double low, double high,
                              bool log_scale) {
  ParamDim d;
  d.name = std::move(name);
  d.kind = DimKind::kContinuous;
  d.low = low;
  d.high = high;
  d.log_scale = log_scale;
  return d;
}

ParamDim ParamDim::Integer(std::string name, std::int64_t low, std::int64_t high) {
  ParamDim d;
  d.name = std::move(name);
  d.kind = DimKind::kInteger;
  d.low = static_cast<double>(low);
  d.high = static_cast<double>(high);
  return d;
}

ParamDim ParamDim::Categorical(std::string name, std::vector<std::string> choices) {
  ParamDim d;
  d.name = std::move(name);
  d.kind = DimKind::kCategorical;
  d.choices = std::move(choices);
  return d;
}

bool ParamDim::Contains(const ParamValue& v) const {
  switch (kind) {
    case DimKind::kCategorical: {
      const auto* s = std::get_if<std::string>(&v);
      return s && std::find(choices.begin(), choices.end(), *s) != choices.end();
    }
    case DimKind::kInteger: {
      const auto* i = std::get_if<std::int64_t>(&v);
      return i && static_cast<double>(*i) >= low && static_cast<double>(*i) <= high;
    }
    case DimKind::kContinuous: {
      const auto* d = std::get_if<double>(&v);
      return d && *d >= low && *d <= high;
    }
  }
  return false;
}

void ParamSpace::Validate() const {
  if (dims.empty()) throw Error(ErrorCode::kEmptySpace, "no dimensions");
  std::set<std::string> names;
  for (const auto& dim : dims) {
    if (dim.name.empty()) BadSpace("unnamed dimension");
    if (!names.insert(dim.name).second) BadSpace("duplicate dimension " + dim.name);
    if (dim.kind == DimKind::kCategorical) {
      if (dim.choices.empty()) BadSpace(dim.name + " has no choices");
      continue;
    }
    if (!std::isfinite(dim.low) || !std::isfinite(dim.high) || !(dim.low < dim.high)) {
      BadSpace(dim.name + " needs finite low < high");
    }
    if (dim.log_scale && !(dim.low > 0.0)) BadSpace(dim.name + " log scale needs low > 0");
    if (dim.kind == DimKind::kInteger &&
        (dim.low != std::floor(dim.low) || dim.high != std::floor(dim.high))) {
      BadSpace(dim.name + " integer bounds must be whole");
    }
  }
}

bool ParamSpace::Contains(const ParamMap& params) const {
  if (params.size() != dims.size()) return false;
  for (const auto& dim : dims) {
    const auto it = params.find(dim.name);
    if (it == params.end() || !dim.Contains(it->second)) return false;
  }
  return true;
}

ParamSpace DefaultGbdtSpace() {
  return {{
      ParamDim::Continuous("learning_rate", 0.01, 0.3, true),
      ParamDim::Integer("n_trees", 100, 1000),
      ParamDim::Integer("max_depth", 3, 10),
      ParamDim::Continuous("min_child_weight", 0.1, 10.0, true),
      ParamDim::Continuous("l2_lambda", 0.1, 30.0, true),
      ParamDim::Continuous("subsample_rows", 0.6, 1.0),
      ParamDim::Continuous("subsample_cols", 0.5, 1.0),
  }};
}

ParamSpace DefaultExtraTreesSpace(std::size_t n_cols) {
  const auto cols = static_cast<std::int64_t>(std::max<std::size_t>(n_cols, 2));
  return {{
      ParamDim::Integer("n_trees", 50, 300),
      ParamDim::Integer("max_depth", 6, 30),
      ParamDim::Integer("min_samples_leaf", 1, 20),
      ParamDim::Integer("n_candidate_features", 1, cols),
  }};
}

void TunerConfig::Validate() const {
  auto require = [](bool ok, const char* why) {
    if (!ok) throw Error(ErrorCode::kInvalidParams, std::string("tuner: ") + why);
  };
  require(n_trials >= 1, "n_trials must be at least 1");
  require(n_startup >= 1 && n_startup <= n_trials, "n_startup must lie in [1, n_trials]");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(n_candidates >= 1, "n_candidates must be at least 1");
  require(k_folds >= 2, "k_folds must be at least 2");
  require(n_strata >= 1, "n_strata must be at least 1");
}

ParamMap Suggest(std::span<const Trial> history, const ParamSpace& space,
                 const TunerConfig& cfg) {
  space.Validate();
  cfg.Validate();
  Rng rng(HashKey(cfg.seed, history.size(), kSuggestStream));
  if (history.size() < static_cast<std::size_t>(cfg.n_startup) || history.size() < 2) {
    return UniformSample(space, rng);
  }
  return TpeSample(history, space, cfg, rng);
}

Trial CrossValidate(const TargetVector& z, const FoldAssignment& folds,
                    const ParamMap& params, const FoldTrainer& trainer) {
  if (folds.fold_of_row.size() != z.values.size()) {
    throw Error(ErrorCode::kFoldMismatch,
                "fold assignment covers " + std::to_string(folds.fold_of_row.size()) +
                    " rows, dataset has " + std::to_string(z.values.size()));
  }
  for (const int f : folds.fold_of_row) {
    if (f < 0 || f >= folds.k) throw Error(ErrorCode::kFoldMismatch, "fold index out of range");
  }
  Trial trial;
  trial.params = params;
  trial.folds_hash = folds.Hash();
  trial.seed = folds.seed;
  for (int fold = 0; fold < folds.k; ++fold) {
    const std::vector<std::size_t> valid = folds.RowsInFold(fold);
    const std::vector<std::size_t> train = folds.RowsOutsideFold(fold);
    if (valid.empty() || train.empty()) {
      throw Error(ErrorCode::kFoldMismatch, "fold " + std::to_string(fold) + " is empty");
    }
    const std::vector<double> pred = trainer(train, valid, params);
    std::vector<double> truth;
    truth.reserve(valid.size());
    for (const std::size_t r : valid) truth.push_back(z.values[r]);
    trial.fold_scores.push_back(Rmse(truth, pred));
  }
  double sum = 0.0;
  for (const double s : trial.fold_scores) sum += s;
  trial.score = sum / static_cast<double>(trial.fold_scores.size());
  return trial;
}

FoldTrainer GbdtFoldTrainer(const Dataset& ds, GbdtParams base) {
  // Bin tables are cached per bin count, since n_bins may be tuned.
  auto cache = std::make_shared<std::map<int, BinnedTable>>();
  return [&ds, base, cache](std::span<const std::size_t> train,
                            std::span<const std::size_t> valid,
                            const ParamMap& params) {
    const GbdtParams p = GbdtParams::FromMap(params, base);
    p.Validate();
    auto it = cache->find(p.n_bins);
    if (it == cache->end()) {
      it = cache->emplace(p.n_bins, BinFeatures(ds.features, p.n_bins)).first;
    }
    TargetVector y{{}, ds.target.scale};
    y.values.reserve(train.size());
    for (const std::size_t r : train) y.values.push_back(ds.target.values[r]);
    const Ensemble model = TrainGbdt(it->second.SelectRows(train), y, p);
    return Predict(model, ds.features.SelectRows(valid));
  };
}

FoldTrainer ExtraTreesFoldTrainer(const Dataset& ds, ExtraTreesParams base) {
  return [&ds, base](std::span<const std::size_t> train,
                     std::span<const std::size_t> valid, const ParamMap& params) {
    const ExtraTreesParams p = ExtraTreesParams::FromMap(params, base);
    const Ensemble model = TrainExtraTrees(ds.SelectRows(train), p);
    return Predict(model, ds.features.SelectRows(valid));
  };
}

Trial CrossValidateGbdt(const Dataset& ds, const GbdtParams& params,
                        const FoldAssignment& folds) {
  return CrossValidate(ds.target, folds, params.ToMap(), GbdtFoldTrainer(ds, params));
}

TuneResult Tune(const TargetVector& z, const FoldAssignment& folds,
                const ParamSpace& space, const TunerConfig& cfg,
                const FoldTrainer& trainer) {
  space.Validate();
  cfg.Validate();
  TuneResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.n_trials));
  for (int i = 0; i < cfg.n_trials; ++i) {
    const ParamMap params = Suggest(result.history, space, cfg);
    Trial trial = CrossValidate(z, folds, params, trainer);
    trial.index = i;
    trial.seed = cfg.seed;
    spdlog::debug("trial {}: {} -> {}", i, ParamMapToString(params), trial.score);
    if (result.history.empty() || trial.score < result.best_score) {
      result.best_score = trial.score;
      result.best_params = trial.params;
    }
    result.history.push_back(std::move(trial));
  }
  return result;
}

TuneResult TuneGbdt(const Dataset& ds, const ParamSpace& space,
                    const TunerConfig& cfg, const GbdtParams& base) {
  cfg.Validate();
  const FoldAssignment folds =
      StratifiedKFold(ds.target, cfg.k_folds, cfg.n_strata, cfg.seed);
  return Tune(ds.target, folds, space, cfg, GbdtFoldTrainer(ds, base));
}

std::string HistoryToCsv(std::span<const Trial> history) {
  std::vector<std::string> names;
  std::size_t k = 0;
  for (const auto& trial : history) {
    for (const auto& [name, value] : trial.params) {
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    k = std::max(k, trial.fold_scores.size());
  }
  std::sort(names.begin(), names.end());
  std::string out = "index";
  for (const auto& name : names) out += "," + internal::EscapeCsvField(name);
  for (std::size_t f = 0; f < k; ++f) out += ",fold_" + std::to_string(f + 1);
  out += ",score\n";
  for (const auto& trial : history) {
    out += std::to_string(trial.index);
    for (const auto& name : names) {
      out += ',';
      const auto it = trial.params.find(name);
      if (it != trial.params.end()) out += internal::EscapeCsvField(ParamToString(it->second));
    }
    for (std::size_t f = 0; f < k; ++f) {
      out += ',';
      if (f < trial.fold_scores.size()) out += internal::FormatDouble(trial.fold_scores[f]);
    }
    out += ',' + internal::FormatDouble(trial.score) + '\n';
  }
  return out;
}

}  // namespace soiln
