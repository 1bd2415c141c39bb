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

#include "soiln/params.hpp"

#include <cmath>

#include "csv.hpp"
#include "json.hpp"
#include "soiln/error.hpp"
#include "soiln/trees.hpp"

namespace soiln {

double AsDouble(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    return static_cast<double>(*i);
  }
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw Error(ErrorCode::kInvalidParams,
              "expected a number, got '" + std::get<std::string>(v) + "'");
}

std::int64_t AsInt(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) {
    if (std::nearbyint(*d) == *d) return static_cast<std::int64_t>(*d);
    throw Error(ErrorCode::kInvalidParams,
                "expected an integer, got " + internal::FormatDouble(*d));
  }
  throw Error(ErrorCode::kInvalidParams,
              "expected an integer, got '" + std::get<std::string>(v) + "'");
}

std::string ParamToString(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) {
    return internal::FormatDouble(*d);
  }
  return std::get<std::string>(v);
}

std::string ParamMapToString(const ParamMap& params) {
  std::string out;
  for (const auto& [name, value] : params) {
    if (!out.empty()) out += ';';
    out += name;
    out += '=';
    out += ParamToString(value);
  }
  return out;
}

std::string ParamMapToJson(const ParamMap& params) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [name, value] : params) {
    std::visit([&](const auto& v) { doc[name] = v; }, value);
  }
  return doc.dump(2) + "\n";
}

ParamMap ParamMapFromJson(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("params: ") + e.what());
  }
  if (!doc.is_object()) {
    throw Error(ErrorCode::kParseError, "params: expected a JSON object");
  }
  ParamMap params;
  for (const auto& [name, value] : doc.items()) {
    if (value.is_number_integer()) {
      params[name] = value.get<std::int64_t>();
    } else if (value.is_number()) {
      params[name] = value.get<double>();
    } else if (value.is_string()) {
      params[name] = value.get<std::string>();
    } else {
      throw Error(ErrorCode::kParseError, "params: bad value for " + name);
    }
  }
  return params;
}

namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidParams, what);
}

}  // namespace

void GbdtParams::Validate() const {
  Require(n_trees >= 0, "n_trees must be non-negative");
  Require(std::isfinite(learning_rate) && learning_rate > 0.0,
          "learning_rate must be positive");
  Require(max_depth >= 1 && max_depth <= 30, "max_depth must lie in [1, 30]");
  Require(std::isfinite(min_child_weight) && min_child_weight >= 0.0,
          "min_child_weight must be non-negative");
  Require(std::isfinite(l2_lambda) && l2_lambda >= 0.0,
          "l2_lambda must be non-negative");
  Require(subsample_rows > 0.0 && subsample_rows <= 1.0,
          "subsample_rows must lie in (0, 1]");
  Require(subsample_cols > 0.0 && subsample_cols <= 1.0,
          "subsample_cols must lie in (0, 1]");
  Require(n_bins >= 2 && n_bins <= 256, "n_bins must lie in [2, 256]");
}

ParamMap GbdtParams::ToMap() const {
  return {{"n_trees", std::int64_t{n_trees}},
          {"learning_rate", learning_rate},
          {"max_depth", std::int64_t{max_depth}},
          {"min_child_weight", min_child_weight},
          {"l2_lambda", l2_lambda},
          {"subsample_rows", subsample_rows},
          {"subsample_cols", subsample_cols},
          {"n_bins", std::int64_t{n_bins}},
          {"seed", static_cast<std::int64_t>(seed)}};
}

GbdtParams GbdtParams::FromMap(const ParamMap& params) {
  return FromMap(params, GbdtParams{});
}

GbdtParams GbdtParams::FromMap(const ParamMap& params, GbdtParams base) {
  for (const auto& [name, value] : params) {
    if (name == "n_trees") {
      base.n_trees = static_cast<int>(AsInt(value));
    } else if (name == "learning_rate") {
      base.learning_rate = AsDouble(value);
    } else if (name == "max_depth") {
      base.max_depth = static_cast<int>(AsInt(value));
    } else if (name == "min_child_weight") {
      base.min_child_weight = AsDouble(value);
    } else if (name == "l2_lambda") {
      base.l2_lambda = AsDouble(value);
    } else if (name == "subsample_rows") {
      base.subsample_rows = AsDouble(value);
    } else if (name == "subsample_cols") {
      base.subsample_cols = AsDouble(value);
    } else if (name == "n_bins") {
      base.n_bins = static_cast<int>(AsInt(value));
    } else if (name == "seed") {
      base.seed = static_cast<std::uint64_t>(AsInt(value));
    } else {
      throw Error(ErrorCode::kInvalidParams, "unknown GBDT parameter " + name);
    }
  }
  return base;
}

void ExtraTreesParams::Validate(std::size_t n_cols) const {
  Require(n_trees >= 0, "n_trees must be non-negative");
  Require(max_depth >= 0, "max_depth must be non-negative (0 = unlimited)");
  Require(min_samples_leaf >= 1, "min_samples_leaf must be at least 1");
  Require(n_candidate_features >= 0 &&
              static_cast<std::size_t>(n_candidate_features) <= n_cols,
          "n_candidate_features must lie in [0, n_cols]");
}

ParamMap ExtraTreesParams::ToMap() const {
  return {{"n_trees", std::int64_t{n_trees}},
          {"max_depth", std::int64_t{max_depth}},
          {"min_samples_leaf", std::int64_t{min_samples_leaf}},
          {"n_candidate_features", std::int64_t{n_candidate_features}},
          {"seed", static_cast<std::int64_t>(seed)}};
}

ExtraTreesParams ExtraTreesParams::FromMap(const ParamMap& params) {
  return FromMap(params, ExtraTreesParams{});
}

ExtraTreesParams ExtraTreesParams::FromMap(const ParamMap& params,
                                           ExtraTreesParams base) {
  for (const auto& [name, value] : params) {
    if (name == "n_trees") {
      base.n_trees = static_cast<int>(AsInt(value));
    } else if (name == "max_depth") {
      base.max_depth = static_cast<int>(AsInt(value));
    } else if (name == "min_samples_leaf") {
      base.min_samples_leaf = static_cast<int>(AsInt(value));
    } else if (name == "n_candidate_features") {
      base.n_candidate_features = static_cast<int>(AsInt(value));
    } else if (name == "seed") {
      base.seed = static_cast<std::uint64_t>(AsInt(value));
    } else {
      throw Error(ErrorCode::kInvalidParams,
                  "unknown ExtraTrees parameter " + name);
    }
  }
  return base;
}

}  // namespace soiln
