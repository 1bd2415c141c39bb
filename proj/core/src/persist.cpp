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

#include "soiln/persist.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "csv.hpp"
#include "json.hpp"
#include "soiln/error.hpp"

namespace soiln {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void Corrupt(const std::string& why) {
  throw Error(ErrorCode::kCorruptModel, why);
}

std::string Hex64(std::uint64_t v) {
  char buffer[24];
  std::snprintf(buffer, sizeof(buffer), "%016" PRIx64, v);
  return buffer;
}

std::uint64_t ParseHex64(const std::string& text) {
  if (text.empty() || text.size() > 16) Corrupt("bad feature_hash");
  std::uint64_t v = 0;
  for (const char c : text) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else Corrupt("bad feature_hash");
  }
  return v;
}

Json NodeToJson(const TreeNode& node, const Ensemble& model) {
  Json j = Json::object();
  if (node.is_leaf()) {
    j["kind"] = "leaf";
    j["value"] = node.value;
  } else {
    j["kind"] = "split";
    j["feature"] = model.feature_names.at(node.feature);
    j["threshold"] = node.threshold;
    j["default_left"] = node.default_left;
    j["left"] = node.left;
    j["right"] = node.right;
  }
  if (!std::isnan(node.cover)) j["cover"] = node.cover;
  if (!std::isnan(node.gain)) j["gain"] = node.gain;
  return j;
}

double FiniteNumber(const Json& j, const char* key, const std::string& where) {
  const Json& v = j.at(key);
  if (!v.is_number()) Corrupt(where + ": " + key + " is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) Corrupt(where + ": " + key + " is not finite");
  return d;
}

TreeNode NodeFromJson(const Json& j, const std::unordered_map<std::string, std::uint32_t>& index,
                      const std::string& where) {
  if (!j.is_object()) Corrupt(where + " is not an object");
  TreeNode node;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "leaf") {
    node.value = FiniteNumber(j, "value", where);
  } else if (kind == "split") {
    const std::string name = j.at("feature").get<std::string>();
    const auto it = index.find(name);
    if (it == index.end()) Corrupt(where + ": unknown feature '" + name + "'");
    node.feature = it->second;
    node.threshold = FiniteNumber(j, "threshold", where);
    node.default_left = j.at("default_left").get<bool>();
    node.left = j.at("left").get<std::int32_t>();
    node.right = j.at("right").get<std::int32_t>();
    if (node.left < 0 || node.right < 0) Corrupt(where + ": negative child index");
  } else {
    Corrupt(where + ": unknown node kind '" + kind + "'");
  }
  if (j.contains("cover")) node.cover = FiniteNumber(j, "cover", where);
  if (j.contains("gain")) node.gain = FiniteNumber(j, "gain", where);
  return node;
}

Ensemble Decode(const Json& doc) {
  if (!doc.is_object()) Corrupt("model file is not a JSON object");
  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
    Corrupt("format_version is missing");
  }
  const auto version = doc["format_version"].get<std::int64_t>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::kUnsupportedVersion,
                "format_version " + std::to_string(version) + " (reader supports " +
                    std::to_string(kModelFormatVersion) + ")");
  }

  Ensemble model;
  const std::string mode = doc.at("mode").get<std::string>();
  if (mode == "gbdt") {
    model.mode = EnsembleMode::kGbdt;
  } else if (mode == "extratrees") {
    model.mode = EnsembleMode::kExtraTrees;
  } else {
    Corrupt("unknown mode '" + mode + "'");
  }
  model.base_score = FiniteNumber(doc, "base_score", "model");
  model.learning_rate = FiniteNumber(doc, "learning_rate", "model");

  const Json& transform = doc.at("target_transform");
  if (transform.at("scale_factor").get<double>() != kTargetScaleFactor ||
      transform.at("log").get<std::string>() != "natural") {
    Corrupt("unsupported target_transform");
  }
  model.target_scale = TargetScale::kTransformedLog;

  model.feature_names = doc.at("selected_features").get<std::vector<std::string>>();
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
    if (!index.emplace(model.feature_names[i], static_cast<std::uint32_t>(i)).second) {
      Corrupt("duplicate feature '" + model.feature_names[i] + "'");
    }
  }

  const Json& trees = doc.at("trees");
  if (!trees.is_array()) Corrupt("trees is not an array");
  model.trees.reserve(trees.size());
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const Json& jt = trees[t];
    const std::string where = "tree " + std::to_string(t);
    RegressionTree tree;
    tree.root = jt.at("root").get<std::int32_t>();
    tree.max_depth_reached = jt.at("max_depth_reached").get<int>();
    const Json& nodes = jt.at("nodes");
    if (!nodes.is_array()) Corrupt(where + ": nodes is not an array");
    tree.nodes.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      tree.nodes.push_back(
          NodeFromJson(nodes[i], index, where + " node " + std::to_string(i)));
    }
    model.trees.push_back(std::move(tree));
  }

  if (doc.contains("training_meta")) {
    const Json& meta = doc["training_meta"];
    model.training_params = ParamMapFromJson(meta.at("params").dump());
    model.seed = meta.at("seed").get<std::uint64_t>();
    const Json& fp = meta.at("fingerprint");
    model.fingerprint.n_rows = fp.at("n_rows").get<std::size_t>();
    model.fingerprint.feature_hash = ParseHex64(fp.at("feature_hash").get<std::string>());
  }
  model.Validate();
  return model;
}

}  // namespace

std::string ModelToJson(const Ensemble& model) {
  Json doc = Json::object();
  doc["format_version"] = kModelFormatVersion;
  doc["mode"] = model.mode == EnsembleMode::kGbdt ? "gbdt" : "extratrees";
  doc["base_score"] = model.base_score;
  doc["learning_rate"] = model.learning_rate;
  doc["target_transform"] = {{"scale_factor", kTargetScaleFactor}, {"log", "natural"}};
  doc["selected_features"] = model.feature_names;
  Json trees = Json::array();
  for (const auto& tree : model.trees) {
    Json nodes = Json::array();
    for (const auto& node : tree.nodes) nodes.push_back(NodeToJson(node, model));
    Json jt = Json::object();
    jt["root"] = tree.root;
    jt["max_depth_reached"] = tree.max_depth_reached;
    jt["nodes"] = std::move(nodes);
    trees.push_back(std::move(jt));
  }
  doc["trees"] = std::move(trees);
  doc["training_meta"] = {
      {"params", Json::parse(ParamMapToJson(model.training_params))},
      {"seed", model.seed},
      {"fingerprint",
       {{"n_rows", model.fingerprint.n_rows},
        {"feature_hash", Hex64(model.fingerprint.feature_hash)}}},
  };
  return doc.dump(1) + "\n";
}

Ensemble ModelFromJson(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Corrupt(std::string("unreadable model file: ") + e.what());
  }
  try {
    return Decode(doc);
  } catch (const nlohmann::json::exception& e) {
    Corrupt(std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) Corrupt(e.detail());
    throw;
  }
}

void SaveModel(const Ensemble& model, const std::filesystem::path& path) {
  internal::WriteFileAtomic(path, ModelToJson(model));
}

Ensemble LoadModel(const std::filesystem::path& path) {
  return ModelFromJson(internal::ReadFile(path));
}

}  // namespace soiln
