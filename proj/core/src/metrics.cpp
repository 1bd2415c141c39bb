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

#include "soiln/metrics.hpp"

#include <cmath>
#include <vector>

#include "csv.hpp"
#include "json.hpp"
#include "soiln/error.hpp"

namespace soiln {
namespace {

void CheckPair(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(y.size()) + " vs " + std::to_string(yhat.size()));
  }
  if (y.empty()) throw Error(ErrorCode::kEmpty, "no observations");
}

MetricSet Score(std::span<const double> y, std::span<const double> yhat) {
  MetricSet m;
  m.n = y.size();
  m.rmse = Rmse(y, yhat);
  m.mae = Mae(y, yhat);
  m.mape_percent = Mape(y, yhat);
  if (y.size() >= 2) {
    try {
      m.r2 = R2(y, yhat);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kZeroVariance) throw;
    }
  }
  return m;
}

nlohmann::ordered_json ToJson(const MetricSet& m) {
  nlohmann::ordered_json j;
  j["n"] = m.n;
  j["rmse"] = m.rmse;
  j["mae"] = m.mae;
  j["mape_percent"] = m.mape_percent;
  j["r2"] = m.r2 ? nlohmann::ordered_json(*m.r2) : nlohmann::ordered_json();
  return j;
}

std::string Cell(const std::optional<double>& v) {
  return v ? internal::FormatDouble(*v) : std::string();
}

}  // namespace

double Rmse(std::span<const double> y, std::span<const double> yhat) {
  CheckPair(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(y.size()));
}

double Mae(std::span<const double> y, std::span<const double> yhat) {
  CheckPair(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += std::abs(y[i] - yhat[i]);
  return sum / static_cast<double>(y.size());
}

double Mape(std::span<const double> y, std::span<const double> yhat) {
  CheckPair(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) {
      throw Error(ErrorCode::kZeroTarget, "row " + std::to_string(i));
    }
    sum += std::abs(y[i] - yhat[i]) / std::abs(y[i]);
  }
  return 100.0 * sum / static_cast<double>(y.size());
}

double R2(std::span<const double> y, std::span<const double> yhat) {
  CheckPair(y, yhat);
  double mean = 0.0;
  for (const double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (!(ss_tot > 0.0)) throw Error(ErrorCode::kZeroVariance, "constant target");
  return 1.0 - ss_res / ss_tot;
}

EvalReport Evaluate(const TargetVector& y_true,
                    std::span<const double> y_pred_transformed,
                    std::span<const Landcover> labels) {
  if (y_true.scale != TargetScale::kOriginal) {
    throw Error(ErrorCode::kAlreadyTransformed,
                "evaluation expects original-scale truth");
  }
  if (y_true.values.size() != y_pred_transformed.size() ||
      labels.size() != y_pred_transformed.size()) {
    throw Error(ErrorCode::kLengthMismatch, "truth, predictions and labels");
  }
  std::vector<double> pred(y_pred_transformed.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = InverseTransformValue(y_pred_transformed[i]);
  }

  EvalReport report;
  report.n_total = pred.size();
  report.overall = Score(y_true.values, pred);

  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
      groups;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto& [ys, ps] = groups[labels[i].name()];
    ys.push_back(y_true.values[i]);
    ps.push_back(pred[i]);
  }
  for (const auto& [name, group] : groups) {
    report.per_class[name] = Score(group.first, group.second);
  }
  return report;
}

std::string ReportToJson(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["scale"] = "original";
  doc["n_total"] = report.n_total;
  doc["overall"] = ToJson(report.overall);
  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  for (const auto& [name, m] : report.per_class) classes[name] = ToJson(m);
  doc["per_class"] = std::move(classes);
  return doc.dump(2) + "\n";
}

std::string ComparisonCsvHeader() {
  return "method,mape_total,mape_crop,mape_grass,mae_total,mae_crop,mae_grass,"
         "features,parameters\n";
}

std::string ComparisonCsvRow(const std::string& method, const EvalReport& report,
                             const std::string& features,
                             const std::string& parameters) {
  auto class_metric = [&](const char* name, double MetricSet::*field) {
    const auto it = report.per_class.find(name);
    return it == report.per_class.end()
               ? std::optional<double>()
               : std::optional<double>(it->second.*field);
  };
  std::string row = internal::EscapeCsvField(method);
  for (const auto& v :
       {std::optional<double>(report.overall.mape_percent),
        class_metric("Cropland", &MetricSet::mape_percent),
        class_metric("Grassland", &MetricSet::mape_percent),
        std::optional<double>(report.overall.mae),
        class_metric("Cropland", &MetricSet::mae),
        class_metric("Grassland", &MetricSet::mae)}) {
    row += ',';
    row += Cell(v);
  }
  row += ',';
  row += internal::EscapeCsvField(features);
  row += ',';
  row += internal::EscapeCsvField(parameters);
  row += '\n';
  return row;
}

}  // namespace soiln
