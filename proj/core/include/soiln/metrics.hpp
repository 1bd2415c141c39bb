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

#ifndef SOILN_METRICS_HPP_
#define SOILN_METRICS_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "soiln/data.hpp"

namespace soiln {

double Rmse(std::span<const double> y, std::span<const double> yhat);
double Mae(std::span<const double> y, std::span<const double> yhat);
// Percent. Every y must be strictly positive (ZeroTarget otherwise).
double Mape(std::span<const double> y, std::span<const double> yhat);
// Throws ZeroVariance when y is constant (including a single element).
double R2(std::span<const double> y, std::span<const double> yhat);

struct MetricSet {
  double rmse = 0.0;
  double mae = 0.0;
  double mape_percent = 0.0;
  std::optional<double> r2;  // absent when undefined (n < 2 or constant y)
  std::size_t n = 0;
};

// Errors in original target units, overall and per landcover class.
struct EvalReport {
  MetricSet overall;
  std::map<std::string, MetricSet> per_class;
  std::size_t n_total = 0;
};

// Inverse-transforms the predictions first, then scores them against the
// original-scale truth.
EvalReport Evaluate(const TargetVector& y_true,
                    std::span<const double> y_pred_transformed,
                    std::span<const Landcover> labels);

std::string ReportToJson(const EvalReport& report);

// Comparison-table layout: method, mape_total, mape_crop, mape_grass,
// mae_total, mae_crop, mae_grass, features, parameters.
std::string ComparisonCsvHeader();
std::string ComparisonCsvRow(const std::string& method, const EvalReport& report,
                             const std::string& features,
                             const std::string& parameters);

}  // namespace soiln

#endif  // SOILN_METRICS_HPP_
