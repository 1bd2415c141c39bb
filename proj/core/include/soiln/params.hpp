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

#ifndef SOILN_PARAMS_HPP_
#define SOILN_PARAMS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <variant>

namespace soiln {

// A hyperparameter value: integer, real, or categorical choice.
using ParamValue = std::variant<std::int64_t, double, std::string>;
// Ordered by name so iteration (and serialization) is deterministic.
using ParamMap = std::map<std::string, ParamValue>;

double AsDouble(const ParamValue& v);
std::int64_t AsInt(const ParamValue& v);
std::string ParamToString(const ParamValue& v);

// Compact "name=value;name=value" rendering used in tables.
std::string ParamMapToString(const ParamMap& params);

// JSON object text with numbers for numeric values.
std::string ParamMapToJson(const ParamMap& params);
ParamMap ParamMapFromJson(const std::string& text);

}  // namespace soiln

#endif  // SOILN_PARAMS_HPP_
