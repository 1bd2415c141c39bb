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

// Versioned JSON model files. See docs/model_format.md for the schema.

#ifndef SOILN_PERSIST_HPP_
#define SOILN_PERSIST_HPP_

#include <filesystem>
#include <string>
#include <string_view>

#include "soiln/trees.hpp"

namespace soiln {

inline constexpr int kModelFormatVersion = 1;

std::string ModelToJson(const Ensemble& model);

// Throws UnsupportedVersion or CorruptModel.
Ensemble ModelFromJson(std::string_view text);

// Atomic write; throws Io.
void SaveModel(const Ensemble& model, const std::filesystem::path& path);
Ensemble LoadModel(const std::filesystem::path& path);

}  // namespace soiln

#endif  // SOILN_PERSIST_HPP_
