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

#ifndef SOILN_SRC_CSV_HPP_
#define SOILN_SRC_CSV_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace soiln::internal {

// Splits one CSV record. Double-quoted fields may contain commas and "".
std::vector<std::string> SplitCsvRecord(std::string_view line);

// Quotes a field only when it needs it.
std::string EscapeCsvField(std::string_view field);

std::string_view Trim(std::string_view s) noexcept;

bool IsMissingToken(std::string_view token) noexcept;

// Strict decimal parse of the whole token; nullopt on any trailing garbage.
std::optional<double> ParseDouble(std::string_view token) noexcept;

// Shortest decimal rendering that round-trips to the same double.
std::string FormatDouble(double value);

std::string ReadFile(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over `path`.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);

}  // namespace soiln::internal

#endif  // SOILN_SRC_CSV_HPP_
