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

#ifndef SOILN_ERROR_HPP_
#define SOILN_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace soiln {

enum class ErrorCode {
  // data
  kMissingColumn,
  kParseError,
  kNonPositiveTarget,
  kDimensionMismatch,
  kDuplicateId,
  kAlreadyTransformed,
  kAlreadyOriginal,
  kClassTooSmall,
  kInvalidFraction,
  kInvalidK,
  // trees
  kEmptyDataset,
  kInvalidParams,
  kMissingFeature,
  // shap
  kMissingCoverCounts,
  kEmptyMatrix,
  // tuner
  kEmptySpace,
  kFoldMismatch,
  // metrics
  kLengthMismatch,
  kEmpty,
  kZeroTarget,
  kZeroVariance,
  // synth
  kInvalidSpec,
  // persist
  kUnsupportedVersion,
  kCorruptModel,
  kIo,
  // cli
  kSchemaMismatch,
  kLocked,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure surfaced by the library is a soiln::Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kNonPositiveTarget: return "NonPositiveTarget";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kAlreadyTransformed: return "AlreadyTransformed";
    case ErrorCode::kAlreadyOriginal: return "AlreadyOriginal";
    case ErrorCode::kClassTooSmall: return "ClassTooSmall";
    case ErrorCode::kInvalidFraction: return "InvalidFraction";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kMissingFeature: return "MissingFeature";
    case ErrorCode::kMissingCoverCounts: return "MissingCoverCounts";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kEmptySpace: return "EmptySpace";
    case ErrorCode::kFoldMismatch: return "FoldMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kZeroTarget: return "ZeroTarget";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kCorruptModel: return "CorruptModel";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kLocked: return "Locked";
  }
  return "Unknown";
}

}  // namespace soiln

#endif  // SOILN_ERROR_HPP_
