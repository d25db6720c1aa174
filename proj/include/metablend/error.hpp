// Copyright 2026 The Metablend Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace metablend {

// Closed set of machine-readable error codes. Every failure that crosses a
// module boundary carries one of these; the service maps them to HTTP
// statuses and the CLI prints them on stderr.
enum class ErrorCode {
  kEmptyExpression,
  kTaggerUnavailable,
  kIndexOutOfRange,
  kInvalidArgument,
  kKnowledgeUnavailable,
  kRateLimited,
  kFixtureMissing,
  kOracleUnavailable,
  kInvalidOracleResponse,
  kParseFailure,
  kSchemaMismatch,
  kMissingBinding,
  kImageProviderUnavailable,
  kContentRejected,
  kEmbeddingUnavailable,
  kSentimentUnavailable,
  kDimensionMismatch,
  kZeroVector,
  kCandidateValidationFailed,
  kAttributeValidationFailed,
  kInsufficientConcepts,
  kUnknownSession,
  kUnknownPrompt,
  kUnknownObject,
  kUnknownConcept,
  kUnknownArtifact,
  kUnknownJob,
  kPreconditionFailed,
  kCorruptSessionFile,
  kUnsupportedSchemaVersion,
  kInternal,
};

// Stable snake_case name, e.g. "empty_expression".
std::string_view error_code_name(ErrorCode code);

// Inverse of error_code_name; returns kInternal for unknown names.
ErrorCode error_code_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        nlohmann::json detail = nullptr)
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const { return code_; }

  // Provider or validation detail: last raw completion, partial candidate
  // list, retry-after hint, HTTP status. Null when there is none.
  const nlohmann::json& detail() const { return detail_; }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace metablend
