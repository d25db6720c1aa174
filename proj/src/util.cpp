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

#include "metablend/util.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "metablend/error.hpp"

namespace metablend {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(),
         digest);
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string normal_form(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string_view indefinite_article(std::string_view word) {
  for (char c : word) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    switch (std::tolower(static_cast<unsigned char>(c))) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return "an";
      default:
        return "a";
    }
  }
  return "a";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::optional<std::string> getenv_string(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string base64_decode(std::string_view encoded) {
  std::string clean;
  clean.reserve(encoded.size());
  for (char c : encoded) {
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  }
  if (clean.size() % 4 != 0) {
    throw Error(ErrorCode::kParseFailure, "base64 payload has invalid length");
  }
  std::string out(clean.size() / 4 * 3, '\0');
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(clean.data()),
                          static_cast<int>(clean.size()));
  if (n < 0) throw Error(ErrorCode::kParseFailure, "invalid base64 payload");
  // EVP_DecodeBlock counts padding bytes as output.
  size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<size_t>(n) - pad);
  return out;
}

std::string format_utc(std::int64_t epoch_seconds) {
  std::time_t t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string SystemClock::now() {
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(
      std::chrono::system_clock::now().time_since_epoch());
  return format_utc(secs.count());
}

std::string LogicalClock::now() { return format_utc(next_.fetch_add(1)); }

namespace {

struct CodeName {
  ErrorCode code;
  std::string_view name;
};

constexpr CodeName kCodeNames[] = {
    {ErrorCode::kEmptyExpression, "empty_expression"},
    {ErrorCode::kTaggerUnavailable, "tagger_unavailable"},
    {ErrorCode::kIndexOutOfRange, "index_out_of_range"},
    {ErrorCode::kInvalidArgument, "invalid_argument"},
    {ErrorCode::kKnowledgeUnavailable, "knowledge_unavailable"},
    {ErrorCode::kRateLimited, "rate_limited"},
    {ErrorCode::kFixtureMissing, "fixture_missing"},
    {ErrorCode::kOracleUnavailable, "oracle_unavailable"},
    {ErrorCode::kInvalidOracleResponse, "invalid_oracle_response"},
    {ErrorCode::kParseFailure, "parse_failure"},
    {ErrorCode::kSchemaMismatch, "schema_mismatch"},
    {ErrorCode::kMissingBinding, "missing_binding"},
    {ErrorCode::kImageProviderUnavailable, "image_provider_unavailable"},
    {ErrorCode::kContentRejected, "content_rejected"},
    {ErrorCode::kEmbeddingUnavailable, "embedding_unavailable"},
    {ErrorCode::kSentimentUnavailable, "sentiment_unavailable"},
    {ErrorCode::kDimensionMismatch, "dimension_mismatch"},
    {ErrorCode::kZeroVector, "zero_vector"},
    {ErrorCode::kCandidateValidationFailed, "candidate_validation_failed"},
    {ErrorCode::kAttributeValidationFailed, "attribute_validation_failed"},
    {ErrorCode::kInsufficientConcepts, "insufficient_concepts"},
    {ErrorCode::kUnknownSession, "unknown_session"},
    {ErrorCode::kUnknownPrompt, "unknown_prompt"},
    {ErrorCode::kUnknownObject, "unknown_object"},
    {ErrorCode::kUnknownConcept, "unknown_concept"},
    {ErrorCode::kUnknownArtifact, "unknown_artifact"},
    {ErrorCode::kUnknownJob, "unknown_job"},
    {ErrorCode::kPreconditionFailed, "precondition_failed"},
    {ErrorCode::kCorruptSessionFile, "corrupt_session_file"},
    {ErrorCode::kUnsupportedSchemaVersion, "unsupported_schema_version"},
    {ErrorCode::kInternal, "internal"},
};

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  for (const auto& cn : kCodeNames) {
    if (cn.code == code) return cn.name;
  }
  return "internal";
}

ErrorCode error_code_from_name(std::string_view name) {
  for (const auto& cn : kCodeNames) {
    if (cn.name == name) return cn.code;
  }
  return ErrorCode::kInternal;
}

}  // namespace metablend
