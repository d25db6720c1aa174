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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metablend {

std::string sha256_hex(std::string_view data);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Lowercase, trimmed, internal whitespace runs collapsed to one space.
std::string normal_form(std::string_view s);

// "a" or "an" by the leading letter of `word`.
std::string_view indefinite_article(std::string_view word);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::optional<std::string> getenv_string(const char* name);

// Whole-file helpers. read_file throws std::runtime_error when the file is
// missing; write_file_atomic writes to a sibling temp file then renames.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string base64_decode(std::string_view encoded);

// Timestamps are RFC 3339 UTC strings with second precision.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::string now() = 0;
};

class SystemClock : public Clock {
 public:
  std::string now() override;
};

// Deterministic clock for offline runs: starts at `start` and advances one
// second per call.
class LogicalClock : public Clock {
 public:
  explicit LogicalClock(std::int64_t start_epoch_seconds = 1704067200)
      : next_(start_epoch_seconds) {}
  std::string now() override;

 private:
  std::atomic<std::int64_t> next_;
};

std::string format_utc(std::int64_t epoch_seconds);

}  // namespace metablend
