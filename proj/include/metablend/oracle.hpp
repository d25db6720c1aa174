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
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "metablend/http.hpp"
#include "metablend/knowledge.hpp"
#include "metablend/util.hpp"

namespace metablend {

enum class TemplateId { kTheme, kObjects, kAttributes, kSchemes, kImage };

std::string_view template_name(TemplateId id);
TemplateId template_from_name(std::string_view name);

using Bindings = std::map<std::string, std::string>;

// One of the five immutable prompt scripts. Chat templates are rendered with
// f-string rules: "{{" and "}}" are literal braces, "{Name}" is a binding,
// and "(NUM)" is the scheme-count slot. The image template is a `+`
// concatenation of quoted segments and bare {placeholders}; its rendering
// joins the segments with one space.
class PromptTemplate {
 public:
  static const PromptTemplate& get(TemplateId id);

  TemplateId id() const { return id_; }
  const std::string& source() const { return source_; }
  const std::set<std::string>& placeholders() const { return placeholders_; }

  // Section label -> body, in source order. Empty for the image template.
  const std::vector<std::pair<std::string, std::string>>& sections() const {
    return sections_;
  }

  // Throws kMissingBinding naming the first absent placeholder.
  std::string render(const Bindings& bindings) const;

  // Image template only: the rendered segments (objects, attributes,
  // scheme, considerations) before joining.
  std::vector<std::string> render_segments(const Bindings& bindings) const;

 private:
  PromptTemplate(TemplateId id, std::string source);

  TemplateId id_;
  std::string source_;
  std::set<std::string> placeholders_;
  std::vector<std::pair<std::string, std::string>> sections_;
};

std::string render_template(TemplateId id, const Bindings& bindings);

// Raw template resource text as compiled into the binary.
std::string_view template_resource(TemplateId id);

// Locates the first balanced JSON object in `text` (skipping candidates that
// do not parse), then validates the `result` payload for `schema`:
//   theme      {"result": string}
//   objects    {"result": 5 x [string, string]}
//   attributes {"result": N x [object, 5 attributes]}
//   schemes    {"result": n x [string, string]}
// `expected_count`, when set, pins N / n. Throws kParseFailure or
// kSchemaMismatch.
nlohmann::json extract_json_result(std::string_view text, TemplateId schema,
                                   std::optional<size_t> expected_count = std::nullopt);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  TemplateId template_id = TemplateId::kTheme;
  Bindings bindings;
  std::string addendum;  // optional second user message
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int attempt = 0;  // 0-based
  std::string fixture_key;
};

// Key under which a completion is recorded and replayed: the template id
// plus a hash of the bindings and addendum. Temperature is not part of it.
std::string chat_fixture_key(TemplateId id, const Bindings& bindings,
                             const std::string& addendum);

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  // Raw completion text. Throws kOracleUnavailable (or kFixtureMissing).
  virtual std::string complete(const ChatRequest& request) = 0;
  // Called once per request key with the final parse (null on failure).
  virtual void annotate(const ChatRequest&, const nlohmann::json&) {}
};

struct ChatHttpOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model = "gpt-3.5-turbo";
  RetryPolicy retry;
};

// Chat-completions style endpoint: POST {base}/chat/completions.
class HttpChatProvider : public ChatProvider {
 public:
  HttpChatProvider(ChatHttpOptions options, std::shared_ptr<HttpTransport> transport);
  std::string complete(const ChatRequest& request) override;

 private:
  ChatHttpOptions options_;
  std::shared_ptr<HttpTransport> transport_;
};

// Replays recorded completions from <dir>/oracle/<key>.json. With a live
// provider and record=true it forwards instead and writes each exchange.
//
// Record format: {"template_id", "bindings", "addendum", "request":
// {"messages", "temperature"}, "responses": [raw...], "parsed": value|null}.
// Attempt i replays responses[min(i, n-1)].
class FixtureChatProvider : public ChatProvider {
 public:
  explicit FixtureChatProvider(std::filesystem::path dir,
                               std::shared_ptr<ChatProvider> live = nullptr,
                               bool record = false);
  std::string complete(const ChatRequest& request) override;
  void annotate(const ChatRequest& request, const nlohmann::json& parsed) override;

  long replays() const { return replays_.load(); }

 private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path dir_;
  std::shared_ptr<ChatProvider> live_;
  bool record_;
  std::mutex write_mu_;
  std::map<std::string, nlohmann::json> pending_;
  std::atomic<long> replays_{0};
};

struct OracleResponse {
  std::string text;
  nlohmann::json parsed;
  int attempts = 1;
};

struct CompleteOptions {
  double temperature = 0.7;
  int max_attempts = 3;
  std::string addendum;
  std::optional<size_t> expected_count;
};

struct ImageArtifact {
  std::string id;
  std::string prompt;
  std::string bytes_ref;  // path relative to the image store root
  std::string created_at;

  bool operator==(const ImageArtifact&) const = default;
};

void to_json(nlohmann::json& j, const ImageArtifact& a);
void from_json(const nlohmann::json& j, ImageArtifact& a);

struct GeneratedImage {
  std::string bytes;
  std::string extension = "png";
  bool deterministic = false;  // same prompt always yields these bytes
};

class ImageProvider {
 public:
  virtual ~ImageProvider() = default;
  // Throws kImageProviderUnavailable or kContentRejected.
  virtual GeneratedImage generate(const std::string& prompt) = 0;
};

struct ImageHttpOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model = "dall-e-3";
  std::string size = "1024x1024";
  RetryPolicy retry;
};

// Image-generation endpoint: POST {base}/images/generations, b64_json or url.
class HttpImageProvider : public ImageProvider {
 public:
  HttpImageProvider(ImageHttpOptions options, std::shared_ptr<HttpTransport> transport);
  GeneratedImage generate(const std::string& prompt) override;

 private:
  ImageHttpOptions options_;
  std::shared_ptr<HttpTransport> transport_;
};

// Recorded image for hash(prompt) when present, else a deterministic
// placeholder PNG. With a live provider and record=true it forwards and
// saves to <dir>/images/<hash>.<ext>.
class FixtureImageProvider : public ImageProvider {
 public:
  explicit FixtureImageProvider(std::optional<std::filesystem::path> dir,
                                std::shared_ptr<ImageProvider> live = nullptr,
                                bool record = false);
  GeneratedImage generate(const std::string& prompt) override;

 private:
  std::optional<std::filesystem::path> dir_;
  std::shared_ptr<ImageProvider> live_;
  bool record_;
};

// 64x64 solid-colour PNG whose colour derives from hash(prompt).
std::string placeholder_png(const std::string& prompt);

// Stable short id for a prompt: first 16 hex chars of sha256(prompt).
std::string prompt_hash(std::string_view prompt);

// Image files under <root>/images/.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path root) : root_(std::move(root)) {}
  const std::filesystem::path& root() const { return root_; }
  std::string put(const std::string& id, const GeneratedImage& image);
  std::filesystem::path resolve(const std::string& bytes_ref) const { return root_ / bytes_ref; }

 private:
  std::filesystem::path root_;
};

// Renders templates, calls the chat provider with retries, and validates
// the structured result. Also fronts the image provider.
class Oracle {
 public:
  Oracle(std::shared_ptr<ChatProvider> chat, std::shared_ptr<ImageProvider> images,
         std::shared_ptr<ImageStore> store, std::shared_ptr<Clock> clock);

  // Retries on unparseable or mis-shaped output, lowering the temperature
  // each time. Throws kInvalidOracleResponse (detail carries the last raw
  // text) once max_attempts is spent; provider errors propagate at once.
  OracleResponse complete(TemplateId id, const Bindings& bindings,
                          const CompleteOptions& options = {});

  ImageArtifact generate_image(const std::string& prompt);

  ImageStore& store() { return *store_; }
  long chat_calls() const { return chat_calls_.load(); }

 private:
  std::shared_ptr<ChatProvider> chat_;
  std::shared_ptr<ImageProvider> images_;
  std::shared_ptr<ImageStore> store_;
  std::shared_ptr<Clock> clock_;
  std::atomic<long> chat_calls_{0};
  std::atomic<long> image_counter_{0};
};

// Temperature for 0-based attempt i of n: t0 * (1 - i/n).
double retry_temperature(double initial, int attempt, int max_attempts);

}  // namespace metablend
