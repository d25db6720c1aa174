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

#include "metablend/oracle.hpp"

#include <algorithm>
#include <array>
#include <regex>
#include <sstream>

#include "metablend/error.hpp"

namespace metablend {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<TemplateId, std::string_view>, 5> kTemplateNames = {{
    {TemplateId::kTheme, "theme"},
    {TemplateId::kObjects, "objects"},
    {TemplateId::kAttributes, "attributes"},
    {TemplateId::kSchemes, "schemes"},
    {TemplateId::kImage, "image"},
}};

constexpr std::string_view kNumSlot = "(NUM)";

std::string lookup_binding(const Bindings& bindings, const std::string& name,
                           TemplateId id) {
  auto it = bindings.find(name);
  if (it == bindings.end()) {
    throw Error(ErrorCode::kMissingBinding,
                "missing binding '" + name + "' for template " +
                    std::string(template_name(id)),
                {{"name", name}});
  }
  return it->second;
}

// f-string style substitution over `text`. When `bindings` is null the
// placeholder names are collected into `names` instead.
std::string substitute(std::string_view text, TemplateId id, const Bindings* bindings,
                       std::set<std::string>* names, bool num_slot) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      out.push_back('{');
      i += 2;
    } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
      out.push_back('}');
      i += 2;
    } else if (c == '{') {
      auto close = text.find('}', i + 1);
      if (close == std::string_view::npos) {
        out.append(text.substr(i));
        break;
      }
      std::string name(text.substr(i + 1, close - i - 1));
      if (names) names->insert(name);
      if (bindings) out.append(lookup_binding(*bindings, name, id));
      i = close + 1;
    } else if (num_slot && text.substr(i, kNumSlot.size()) == kNumSlot) {
      if (names) names->insert("NUM");
      out.push_back('(');
      if (bindings) out.append(lookup_binding(*bindings, "NUM", id));
      out.push_back(')');
      i += kNumSlot.size();
    } else {
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

struct ImagePart {
  bool literal;
  std::string text;  // literal body or placeholder name
};

std::vector<ImagePart> parse_concatenation(std::string_view source) {
  std::vector<ImagePart> parts;
  size_t i = 0;
  while (i < source.size()) {
    char c = source[i];
    if (c == '"') {
      auto close = source.find('"', i + 1);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::kInternal, "unterminated literal in image template");
      }
      parts.push_back({true, std::string(source.substr(i + 1, close - i - 1))});
      i = close + 1;
    } else if (c == '{') {
      auto close = source.find('}', i + 1);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::kInternal, "unterminated placeholder in image template");
      }
      parts.push_back({false, std::string(source.substr(i + 1, close - i - 1))});
      i = close + 1;
    } else {
      ++i;  // whitespace and '+'
    }
  }
  return parts;
}

const std::regex& section_label() {
  static const std::regex kLabel(R"(^\s*([A-Za-z_][A-Za-z_ ]*):\s*$)");
  return kLabel;
}

}  // namespace

std::string_view template_name(TemplateId id) {
  for (const auto& [tid, name] : kTemplateNames) {
    if (tid == id) return name;
  }
  return "theme";
}

TemplateId template_from_name(std::string_view name) {
  for (const auto& [tid, n] : kTemplateNames) {
    if (n == name) return tid;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown template id: " + std::string(name));
}

PromptTemplate::PromptTemplate(TemplateId id, std::string source)
    : id_(id), source_(std::move(source)) {
  if (id_ == TemplateId::kImage) {
    for (const auto& part : parse_concatenation(source_)) {
      if (part.literal) {
        substitute(part.text, id_, nullptr, &placeholders_, false);
      } else {
        placeholders_.insert(part.text);
      }
    }
    return;
  }
  substitute(source_, id_, nullptr, &placeholders_, id_ == TemplateId::kSchemes);

  std::istringstream in(source_);
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_match(line, m, section_label())) {
      sections_.emplace_back(m[1].str(), std::string());
      continue;
    }
    if (sections_.empty()) continue;
    if (trim(line) == "\"\"\"") continue;
    auto& body = sections_.back().second;
    if (!body.empty()) body.push_back('\n');
    body.append(trim(line));
  }
}

const PromptTemplate& PromptTemplate::get(TemplateId id) {
  static const std::array<PromptTemplate, 5> kTemplates = {
      PromptTemplate(TemplateId::kTheme, std::string(template_resource(TemplateId::kTheme))),
      PromptTemplate(TemplateId::kObjects,
                     std::string(template_resource(TemplateId::kObjects))),
      PromptTemplate(TemplateId::kAttributes,
                     std::string(template_resource(TemplateId::kAttributes))),
      PromptTemplate(TemplateId::kSchemes,
                     std::string(template_resource(TemplateId::kSchemes))),
      PromptTemplate(TemplateId::kImage, std::string(template_resource(TemplateId::kImage))),
  };
  return kTemplates[static_cast<size_t>(id)];
}

std::vector<std::string> PromptTemplate::render_segments(const Bindings& bindings) const {
  if (id_ != TemplateId::kImage) {
    throw Error(ErrorCode::kInvalidArgument, "render_segments applies to the image template");
  }
  std::vector<std::string> out;
  for (const auto& part : parse_concatenation(source_)) {
    if (part.literal) {
      out.push_back(substitute(part.text, id_, &bindings, nullptr, false));
    } else {
      out.push_back(lookup_binding(bindings, part.text, id_));
    }
  }
  return out;
}

std::string PromptTemplate::render(const Bindings& bindings) const {
  if (id_ == TemplateId::kImage) return join(render_segments(bindings), " ");
  return substitute(source_, id_, &bindings, nullptr, id_ == TemplateId::kSchemes);
}

std::string render_template(TemplateId id, const Bindings& bindings) {
  return PromptTemplate::get(id).render(bindings);
}

// ---------------------------------------------------------------------------
// Result extraction

namespace {

// End index (exclusive) of the balanced object starting at text[start] == '{',
// honouring JSON string literals. npos if unbalanced.
size_t balanced_end(std::string_view text, size_t start) {
  int depth = 0;
  bool in_string = false;
  for (size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

[[noreturn]] void mismatch(TemplateId schema, const std::string& detail) {
  throw Error(ErrorCode::kSchemaMismatch,
              std::string(template_name(schema)) + " result: " + detail,
              {{"schema", template_name(schema)}, {"detail", detail}});
}

void require_string_row(const nlohmann::json& row, size_t width, TemplateId schema,
                        size_t index) {
  if (!row.is_array() || row.size() != width) {
    mismatch(schema, "row " + std::to_string(index) + " must be an array of " +
                         std::to_string(width) + " strings");
  }
  for (const auto& cell : row) {
    if (!cell.is_string() || trim(cell.get<std::string>()).empty()) {
      mismatch(schema, "row " + std::to_string(index) + " has an empty or non-string cell");
    }
  }
}

}  // namespace

nlohmann::json extract_json_result(std::string_view text, TemplateId schema,
                                   std::optional<size_t> expected_count) {
  nlohmann::json doc;
  bool found = false;
  for (size_t pos = text.find('{'); pos != std::string_view::npos;
       pos = text.find('{', pos + 1)) {
    size_t end = balanced_end(text, pos);
    if (end == std::string_view::npos) continue;
    try {
      doc = nlohmann::json::parse(text.substr(pos, end - pos));
      found = true;
      break;
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
  }
  if (!found) {
    throw Error(ErrorCode::kParseFailure, "no JSON object found in oracle output");
  }
  if (!doc.is_object() || !doc.contains("result")) mismatch(schema, "missing 'result'");
  const auto& result = doc["result"];

  switch (schema) {
    case TemplateId::kTheme:
      if (!result.is_string() || trim(result.get<std::string>()).empty()) {
        mismatch(schema, "'result' must be a non-empty string");
      }
      break;
    case TemplateId::kObjects: {
      if (!result.is_array() || result.size() != 5) {
        mismatch(schema, "'result' must hold exactly 5 [object, reason] pairs");
      }
      for (size_t i = 0; i < result.size(); ++i) require_string_row(result[i], 2, schema, i);
      break;
    }
    case TemplateId::kAttributes: {
      if (!result.is_array() || result.empty()) mismatch(schema, "'result' must be a non-empty array");
      if (expected_count && result.size() != *expected_count) {
        mismatch(schema, "expected " + std::to_string(*expected_count) + " objects, got " +
                             std::to_string(result.size()));
      }
      for (size_t i = 0; i < result.size(); ++i) require_string_row(result[i], 6, schema, i);
      break;
    }
    case TemplateId::kSchemes: {
      if (!result.is_array() || result.empty()) mismatch(schema, "'result' must be a non-empty array");
      if (expected_count && result.size() != *expected_count) {
        mismatch(schema, "expected " + std::to_string(*expected_count) + " schemes, got " +
                             std::to_string(result.size()));
      }
      for (size_t i = 0; i < result.size(); ++i) require_string_row(result[i], 2, schema, i);
      break;
    }
    case TemplateId::kImage:
      mismatch(schema, "the image template has no structured result");
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Chat providers

std::string chat_fixture_key(TemplateId id, const Bindings& bindings,
                             const std::string& addendum) {
  nlohmann::json canon = {{"template", template_name(id)},
                          {"bindings", bindings},
                          {"addendum", addendum}};
  return std::string(template_name(id)) + "-" + sha256_hex(canon.dump()).substr(0, 16);
}

HttpChatProvider::HttpChatProvider(ChatHttpOptions options,
                                   std::shared_ptr<HttpTransport> transport)
    : options_(std::move(options)), transport_(std::move(transport)) {
  while (!options_.base_url.empty() && options_.base_url.back() == '/') {
    options_.base_url.pop_back();
  }
}

std::string HttpChatProvider::complete(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  nlohmann::json body = {{"model", options_.model},
                         {"messages", messages},
                         {"temperature", request.temperature}};
  HttpRequest req;
  req.method = "POST";
  req.url = options_.base_url + "/chat/completions";
  req.headers["Content-Type"] = "application/json";
  if (!options_.api_key.empty()) req.headers["Authorization"] = "Bearer " + options_.api_key;
  req.body = body.dump();

  auto resp = send_with_retry(*transport_, req, options_.retry);
  if (resp.status < 200 || resp.status >= 300) {
    throw Error(ErrorCode::kOracleUnavailable,
                "chat completion failed: " +
                    (resp.status == 0 ? resp.error : "HTTP " + std::to_string(resp.status)),
                {{"status", resp.status}, {"body", resp.body.substr(0, 2000)}});
  }
  try {
    auto j = nlohmann::json::parse(resp.body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kOracleUnavailable,
                std::string("chat completion response malformed: ") + e.what());
  }
}

FixtureChatProvider::FixtureChatProvider(fs::path dir, std::shared_ptr<ChatProvider> live,
                                         bool record)
    : dir_(std::move(dir)), live_(std::move(live)), record_(record) {}

fs::path FixtureChatProvider::path_for(const std::string& key) const {
  return dir_ / "oracle" / (key + ".json");
}

std::string FixtureChatProvider::complete(const ChatRequest& request) {
  if (record_ && live_) {
    std::string text = live_->complete(request);
    std::lock_guard lock(write_mu_);
    auto& rec = pending_[request.fixture_key];
    if (rec.is_null() || request.attempt == 0) {
      nlohmann::json messages = nlohmann::json::array();
      for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
      }
      rec = {{"template_id", template_name(request.template_id)},
             {"bindings", request.bindings},
             {"addendum", request.addendum},
             {"request", {{"messages", messages}, {"temperature", request.temperature}}},
             {"responses", nlohmann::json::array()},
             {"parsed", nullptr}};
    }
    rec["responses"].push_back(text);
    write_file_atomic(path_for(request.fixture_key), rec.dump(2) + "\n");
    return text;
  }

  auto path = path_for(request.fixture_key);
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kFixtureMissing,
                "no oracle fixture " + path.filename().string() + " for template " +
                    std::string(template_name(request.template_id)),
                {{"key", request.fixture_key}, {"bindings", request.bindings}});
  }
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kOracleUnavailable,
                "corrupt oracle fixture " + path.string() + ": " + e.what());
  }
  const auto& responses = rec.at("responses");
  if (!responses.is_array() || responses.empty()) {
    throw Error(ErrorCode::kOracleUnavailable, "oracle fixture has no responses: " + path.string());
  }
  ++replays_;
  size_t idx = std::min<size_t>(static_cast<size_t>(request.attempt), responses.size() - 1);
  return responses[idx].get<std::string>();
}

void FixtureChatProvider::annotate(const ChatRequest& request, const nlohmann::json& parsed) {
  if (!(record_ && live_)) return;
  std::lock_guard lock(write_mu_);
  auto it = pending_.find(request.fixture_key);
  if (it == pending_.end()) return;
  it->second["parsed"] = parsed;
  write_file_atomic(path_for(request.fixture_key), it->second.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Oracle

double retry_temperature(double initial, int attempt, int max_attempts) {
  if (max_attempts <= 1 || attempt <= 0) return initial;
  return initial * (1.0 - static_cast<double>(attempt) / max_attempts);
}

Oracle::Oracle(std::shared_ptr<ChatProvider> chat, std::shared_ptr<ImageProvider> images,
               std::shared_ptr<ImageStore> store, std::shared_ptr<Clock> clock)
    : chat_(std::move(chat)),
      images_(std::move(images)),
      store_(std::move(store)),
      clock_(std::move(clock)) {}

OracleResponse Oracle::complete(TemplateId id, const Bindings& bindings,
                                const CompleteOptions& options) {
  if (!chat_) throw Error(ErrorCode::kOracleUnavailable, "no chat provider configured");
  if (id == TemplateId::kImage) {
    throw Error(ErrorCode::kInvalidArgument, "the image template is not a chat template");
  }
  int max_attempts = std::max(1, options.max_attempts);

  ChatRequest request;
  request.template_id = id;
  request.bindings = bindings;
  request.addendum = options.addendum;
  request.messages.push_back({"user", render_template(id, bindings)});
  if (!options.addendum.empty()) request.messages.push_back({"user", options.addendum});
  request.fixture_key = chat_fixture_key(id, bindings, options.addendum);

  std::string last_text;
  std::string last_error;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    request.attempt = attempt;
    request.temperature = retry_temperature(options.temperature, attempt, max_attempts);
    ++chat_calls_;
    last_text = chat_->complete(request);
    try {
      auto parsed = extract_json_result(last_text, id, options.expected_count);
      chat_->annotate(request, parsed);
      return {last_text, std::move(parsed), attempt + 1};
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  chat_->annotate(request, nullptr);
  throw Error(ErrorCode::kInvalidOracleResponse,
              "oracle output for template " + std::string(template_name(id)) +
                  " was invalid after " + std::to_string(max_attempts) +
                  " attempts: " + last_error,
              {{"last_text", last_text}, {"attempts", max_attempts}, {"reason", last_error}});
}

std::string prompt_hash(std::string_view prompt) { return sha256_hex(prompt).substr(0, 16); }

ImageArtifact Oracle::generate_image(const std::string& prompt) {
  if (trim(prompt).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "image prompt is empty");
  }
  if (!images_) {
    throw Error(ErrorCode::kImageProviderUnavailable, "no image provider configured");
  }
  auto image = images_->generate(prompt);
  ImageArtifact art;
  art.prompt = prompt;
  art.created_at = clock_->now();
  if (image.deterministic) {
    art.id = prompt_hash(prompt);
  } else {
    art.id = sha256_hex(prompt + "|" + art.created_at + "|" +
                        std::to_string(image_counter_.fetch_add(1)))
                 .substr(0, 16);
  }
  art.bytes_ref = store_->put(art.id, image);
  return art;
}

void to_json(nlohmann::json& j, const ImageArtifact& a) {
  j = {{"id", a.id}, {"prompt", a.prompt}, {"bytes_ref", a.bytes_ref},
       {"created_at", a.created_at}};
}

void from_json(const nlohmann::json& j, ImageArtifact& a) {
  a.id = j.at("id").get<std::string>();
  a.prompt = j.at("prompt").get<std::string>();
  a.bytes_ref = j.at("bytes_ref").get<std::string>();
  a.created_at = j.at("created_at").get<std::string>();
}

}  // namespace metablend
