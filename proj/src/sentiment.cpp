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

#include <cctype>
#include <cmath>
#include <unordered_map>

#include "metablend/error.hpp"
#include "metablend/scoring.hpp"
#include "metablend/util.hpp"

namespace metablend {

namespace fs = std::filesystem;

namespace {

// Hand-tuned valences in [-1, 1] for words that show up as objects and
// visible attributes. Anything else is neutral.
const std::unordered_map<std::string, double>& valence_lexicon() {
  static const std::unordered_map<std::string, double> kLexicon = {
      // objects
      {"earth", 0.6}, {"globe", 0.4}, {"planet", 0.4}, {"sun", 0.7}, {"tree", 0.6},
      {"forest", 0.5}, {"ocean", 0.5}, {"flower", 0.8}, {"seed", 0.6}, {"seeds", 0.6},
      {"book", 0.6}, {"books", 0.6}, {"mirror", 0.2}, {"phoenix", 0.6}, {"candle", 0.4},
      {"lamp", 0.4}, {"lighthouse", 0.6}, {"key", 0.4}, {"bridge", 0.4}, {"heart", 0.6},
      {"orange", 0.6}, {"egg", 0.3}, {"medicine", 0.2}, {"apple", 0.6}, {"honey", 0.7},
      {"ice", 0.0}, {"cream", 0.5}, {"fireplace", 0.5}, {"blanket", 0.5}, {"thermometer", 0.0},
      {"iceberg", -0.1}, {"glacier", 0.1}, {"smoke", -0.6}, {"cigarette", -0.8},
      {"skull", -0.8}, {"coffin", -0.9}, {"grave", -0.8}, {"chain", -0.4}, {"cage", -0.5},
      {"knife", -0.5}, {"gun", -0.8}, {"bomb", -0.9}, {"trash", -0.6}, {"garbage", -0.6},
      {"desert", -0.3}, {"dumbbell", 0.3}, {"dumbbells", 0.3}, {"shoes", 0.2}, {"mat", 0.1},
      {"compass", 0.4}, {"map", 0.3}, {"star", 0.7}, {"rainbow", 0.8}, {"gift", 0.8},
      {"crown", 0.5}, {"wings", 0.5}, {"feather", 0.4}, {"stone", 0.0}, {"leaf", 0.4},
      {"leaves", 0.4}, {"water", 0.3}, {"fire", -0.2}, {"volcano", -0.4}, {"storm", -0.5},
      // attributes
      {"round", 0.3}, {"warm", 0.6}, {"cozy", 0.7}, {"bright", 0.6}, {"glowing", 0.6},
      {"shiny", 0.5}, {"smooth", 0.4}, {"soft", 0.5}, {"juicy", 0.6}, {"sweet", 0.6},
      {"fresh", 0.6}, {"green", 0.4}, {"blue", 0.2}, {"golden", 0.6}, {"colorful", 0.6},
      {"clear", 0.4}, {"reflective", 0.2}, {"flames", -0.3}, {"flame", -0.3},
      {"burning", -0.5}, {"hot", -0.1}, {"cold", -0.3}, {"frozen", -0.2}, {"melting", -0.4},
      {"cracked", -0.5}, {"broken", -0.6}, {"dark", -0.4}, {"black", -0.2}, {"gray", -0.1},
      {"grey", -0.1}, {"dusty", -0.4}, {"rusty", -0.5}, {"sharp", -0.3}, {"rough", -0.3},
      {"heavy", -0.1}, {"sticky", -0.3}, {"ash", -0.5}, {"ashes", -0.5}, {"charred", -0.6},
      {"rotten", -0.8}, {"toxic", -0.9}, {"polluted", -0.8}, {"dirty", -0.6},
      {"sturdy", 0.3}, {"brick", 0.0}, {"textured", 0.1}, {"spherical", 0.2},
      {"creamy", 0.5}, {"cold-dripping", -0.2}, {"orange color", 0.4}, {"peel", 0.1},
      {"continents", 0.2}, {"oceans", 0.4}, {"clouds", 0.2}, {"chimney", 0.0},
      {"logs", 0.1}, {"mantel", 0.1}, {"cone", 0.2}, {"scoop", 0.3}, {"pastel", 0.4},
      // generic valence words
      {"good", 0.7}, {"bad", -0.7}, {"happy", 0.8}, {"sad", -0.7}, {"love", 0.9},
      {"hope", 0.8}, {"joy", 0.9}, {"peace", 0.8}, {"beautiful", 0.8}, {"ugly", -0.7},
      {"death", -0.9}, {"dead", -0.8}, {"pain", -0.8}, {"fear", -0.7}, {"danger", -0.7},
      {"healthy", 0.7}, {"health", 0.6}, {"sick", -0.7}, {"pure", 0.5}, {"clean", 0.5},
      {"strong", 0.5}, {"weak", -0.4}, {"growth", 0.6}, {"life", 0.6}, {"wisdom", 0.7},
      {"knowledge", 0.6}, {"soul", 0.4}, {"gentle", 0.6}, {"kind", 0.6}, {"cruel", -0.8},
      {"poison", -0.9}, {"decay", -0.7}, {"loss", -0.7}, {"war", -0.9}, {"welcome", 0.6},
  };
  return kLexicon;
}

}  // namespace

std::optional<double> LexiconSentimentProvider::valence(const std::string& word) {
  const auto& lex = valence_lexicon();
  auto it = lex.find(to_lower(word));
  if (it == lex.end()) return std::nullopt;
  return it->second;
}

SentimentLabelled LexiconSentimentProvider::classify(const std::string& text) {
  std::string lower = normal_form(text);
  double sum = 0.0;
  int known = 0;
  if (auto whole = valence(lower)) {
    sum = *whole;
    known = 1;
  } else {
    std::string word;
    auto flush = [&] {
      if (word.empty()) return;
      if (auto v = valence(word)) {
        sum += *v;
        ++known;
      }
      word.clear();
    };
    for (char c : lower) {
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '-') {
        word.push_back(c);
      } else {
        flush();
      }
    }
    flush();
  }
  double v = known ? sum / known : 0.0;
  SentimentLabelled out;
  out.label = v >= 0.0 ? SentimentLabel::kPositive : SentimentLabel::kNegative;
  out.confidence = 0.5 + std::fabs(v) / 2.0;
  return out;
}

HttpSentimentProvider::HttpSentimentProvider(std::string url, std::string api_key,
                                             std::shared_ptr<HttpTransport> transport,
                                             RetryPolicy retry)
    : url_(std::move(url)),
      api_key_(std::move(api_key)),
      transport_(std::move(transport)),
      retry_(retry) {}

SentimentLabelled HttpSentimentProvider::classify(const std::string& text) {
  HttpRequest req;
  req.method = "POST";
  req.url = url_;
  req.headers["Content-Type"] = "application/json";
  if (!api_key_.empty()) req.headers["Authorization"] = "Bearer " + api_key_;
  req.body = nlohmann::json{{"inputs", text}}.dump();
  auto resp = send_with_retry(*transport_, req, retry_);
  if (resp.status < 200 || resp.status >= 300) {
    throw Error(ErrorCode::kSentimentUnavailable,
                "sentiment request failed: " +
                    (resp.status == 0 ? resp.error : "HTTP " + std::to_string(resp.status)),
                {{"status", resp.status}});
  }
  try {
    auto j = nlohmann::json::parse(resp.body);
    // Either [[{...}, {...}]] or [{...}, {...}].
    const nlohmann::json& list = (j.is_array() && !j.empty() && j[0].is_array()) ? j[0] : j;
    const nlohmann::json* best = nullptr;
    for (const auto& item : list) {
      if (!best || item.at("score").get<double>() > best->at("score").get<double>()) best = &item;
    }
    if (!best) throw Error(ErrorCode::kSentimentUnavailable, "sentiment response is empty");
    std::string label = to_lower(best->at("label").get<std::string>());
    SentimentLabelled out;
    out.label = (label == "negative" || label == "label_0") ? SentimentLabel::kNegative
                                                             : SentimentLabel::kPositive;
    out.confidence = best->at("score").get<double>();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSentimentUnavailable,
                std::string("sentiment response malformed: ") + e.what());
  }
}

TableSentimentProvider::TableSentimentProvider(fs::path path,
                                               std::shared_ptr<SentimentProvider> fallback,
                                               bool record)
    : path_(std::move(path)), fallback_(std::move(fallback)), record_(record) {
  if (fs::exists(path_)) {
    try {
      table_ = nlohmann::json::parse(read_file(path_));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kSentimentUnavailable,
                  "cannot load sentiment table " + path_.string() + ": " + e.what());
    }
  }
  if (!table_.is_object()) table_ = nlohmann::json::object();
  if (!table_.contains("labels")) table_["labels"] = nlohmann::json::object();
}

SentimentLabelled TableSentimentProvider::classify(const std::string& text) {
  std::string key = normal_form(text);
  {
    std::lock_guard lock(mu_);
    const auto& labels = table_["labels"];
    if (!record_ && labels.contains(key)) {
      const auto& e = labels[key];
      SentimentLabelled out;
      out.label = e.at("label") == "negative" ? SentimentLabel::kNegative
                                              : SentimentLabel::kPositive;
      out.confidence = e.at("confidence").get<double>();
      return out;
    }
  }
  if (!fallback_) {
    throw Error(ErrorCode::kSentimentUnavailable, "no recorded sentiment for '" + text + "'");
  }
  auto out = fallback_->classify(text);
  if (record_) {
    std::lock_guard lock(mu_);
    table_["labels"][key] = {{"label", sentiment_label_name(out.label)},
                             {"confidence", out.confidence}};
    write_file_atomic(path_, table_.dump(2) + "\n");
  }
  return out;
}

}  // namespace metablend
