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

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "metablend/http.hpp"

namespace metablend {

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_tag;

  size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

enum class SentimentLabel { kPositive, kNegative };

std::string_view sentiment_label_name(SentimentLabel label);

struct SentimentScore {
  SentimentLabel label = SentimentLabel::kPositive;
  double confidence = 0.5;  // C in [0, 1]
  double score = 0.5;       // C for positive, 1 - C for negative
};

// Builds the score from a classifier's (label, confidence) pair.
SentimentScore sentiment_from_label(SentimentLabel label, double confidence);

// Throws kDimensionMismatch or kZeroVector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

// Affine map onto [0, 1]: min -> 0, max -> 1; every value -> 0.5 when all
// values are equal. Throws kInvalidArgument on empty or non-finite input.
std::vector<double> minmax_normalize(std::span<const double> values);

// Rank-based map onto the grid {i / (n - 1)}. Tied values share the mean of
// the grid positions they occupy; a single value maps to 0.5.
std::vector<double> quantile_normalize(std::span<const double> values);

double pair_sentiment(const SentimentScore& a, const SentimentScore& b);

enum class DiagramKind { kObjects, kAttributes };

std::string_view diagram_kind_name(DiagramKind kind);
DiagramKind diagram_kind_from_name(std::string_view name);

struct Palette {
  std::string negative;  // hex colour at norm_sent = 0
  std::string positive;  // hex colour at norm_sent = 1
  bool operator==(const Palette&) const = default;
};

// Objects: purple -> orange. Attributes: green -> gold.
Palette palette_for(DiagramKind kind);

// Linear interpolation between the palette endpoints, "#RRGGBB".
std::string interpolate_color(const Palette& palette, double t);

struct PairScore {
  std::string a;
  std::string b;
  double raw_sim = 0.0;
  double norm_sim = 0.0;
  double raw_sent = 0.0;
  double norm_sent = 0.0;
  bool operator==(const PairScore&) const = default;
};

struct AnalysisDiagram {
  DiagramKind kind = DiagramKind::kObjects;
  std::vector<std::string> left;
  std::vector<std::string> right;
  std::vector<PairScore> links;  // row-major: left index, then right index
  Palette palette;
  std::string embedding_tag;
  size_t embedding_dim = 0;

  const PairScore& link(size_t left_index, size_t right_index) const {
    return links[left_index * right.size() + right_index];
  }
  // Link between two labels in either orientation (normal-form match).
  const PairScore* find(std::string_view x, std::string_view y) const;
  std::string color(const PairScore& link) const;

  bool operator==(const AnalysisDiagram&) const = default;
};

inline constexpr int kDiagramSchemaVersion = 1;

// Serialised form consumed by the studio UI. Key order is fixed (sorted),
// so identical diagrams serialise to identical bytes.
nlohmann::json diagram_to_json(const AnalysisDiagram& d);
AnalysisDiagram diagram_from_json(const nlohmann::json& j);

// Fills norm_sim (min-max) and norm_sent (quantile) across all links.
void normalize_diagram(AnalysisDiagram& d);

// ---------------------------------------------------------------------------
// Providers

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string tag() const = 0;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

// Deterministic pseudo-embedding derived from sha256(normal form of text).
// Unit length, entries in [-1, 1].
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(size_t dim = 64) : dim_(dim) {}
  std::string tag() const override { return "hash-" + std::to_string(dim_); }
  std::vector<double> embed(const std::string& text) override;

 private:
  size_t dim_;
};

// Checked-in vector table: {"provider_tag": ..., "dim": N, "vectors":
// {"text": [...]}}. Texts absent from the table fall back to the hash
// embedding at the table's dimension.
class TableEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit TableEmbeddingProvider(const std::filesystem::path& path);
  TableEmbeddingProvider(std::string tag, size_t dim,
                         std::map<std::string, std::vector<double>> vectors);
  std::string tag() const override { return tag_; }
  std::vector<double> embed(const std::string& text) override;

 private:
  std::string tag_;
  size_t dim_;
  std::map<std::string, std::vector<double>> vectors_;
  HashEmbeddingProvider fallback_;
};

struct EmbeddingHttpOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model = "clip-vit-base-patch32";
  RetryPolicy retry;
};

// POST {base}/embeddings {"model", "input"} -> {"data": [{"embedding": [...]}]}.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(EmbeddingHttpOptions options, std::shared_ptr<HttpTransport> transport);
  std::string tag() const override { return options_.model; }
  std::vector<double> embed(const std::string& text) override;

 private:
  EmbeddingHttpOptions options_;
  std::shared_ptr<HttpTransport> transport_;
};

// Forwards to `inner` and writes every vector into a table file readable by
// TableEmbeddingProvider.
class RecordingEmbeddingProvider : public EmbeddingProvider {
 public:
  RecordingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                             std::filesystem::path table_path);
  std::string tag() const override { return inner_->tag(); }
  std::vector<double> embed(const std::string& text) override;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  std::filesystem::path path_;
  std::mutex mu_;
  nlohmann::json table_;
};

struct SentimentLabelled {
  SentimentLabel label = SentimentLabel::kPositive;
  double confidence = 0.5;
};

class SentimentProvider {
 public:
  virtual ~SentimentProvider() = default;
  virtual SentimentLabelled classify(const std::string& text) = 0;
};

// Mean word valence v in [-1, 1] over known words (0 when none are known);
// label positive iff v >= 0, confidence 0.5 + |v| / 2.
class LexiconSentimentProvider : public SentimentProvider {
 public:
  SentimentLabelled classify(const std::string& text) override;
  static std::optional<double> valence(const std::string& word);
};

// Hugging Face text-classification style: POST {url} {"inputs": text} ->
// [[{"label": "POSITIVE", "score": C}, ...]] (top label wins).
class HttpSentimentProvider : public SentimentProvider {
 public:
  HttpSentimentProvider(std::string url, std::string api_key,
                        std::shared_ptr<HttpTransport> transport, RetryPolicy retry = {});
  SentimentLabelled classify(const std::string& text) override;

 private:
  std::string url_;
  std::string api_key_;
  std::shared_ptr<HttpTransport> transport_;
  RetryPolicy retry_;
};

// Recorded labels {"labels": {"text": {"label": "positive", "confidence": C}}}
// with a fallback provider for texts not in the table. With record=true the
// fallback's answers are written back.
class TableSentimentProvider : public SentimentProvider {
 public:
  TableSentimentProvider(std::filesystem::path path, std::shared_ptr<SentimentProvider> fallback,
                         bool record = false);
  SentimentLabelled classify(const std::string& text) override;

 private:
  std::filesystem::path path_;
  std::shared_ptr<SentimentProvider> fallback_;
  bool record_;
  std::mutex mu_;
  nlohmann::json table_;
};

// Caching front for both providers plus diagram construction.
class Scorer {
 public:
  Scorer(std::shared_ptr<EmbeddingProvider> embeddings,
         std::shared_ptr<SentimentProvider> sentiment);

  // Cached by (provider tag, normal form). Throws kInvalidArgument on empty
  // text, kDimensionMismatch when the provider's dimension drifts.
  EmbeddingVector embed(const std::string& text);
  SentimentScore sentiment(const std::string& text);

  // Pins the dimension every vector must have (e.g. from a loaded session).
  void expect_dim(size_t dim);
  std::optional<size_t> expected_dim() const;

  AnalysisDiagram build_diagram(DiagramKind kind, const std::vector<std::string>& left,
                                const std::vector<std::string>& right);

  long embedding_calls() const { return embedding_calls_.load(); }

 private:
  std::shared_ptr<EmbeddingProvider> embeddings_;
  std::shared_ptr<SentimentProvider> sentiment_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, EmbeddingVector> embed_cache_;
  std::unordered_map<std::string, SentimentScore> sentiment_cache_;
  std::optional<size_t> dim_;
  std::atomic<long> embedding_calls_{0};
};

}  // namespace metablend
