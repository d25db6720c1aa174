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

#include "metablend/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "metablend/error.hpp"
#include "metablend/util.hpp"

namespace metablend {

namespace fs = std::filesystem;

std::string_view sentiment_label_name(SentimentLabel label) {
  return label == SentimentLabel::kPositive ? "positive" : "negative";
}

SentimentScore sentiment_from_label(SentimentLabel label, double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sentiment confidence must lie in [0, 1]");
  }
  SentimentScore s;
  s.label = label;
  s.confidence = confidence;
  s.score = label == SentimentLabel::kPositive ? confidence : 1.0 - confidence;
  return s;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cannot compare vectors of dimension " + std::to_string(u.size()) + " and " +
                    std::to_string(v.size()));
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw Error(ErrorCode::kZeroVector, "cosine similarity of an all-zero vector");
  }
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  if (!std::isfinite(c)) {
    throw Error(ErrorCode::kInvalidArgument, "cosine similarity is not finite");
  }
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  return cosine_similarity(std::span<const double>(u.values), std::span<const double>(v.values));
}

std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "minmax of an empty list");
  for (double x : values) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidArgument, "minmax of a non-finite value");
  }
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  double min = *lo;
  double max = *hi;
  std::vector<double> out(values.size(), 0.5);
  if (max > min) {
    double range = max - min;
    for (size_t i = 0; i < values.size(); ++i) {
      out[i] = std::clamp((values[i] - min) / range, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<double> quantile_normalize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of an empty list");
  size_t n = values.size();
  std::vector<double> out(n, 0.5);
  if (n == 1) return out;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  double step = 1.0 / static_cast<double>(n - 1);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // Mean of grid positions i..j.
    double q = static_cast<double>(i + j) / 2.0 * step;
    for (size_t k = i; k <= j; ++k) out[order[k]] = q;
    i = j + 1;
  }
  return out;
}

double pair_sentiment(const SentimentScore& a, const SentimentScore& b) {
  return (a.score + b.score) / 2.0;
}

std::string_view diagram_kind_name(DiagramKind kind) {
  return kind == DiagramKind::kObjects ? "objects" : "attributes";
}

DiagramKind diagram_kind_from_name(std::string_view name) {
  if (name == "objects") return DiagramKind::kObjects;
  if (name == "attributes") return DiagramKind::kAttributes;
  throw Error(ErrorCode::kInvalidArgument, "unknown diagram kind: " + std::string(name));
}

Palette palette_for(DiagramKind kind) {
  if (kind == DiagramKind::kObjects) return {"#7B61C4", "#E8963C"};
  return {"#4CAF7D", "#D9A521"};
}

namespace {

int channel(const std::string& hex, int index) {
  return std::stoi(hex.substr(1 + 2 * index, 2), nullptr, 16);
}

}  // namespace

std::string interpolate_color(const Palette& palette, double t) {
  t = std::clamp(t, 0.0, 1.0);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    double a = channel(palette.negative, c);
    double b = channel(palette.positive, c);
    rgb[c] = static_cast<int>(std::lround(a + (b - a) * t));
  }
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", rgb[0], rgb[1], rgb[2]);
  return buf;
}

const PairScore* AnalysisDiagram::find(std::string_view x, std::string_view y) const {
  std::string nx = normal_form(x);
  std::string ny = normal_form(y);
  for (const auto& l : links) {
    std::string na = normal_form(l.a);
    std::string nb = normal_form(l.b);
    if ((na == nx && nb == ny) || (na == ny && nb == nx)) return &l;
  }
  return nullptr;
}

std::string AnalysisDiagram::color(const PairScore& link) const {
  return interpolate_color(palette, link.norm_sent);
}

void normalize_diagram(AnalysisDiagram& d) {
  if (d.links.empty()) return;
  std::vector<double> sims;
  std::vector<double> sents;
  sims.reserve(d.links.size());
  sents.reserve(d.links.size());
  for (const auto& l : d.links) {
    sims.push_back(l.raw_sim);
    sents.push_back(l.raw_sent);
  }
  auto ns = minmax_normalize(sims);
  auto nt = quantile_normalize(sents);
  for (size_t i = 0; i < d.links.size(); ++i) {
    d.links[i].norm_sim = ns[i];
    d.links[i].norm_sent = nt[i];
  }
}

nlohmann::json diagram_to_json(const AnalysisDiagram& d) {
  nlohmann::json nodes = nlohmann::json::array();
  for (size_t i = 0; i < d.left.size(); ++i) {
    nodes.push_back({{"id", "L" + std::to_string(i)}, {"label", d.left[i]}, {"side", "left"}});
  }
  for (size_t i = 0; i < d.right.size(); ++i) {
    nodes.push_back({{"id", "R" + std::to_string(i)}, {"label", d.right[i]}, {"side", "right"}});
  }
  nlohmann::json links = nlohmann::json::array();
  for (size_t i = 0; i < d.left.size(); ++i) {
    for (size_t j = 0; j < d.right.size(); ++j) {
      const auto& l = d.link(i, j);
      links.push_back({{"source", "L" + std::to_string(i)},
                       {"target", "R" + std::to_string(j)},
                       {"a", l.a},
                       {"b", l.b},
                       {"raw_sim", l.raw_sim},
                       {"width", l.norm_sim},
                       {"raw_sent", l.raw_sent},
                       {"norm_sent", l.norm_sent},
                       {"color", d.color(l)}});
    }
  }
  return {{"schema_version", kDiagramSchemaVersion},
          {"kind", diagram_kind_name(d.kind)},
          {"embedding", {{"provider_tag", d.embedding_tag}, {"dim", d.embedding_dim}}},
          {"palette", {{"negative", d.palette.negative}, {"positive", d.palette.positive}}},
          {"nodes", nodes},
          {"links", links}};
}

AnalysisDiagram diagram_from_json(const nlohmann::json& j) {
  AnalysisDiagram d;
  d.kind = diagram_kind_from_name(j.at("kind").get<std::string>());
  d.embedding_tag = j.at("embedding").at("provider_tag").get<std::string>();
  d.embedding_dim = j.at("embedding").at("dim").get<size_t>();
  d.palette = {j.at("palette").at("negative").get<std::string>(),
               j.at("palette").at("positive").get<std::string>()};
  for (const auto& n : j.at("nodes")) {
    if (n.at("side") == "left") {
      d.left.push_back(n.at("label").get<std::string>());
    } else {
      d.right.push_back(n.at("label").get<std::string>());
    }
  }
  for (const auto& l : j.at("links")) {
    PairScore p;
    p.a = l.at("a").get<std::string>();
    p.b = l.at("b").get<std::string>();
    p.raw_sim = l.at("raw_sim").get<double>();
    p.norm_sim = l.at("width").get<double>();
    p.raw_sent = l.at("raw_sent").get<double>();
    p.norm_sent = l.at("norm_sent").get<double>();
    d.links.push_back(std::move(p));
  }
  if (d.links.size() != d.left.size() * d.right.size()) {
    throw Error(ErrorCode::kInvalidArgument, "diagram link count does not match its nodes");
  }
  return d;
}

// ---------------------------------------------------------------------------
// Embedding providers

std::vector<double> HashEmbeddingProvider::embed(const std::string& text) {
  std::string key = normal_form(text);
  std::vector<double> v(dim_);
  std::string block;
  for (size_t i = 0; i < dim_; ++i) {
    if (i % 16 == 0) block = sha256_hex(key + "#" + std::to_string(i / 16));
    // Two hex bytes per entry -> [0, 65535] -> [-1, 1].
    unsigned value = static_cast<unsigned>(std::stoul(block.substr((i % 16) * 4, 4), nullptr, 16));
    v[i] = static_cast<double>(value) / 32767.5 - 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

TableEmbeddingProvider::TableEmbeddingProvider(const fs::path& path) : dim_(0), fallback_(1) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kEmbeddingUnavailable,
                "cannot load embedding table " + path.string() + ": " + e.what());
  }
  tag_ = j.at("provider_tag").get<std::string>();
  dim_ = j.at("dim").get<size_t>();
  for (const auto& [text, vec] : j.at("vectors").items()) {
    vectors_[normal_form(text)] = vec.get<std::vector<double>>();
  }
  fallback_ = HashEmbeddingProvider(dim_);
}

TableEmbeddingProvider::TableEmbeddingProvider(std::string tag, size_t dim,
                                               std::map<std::string, std::vector<double>> vectors)
    : tag_(std::move(tag)), dim_(dim), fallback_(dim) {
  for (auto& [text, vec] : vectors) vectors_[normal_form(text)] = std::move(vec);
}

std::vector<double> TableEmbeddingProvider::embed(const std::string& text) {
  auto it = vectors_.find(normal_form(text));
  if (it != vectors_.end()) return it->second;
  return fallback_.embed(text);
}

HttpEmbeddingProvider::HttpEmbeddingProvider(EmbeddingHttpOptions options,
                                             std::shared_ptr<HttpTransport> transport)
    : options_(std::move(options)), transport_(std::move(transport)) {
  while (!options_.base_url.empty() && options_.base_url.back() == '/') {
    options_.base_url.pop_back();
  }
}

std::vector<double> HttpEmbeddingProvider::embed(const std::string& text) {
  HttpRequest req;
  req.method = "POST";
  req.url = options_.base_url + "/embeddings";
  req.headers["Content-Type"] = "application/json";
  if (!options_.api_key.empty()) req.headers["Authorization"] = "Bearer " + options_.api_key;
  req.body = nlohmann::json{{"model", options_.model}, {"input", text}}.dump();
  auto resp = send_with_retry(*transport_, req, options_.retry);
  if (resp.status < 200 || resp.status >= 300) {
    throw Error(ErrorCode::kEmbeddingUnavailable,
                "embedding request failed: " +
                    (resp.status == 0 ? resp.error : "HTTP " + std::to_string(resp.status)),
                {{"status", resp.status}});
  }
  try {
    auto j = nlohmann::json::parse(resp.body);
    return j.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kEmbeddingUnavailable,
                std::string("embedding response malformed: ") + e.what());
  }
}

RecordingEmbeddingProvider::RecordingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                                       fs::path table_path)
    : inner_(std::move(inner)), path_(std::move(table_path)) {
  if (fs::exists(path_)) {
    table_ = nlohmann::json::parse(read_file(path_));
  } else {
    table_ = {{"provider_tag", inner_->tag()}, {"dim", 0}, {"vectors", nlohmann::json::object()}};
  }
}

std::vector<double> RecordingEmbeddingProvider::embed(const std::string& text) {
  auto v = inner_->embed(text);
  std::lock_guard lock(mu_);
  table_["provider_tag"] = inner_->tag();
  table_["dim"] = v.size();
  table_["vectors"][normal_form(text)] = v;
  write_file_atomic(path_, table_.dump(2) + "\n");
  return v;
}

// ---------------------------------------------------------------------------
// Scorer

Scorer::Scorer(std::shared_ptr<EmbeddingProvider> embeddings,
               std::shared_ptr<SentimentProvider> sentiment)
    : embeddings_(std::move(embeddings)), sentiment_(std::move(sentiment)) {}

void Scorer::expect_dim(size_t dim) {
  std::unique_lock lock(mu_);
  dim_ = dim;
}

std::optional<size_t> Scorer::expected_dim() const {
  std::shared_lock lock(mu_);
  return dim_;
}

EmbeddingVector Scorer::embed(const std::string& text) {
  if (trim(text).empty()) throw Error(ErrorCode::kInvalidArgument, "cannot embed empty text");
  if (!embeddings_) throw Error(ErrorCode::kEmbeddingUnavailable, "no embedding provider configured");
  std::string tag = embeddings_->tag();
  std::string key = tag + "\x1f" + normal_form(text);
  {
    std::shared_lock lock(mu_);
    if (auto it = embed_cache_.find(key); it != embed_cache_.end()) return it->second;
  }
  ++embedding_calls_;
  EmbeddingVector v{embeddings_->embed(text), tag};
  for (double x : v.values) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kEmbeddingUnavailable, "embedding has non-finite entries");
    }
  }
  std::unique_lock lock(mu_);
  if (v.values.empty()) throw Error(ErrorCode::kEmbeddingUnavailable, "embedding is empty");
  if (dim_ && *dim_ != v.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding provider returned dimension " + std::to_string(v.dim()) +
                    ", expected " + std::to_string(*dim_),
                {{"expected", *dim_}, {"actual", v.dim()}});
  }
  if (!dim_) dim_ = v.dim();
  embed_cache_.emplace(key, v);
  return v;
}

SentimentScore Scorer::sentiment(const std::string& text) {
  if (trim(text).empty()) throw Error(ErrorCode::kInvalidArgument, "cannot score empty text");
  if (!sentiment_) throw Error(ErrorCode::kSentimentUnavailable, "no sentiment provider configured");
  std::string key = normal_form(text);
  {
    std::shared_lock lock(mu_);
    if (auto it = sentiment_cache_.find(key); it != sentiment_cache_.end()) return it->second;
  }
  auto labelled = sentiment_->classify(text);
  auto s = sentiment_from_label(labelled.label, labelled.confidence);
  std::unique_lock lock(mu_);
  sentiment_cache_.emplace(key, s);
  return s;
}

AnalysisDiagram Scorer::build_diagram(DiagramKind kind, const std::vector<std::string>& left,
                                      const std::vector<std::string>& right) {
  if (left.empty() || right.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "diagram sides must be non-empty");
  }
  AnalysisDiagram d;
  d.kind = kind;
  d.left = left;
  d.right = right;
  d.palette = palette_for(kind);

  std::vector<EmbeddingVector> lv;
  std::vector<EmbeddingVector> rv;
  std::vector<SentimentScore> ls;
  std::vector<SentimentScore> rs;
  for (const auto& x : left) {
    lv.push_back(embed(x));
    ls.push_back(sentiment(x));
  }
  for (const auto& x : right) {
    rv.push_back(embed(x));
    rs.push_back(sentiment(x));
  }
  d.embedding_tag = lv.front().provider_tag;
  d.embedding_dim = lv.front().dim();
  d.links.reserve(left.size() * right.size());
  for (size_t i = 0; i < left.size(); ++i) {
    for (size_t j = 0; j < right.size(); ++j) {
      PairScore p;
      p.a = left[i];
      p.b = right[j];
      p.raw_sim = cosine_similarity(lv[i], rv[j]);
      p.raw_sent = pair_sentiment(ls[i], rs[j]);
      d.links.push_back(std::move(p));
    }
  }
  normalize_diagram(d);
  return d;
}

}  // namespace metablend
