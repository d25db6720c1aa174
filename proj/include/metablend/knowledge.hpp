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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metablend/http.hpp"
#include "metablend/util.hpp"

namespace metablend {

struct RelatedTerm {
  std::string term;  // lowercase, underscores replaced by spaces
  double weight = 0.0;
  std::optional<std::string> relation;

  bool operator==(const RelatedTerm&) const = default;
};

enum class KnowledgeKind { kObjects, kAttributes };

std::string_view knowledge_kind_name(KnowledgeKind kind);

struct KnowledgeQuery {
  std::string seed;
  KnowledgeKind kind = KnowledgeKind::kObjects;
  int limit = 50;

  // sha256 over (normal form of seed, kind, limit). Names the cache and
  // fixture record for this query.
  std::string cache_key() const;
};

inline constexpr int kMaxKnowledgeLimit = 100;
inline constexpr int kKnowledgeRecordVersion = 1;

// "/c/en/orange_juice/n" -> "orange juice".
std::string normalize_concept_uri(std::string_view uri);

enum class ProviderMode {
  kLive,     // network, optional read-through cache
  kOffline,  // fixtures only; a miss is an error
  kRecord,   // network, and every result is written to the fixtures dir
};

struct KnowledgeOptions {
  std::string base_url = "https://api.conceptnet.io";
  ProviderMode mode = ProviderMode::kLive;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> fixtures_dir;
  RetryPolicy retry;
};

// One-hop lookups against a ConceptNet-compatible REST API.
//
// Objects come from /related/c/en/{seed}; when that yields fewer than
// limit/2 English terms, edge queries over RelatedTo, IsA and AtLocation
// are merged in. Attributes come from edge queries over HasProperty and
// RelatedTo. Results are deduplicated after normalization (max weight
// wins) and sorted by descending weight, then term.
//
// Cache and fixture records share one file format:
//   <dir>/knowledge/<cache_key>.json
//   {"schema_version": 1, "query": {...}, "retrieved_at": "...", "terms": [...]}
class KnowledgeClient {
 public:
  KnowledgeClient(KnowledgeOptions options, std::shared_ptr<HttpTransport> transport,
                  std::shared_ptr<Clock> clock);

  std::vector<RelatedTerm> related_objects(const std::string& concept_name, int limit = 50);
  std::vector<RelatedTerm> related_attributes(const std::string& object, int limit = 50);

  std::vector<RelatedTerm> lookup(const KnowledgeQuery& query);

  // Network requests issued so far (cache and fixture hits excluded).
  long network_requests() const { return network_requests_.load(); }

 private:
  std::vector<RelatedTerm> fetch(const KnowledgeQuery& query);
  nlohmann::json get_json(const std::string& url);
  std::vector<RelatedTerm> related_endpoint(const std::string& seed, int limit);
  std::vector<RelatedTerm> edge_query(const std::string& seed, const std::string& relation,
                                      int limit);

  std::optional<std::vector<RelatedTerm>> read_record(const std::filesystem::path& dir,
                                                      const KnowledgeQuery& query) const;
  void write_record(const std::filesystem::path& dir, const KnowledgeQuery& query,
                    const std::vector<RelatedTerm>& terms) const;

  KnowledgeOptions options_;
  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<Clock> clock_;
  std::atomic<long> network_requests_{0};
};

// Sorts by descending weight (ties by term), merges duplicates keeping the
// higher weight, and truncates to `limit`.
std::vector<RelatedTerm> rank_terms(std::vector<RelatedTerm> terms, int limit);

void to_json(nlohmann::json& j, const RelatedTerm& t);
void from_json(const nlohmann::json& j, RelatedTerm& t);

}  // namespace metablend
