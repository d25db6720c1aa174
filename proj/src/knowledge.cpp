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

#include "metablend/knowledge.hpp"

#include <algorithm>
#include <map>

#include "metablend/error.hpp"

namespace metablend {

namespace fs = std::filesystem;

std::string_view knowledge_kind_name(KnowledgeKind kind) {
  return kind == KnowledgeKind::kObjects ? "objects" : "attributes";
}

std::string KnowledgeQuery::cache_key() const {
  nlohmann::json key = {{"seed", normal_form(seed)},
                        {"kind", knowledge_kind_name(kind)},
                        {"limit", limit}};
  return sha256_hex(key.dump());
}

std::string normalize_concept_uri(std::string_view uri) {
  // /c/<lang>/<term>[/<pos>[/...]]
  std::string_view rest = uri;
  if (rest.rfind("/c/", 0) == 0) {
    rest.remove_prefix(3);
    auto slash = rest.find('/');
    rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
    auto next = rest.find('/');
    if (next != std::string_view::npos) rest = rest.substr(0, next);
  }
  std::string term(rest);
  std::replace(term.begin(), term.end(), '_', ' ');
  return normal_form(term);
}

std::vector<RelatedTerm> rank_terms(std::vector<RelatedTerm> terms, int limit) {
  std::map<std::string, RelatedTerm> best;
  for (auto& t : terms) {
    t.term = normal_form(t.term);
    if (t.term.empty()) continue;
    auto [it, inserted] = best.emplace(t.term, t);
    if (!inserted && t.weight > it->second.weight) it->second = t;
  }
  std::vector<RelatedTerm> out;
  out.reserve(best.size());
  for (auto& [_, t] : best) out.push_back(std::move(t));
  std::stable_sort(out.begin(), out.end(), [](const RelatedTerm& a, const RelatedTerm& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.term < b.term;
  });
  if (limit >= 0 && out.size() > static_cast<size_t>(limit)) out.resize(limit);
  return out;
}

KnowledgeClient::KnowledgeClient(KnowledgeOptions options,
                                 std::shared_ptr<HttpTransport> transport,
                                 std::shared_ptr<Clock> clock)
    : options_(std::move(options)), transport_(std::move(transport)), clock_(std::move(clock)) {
  while (!options_.base_url.empty() && options_.base_url.back() == '/') {
    options_.base_url.pop_back();
  }
}

std::vector<RelatedTerm> KnowledgeClient::related_objects(const std::string& concept_name,
                                                          int limit) {
  return lookup({concept_name, KnowledgeKind::kObjects, limit});
}

std::vector<RelatedTerm> KnowledgeClient::related_attributes(const std::string& object,
                                                             int limit) {
  return lookup({object, KnowledgeKind::kAttributes, limit});
}

std::vector<RelatedTerm> KnowledgeClient::lookup(const KnowledgeQuery& query) {
  if (trim(query.seed).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "knowledge query seed is empty");
  }
  if (query.limit < 1 || query.limit > kMaxKnowledgeLimit) {
    throw Error(ErrorCode::kInvalidArgument,
                "knowledge limit must be in [1, " + std::to_string(kMaxKnowledgeLimit) + "]");
  }

  if (options_.mode == ProviderMode::kOffline) {
    if (!options_.fixtures_dir) {
      throw Error(ErrorCode::kFixtureMissing, "offline mode without a fixtures directory");
    }
    if (auto hit = read_record(*options_.fixtures_dir, query)) return *hit;
    throw Error(ErrorCode::kFixtureMissing,
                "no knowledge fixture for '" + query.seed + "' (" +
                    std::string(knowledge_kind_name(query.kind)) + ", limit " +
                    std::to_string(query.limit) + ")",
                {{"key", query.cache_key()}});
  }

  if (options_.cache_dir) {
    if (auto hit = read_record(*options_.cache_dir, query)) return *hit;
  }
  auto terms = fetch(query);
  if (options_.cache_dir) write_record(*options_.cache_dir, query, terms);
  if (options_.mode == ProviderMode::kRecord && options_.fixtures_dir) {
    write_record(*options_.fixtures_dir, query, terms);
  }
  return terms;
}

std::vector<RelatedTerm> KnowledgeClient::fetch(const KnowledgeQuery& query) {
  std::string seed = normal_form(query.seed);
  std::vector<RelatedTerm> terms;
  if (query.kind == KnowledgeKind::kObjects) {
    terms = related_endpoint(seed, query.limit);
    auto ranked = rank_terms(terms, query.limit);
    if (static_cast<int>(ranked.size()) * 2 < query.limit) {
      for (const char* rel : {"RelatedTo", "IsA", "AtLocation"}) {
        auto more = edge_query(seed, rel, query.limit);
        terms.insert(terms.end(), more.begin(), more.end());
      }
    }
  } else {
    for (const char* rel : {"HasProperty", "RelatedTo"}) {
      auto more = edge_query(seed, rel, query.limit);
      terms.insert(terms.end(), more.begin(), more.end());
    }
  }
  // The seed itself is never a related term.
  std::erase_if(terms, [&](const RelatedTerm& t) { return normal_form(t.term) == seed; });
  return rank_terms(std::move(terms), query.limit);
}

nlohmann::json KnowledgeClient::get_json(const std::string& url) {
  HttpRequest req;
  req.url = url;
  req.headers["Accept"] = "application/json";
  ++network_requests_;
  auto resp = send_with_retry(*transport_, req, options_.retry);
  if (resp.status == 429) {
    nlohmann::json detail = {{"status", 429}};
    if (auto it = resp.headers.find("Retry-After"); it != resp.headers.end()) {
      detail["retry_after"] = it->second;
    }
    throw Error(ErrorCode::kRateLimited, "knowledge base rate limited the client", detail);
  }
  if (resp.status == 404) return nlohmann::json::object();
  if (resp.status < 200 || resp.status >= 300) {
    throw Error(ErrorCode::kKnowledgeUnavailable,
                "knowledge base request failed: " +
                    (resp.status == 0 ? resp.error : "HTTP " + std::to_string(resp.status)),
                {{"status", resp.status}, {"url", url}});
  }
  try {
    return nlohmann::json::parse(resp.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kKnowledgeUnavailable,
                std::string("knowledge base returned invalid JSON: ") + e.what());
  }
}

std::vector<RelatedTerm> KnowledgeClient::related_endpoint(const std::string& seed, int limit) {
  std::string term = seed;
  std::replace(term.begin(), term.end(), ' ', '_');
  auto body = get_json(options_.base_url + "/related/c/en/" + url_encode(term) +
                       "?filter=/c/en&limit=" + std::to_string(limit));
  std::vector<RelatedTerm> out;
  if (!body.contains("related")) return out;
  for (const auto& r : body["related"]) {
    std::string id = r.value("@id", "");
    if (id.rfind("/c/en/", 0) != 0) continue;
    out.push_back({normalize_concept_uri(id), std::max(0.0, r.value("weight", 0.0)),
                   std::nullopt});
  }
  return out;
}

std::vector<RelatedTerm> KnowledgeClient::edge_query(const std::string& seed,
                                                     const std::string& relation, int limit) {
  std::string term = seed;
  std::replace(term.begin(), term.end(), ' ', '_');
  auto body = get_json(options_.base_url + "/query?start=/c/en/" + url_encode(term) +
                       "&rel=/r/" + relation + "&limit=" + std::to_string(limit));
  std::vector<RelatedTerm> out;
  if (!body.contains("edges")) return out;
  for (const auto& e : body["edges"]) {
    const auto& end = e.contains("end") ? e["end"] : nlohmann::json::object();
    std::string id = end.value("@id", "");
    std::string lang = end.value("language", id.rfind("/c/en/", 0) == 0 ? "en" : "");
    if (lang != "en") continue;
    out.push_back({normalize_concept_uri(id), std::max(0.0, e.value("weight", 0.0)),
                   relation});
  }
  return out;
}

std::optional<std::vector<RelatedTerm>> KnowledgeClient::read_record(
    const fs::path& dir, const KnowledgeQuery& query) const {
  fs::path path = dir / "knowledge" / (query.cache_key() + ".json");
  if (!fs::exists(path)) return std::nullopt;
  nlohmann::json record;
  try {
    record = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kKnowledgeUnavailable,
                "corrupt knowledge record " + path.string() + ": " + e.what());
  }
  if (record.value("schema_version", 0) != kKnowledgeRecordVersion) {
    return std::nullopt;  // stale schema: treat as a miss
  }
  return record.at("terms").get<std::vector<RelatedTerm>>();
}

void KnowledgeClient::write_record(const fs::path& dir, const KnowledgeQuery& query,
                                   const std::vector<RelatedTerm>& terms) const {
  nlohmann::json record = {
      {"schema_version", kKnowledgeRecordVersion},
      {"query",
       {{"seed", normal_form(query.seed)},
        {"kind", knowledge_kind_name(query.kind)},
        {"limit", query.limit}}},
      {"retrieved_at", clock_->now()},
      {"terms", terms},
  };
  write_file_atomic(dir / "knowledge" / (query.cache_key() + ".json"), record.dump(2) + "\n");
}

void to_json(nlohmann::json& j, const RelatedTerm& t) {
  j = {{"term", t.term}, {"weight", t.weight}};
  if (t.relation) j["relation"] = *t.relation;
}

void from_json(const nlohmann::json& j, RelatedTerm& t) {
  t.term = j.at("term").get<std::string>();
  t.weight = j.at("weight").get<double>();
  if (j.contains("relation")) {
    t.relation = j.at("relation").get<std::string>();
  } else {
    t.relation.reset();
  }
}

}  // namespace metablend
