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

#include "metablend/mapping.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

#include "metablend/error.hpp"
#include "metablend/util.hpp"

namespace metablend {

namespace {

const std::unordered_set<std::string>& category_words() {
  static const std::unordered_set<std::string> kWords = {
      "fruit", "fruits", "vegetable", "vegetables", "animal", "animals", "food",
      "foods", "furniture", "tool", "tools", "plant", "plants", "clothes",
      "clothing", "vehicle", "vehicles", "object", "objects", "thing", "things",
      "item", "items", "sport", "sports", "drink", "drinks", "beverage",
      "beverages", "toy", "toys", "insect", "insects", "mammal", "mammals",
      "equipment", "accessories", "instrument", "instruments", "appliance",
      "appliances", "produce", "weapon", "weapons", "stationery", "goods",
      "materials", "supplies"};
  return kWords;
}

const std::unordered_set<std::string>& abstract_words() {
  static const std::unordered_set<std::string> kWords = {
      "exercise", "beauty", "love", "hope", "knowledge", "health", "happiness",
      "freedom", "time", "energy", "wisdom", "peace", "life", "death", "success",
      "power", "strength", "truth", "fitness", "wellness", "nutrition", "growth",
      "change", "fear", "joy", "faith", "courage", "motivation", "memory",
      "justice", "kindness", "friendship", "loneliness", "sadness", "anger",
      "creativity", "imagination", "inspiration", "progress", "danger", "harmony",
      "balance", "vitality", "warmth", "warming"};
  return kWords;
}

// -ing nouns that name physical things rather than activities.
const std::unordered_set<std::string>& ing_objects() {
  static const std::unordered_set<std::string> kWords = {
      "ring", "king", "string", "wing", "ceiling", "building", "painting", "swing",
      "spring", "sling", "earring", "pudding", "stocking", "stuffing", "icing",
      "railing", "awning", "bedding", "frosting", "dumpling", "sapling", "seedling",
      "duckling", "wedding ring", "ding", "thing", "lightning", "drawing", "carving",
      "clothing", "housing", "piping", "tubing", "wiring", "ring light"};
  return kWords;
}

std::vector<std::string> words_of(const std::string& normal) {
  std::vector<std::string> out;
  std::string w;
  for (char c : normal) {
    if (c == ' ') {
      if (!w.empty()) out.push_back(std::move(w));
      w.clear();
    } else {
      w.push_back(c);
    }
  }
  if (!w.empty()) out.push_back(std::move(w));
  return out;
}

std::string exclusion_addendum(const std::vector<std::string>& names) {
  return "Do not include any of the following objects, which were already suggested or "
         "rejected: " +
         join(names, ", ") + ".";
}

}  // namespace

void to_json(nlohmann::json& j, const ObjectCandidate& c) {
  j = {{"name", c.name},
       {"concept", c.concept_name},
       {"rationale", c.rationale},
       {"attributes", c.attributes},
       {"iteration", c.iteration},
       {"user_supplied", c.user_supplied}};
  j["preview"] = c.preview ? nlohmann::json(*c.preview) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, ObjectCandidate& c) {
  c.name = j.at("name").get<std::string>();
  c.concept_name = j.at("concept").get<std::string>();
  c.rationale = j.at("rationale").get<std::string>();
  c.attributes = j.at("attributes").get<std::vector<std::string>>();
  c.iteration = j.at("iteration").get<int>();
  c.user_supplied = j.value("user_supplied", false);
  if (j.contains("preview") && !j.at("preview").is_null()) {
    c.preview = j.at("preview").get<ImageArtifact>();
  } else {
    c.preview.reset();
  }
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (size_t i = 0; i < text.size(); ++i) {
    current.push_back(text[i]);
    char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      // Swallow runs like "?!" or "...".
      while (i + 1 < text.size() &&
             (text[i + 1] == '.' || text[i + 1] == '!' || text[i + 1] == '?')) {
        current.push_back(text[++i]);
      }
      if (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
        if (auto s = trim(current); !s.empty()) out.push_back(s);
        current.clear();
      }
    }
  }
  if (auto s = trim(current); !s.empty()) out.push_back(s);
  return out;
}

std::optional<std::string> object_rejection(const std::string& name, const std::string& concept_name,
                                            const std::vector<std::string>& excluded) {
  std::string n = normal_form(name);
  if (n.empty()) return "empty name";
  if (n == normal_form(concept_name)) return "same as the concept";
  for (const auto& e : excluded) {
    if (normal_form(e) == n) return "already suggested";
  }
  auto words = words_of(n);
  if (words.size() == 1 && n.size() > 4 && n.ends_with("ing") && !ing_objects().count(n)) {
    return "activity (gerund)";
  }
  if (category_words().count(n)) return "category word";
  if (abstract_words().count(n)) return "abstract concept";
  return std::nullopt;
}

std::optional<std::string> attribute_rejection(const std::vector<std::string>& attributes) {
  if (attributes.size() != kAttributesPerObject) {
    return "expected " + std::to_string(kAttributesPerObject) + " attributes, got " +
           std::to_string(attributes.size());
  }
  static const std::unordered_set<std::string> kGeneric = {"size", "color", "colour", "shape"};
  std::set<std::string> seen;
  for (const auto& a : attributes) {
    std::string n = normal_form(a);
    if (n.empty()) return "empty attribute";
    if (kGeneric.count(n)) return "generic attribute '" + a + "'";
    if (!seen.insert(n).second) return "duplicate attribute '" + a + "'";
  }
  return std::nullopt;
}

std::string serialize_related(const std::vector<RelatedTerm>& terms, size_t cap) {
  std::string out;
  for (const auto& t : terms) {
    size_t extra = t.term.size() + (out.empty() ? 0 : 2);
    if (out.size() + extra > cap) break;
    if (!out.empty()) out += ", ";
    out += t.term;
  }
  return out;
}

std::string preview_prompt(const std::string& object) {
  return "A photo of a single " + object +
         " centered on a plain, solid-color background, no text.";
}

Mapper::Mapper(std::shared_ptr<Oracle> oracle, std::shared_ptr<KnowledgeClient> knowledge,
               MapperOptions options, WarningSink on_warning)
    : oracle_(std::move(oracle)),
      knowledge_(std::move(knowledge)),
      options_(options),
      on_warning_(std::move(on_warning)) {}

void Mapper::warn(const std::string& message) {
  if (on_warning_) on_warning_(message);
}

Theme Mapper::infer_theme(Expression& expr) {
  if (trim(expr.raw).empty()) {
    throw Error(ErrorCode::kEmptyExpression, "cannot infer the theme of an empty expression");
  }
  Bindings bindings = {{"Input", expr.raw}};
  CompleteOptions opts{options_.temperature, options_.max_attempts, "", std::nullopt};

  auto ask = [&](const std::string& addendum) {
    opts.addendum = addendum;
    auto resp = oracle_->complete(TemplateId::kTheme, bindings, opts);
    return split_sentences(trim(resp.parsed["result"].get<std::string>()));
  };

  auto sentences = ask("");
  if (sentences.size() > 1) {
    sentences = ask("Answer with exactly one sentence.");
  }
  if (sentences.empty()) {
    throw Error(ErrorCode::kInvalidOracleResponse, "theme result is empty");
  }
  if (sentences.size() > 1) {
    warn("theme oracle returned " + std::to_string(sentences.size()) +
         " sentences; kept the first");
  }
  std::string sentence = sentences.front();
  char last = sentence.back();
  if (last != '.' && last != '!' && last != '?') sentence.push_back('.');
  expr.theme = sentence;
  return {sentence};
}

std::vector<ObjectCandidate> Mapper::suggest_objects(const std::string& concept_name,
                                                     const Expression& expr, int iteration,
                                                     const std::vector<std::string>& previous) {
  std::string nc = normal_form(concept_name);
  bool selected = std::any_of(expr.tokens.begin(), expr.tokens.end(), [&](const ConceptToken& t) {
    return t.selected && normal_form(t.surface) == nc;
  });
  if (!selected) {
    throw Error(ErrorCode::kPreconditionFailed,
                "'" + concept_name + "' is not a selected concept of the expression");
  }
  if (iteration < 1) throw Error(ErrorCode::kInvalidArgument, "iteration must be >= 1");

  auto related = knowledge_->related_objects(concept_name, static_cast<int>(kRelatedObjectsLimit));
  Bindings bindings = {{"INPUT", concept_name},
                       {"Related_Concepts", serialize_related(related, kRelatedConceptsCap)}};

  std::vector<ObjectCandidate> accepted;
  std::vector<std::string> rejected;
  std::vector<std::string> excluded = previous;

  // Initial request plus one retry when validation leaves fewer than five.
  for (int round = 0; round < 2 && accepted.size() < kObjectsPerBatch; ++round) {
    std::vector<std::string> shown = previous;
    shown.insert(shown.end(), rejected.begin(), rejected.end());
    for (const auto& a : accepted) shown.push_back(a.name);
    CompleteOptions opts{options_.temperature, options_.max_attempts,
                         shown.empty() ? "" : exclusion_addendum(shown), std::nullopt};
    auto resp = oracle_->complete(TemplateId::kObjects, bindings, opts);
    for (const auto& row : resp.parsed["result"]) {
      std::string name = trim(row[0].get<std::string>());
      std::string reason = trim(row[1].get<std::string>());
      std::vector<std::string> taken = excluded;
      for (const auto& a : accepted) taken.push_back(a.name);
      if (auto why = object_rejection(name, concept_name, taken)) {
        if (!normal_form(name).empty()) rejected.push_back(name);
        warn("rejected object '" + name + "' for '" + concept_name + "': " + *why);
        continue;
      }
      if (accepted.size() < kObjectsPerBatch) {
        accepted.push_back({name, concept_name, reason, {}, iteration, false, std::nullopt});
      }
    }
  }

  if (accepted.size() < kObjectsPerBatch) {
    nlohmann::json partial = nlohmann::json::array();
    for (const auto& a : accepted) partial.push_back(a.name);
    throw Error(ErrorCode::kCandidateValidationFailed,
                "only " + std::to_string(accepted.size()) + " valid objects for '" + concept_name + "'",
                {{"partial", partial}, {"rejected", rejected}});
  }
  return accepted;
}

std::vector<ObjectCandidate> Mapper::suggest_attributes(std::vector<ObjectCandidate> candidates) {
  if (candidates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no candidates to describe");
  }
  for (const auto& c : candidates) {
    if (trim(c.name).empty()) throw Error(ErrorCode::kInvalidArgument, "candidate has no name");
  }

  std::vector<size_t> pending(candidates.size());
  for (size_t i = 0; i < pending.size(); ++i) pending[i] = i;
  std::map<size_t, std::string> last_problem;

  for (int round = 0; round < 2 && !pending.empty(); ++round) {
    std::vector<std::string> names;
    std::string related;
    for (size_t idx : pending) {
      const auto& name = candidates[idx].name;
      names.push_back(name);
      auto terms = knowledge_->related_attributes(name, static_cast<int>(kRelatedAttributesLimit));
      std::string part = name + ": " + serialize_related(terms, kRelatedConceptsCap);
      if (!related.empty() && related.size() + 2 + part.size() > kRelatedConceptsCap) continue;
      if (!related.empty()) related += "; ";
      related += part;
    }
    Bindings bindings = {{"INPUT", join(names, ", ")}, {"Related_Concepts", related}};
    std::string addendum;
    if (round > 0) {
      addendum =
          "Give exactly five distinct visible attributes for each object. Do not use the "
          "general terms \"size\", \"color\", or \"shape\".";
    }
    CompleteOptions opts{options_.temperature, options_.max_attempts, addendum, pending.size()};
    auto resp = oracle_->complete(TemplateId::kAttributes, bindings, opts);
    const auto& rows = resp.parsed["result"];

    // Match rows to candidates by name; fall back to position.
    std::vector<size_t> still;
    for (size_t k = 0; k < pending.size(); ++k) {
      size_t idx = pending[k];
      const nlohmann::json* row = nullptr;
      for (const auto& r : rows) {
        if (normal_form(r[0].get<std::string>()) == normal_form(candidates[idx].name)) {
          row = &r;
          break;
        }
      }
      if (!row) row = &rows[k];
      std::vector<std::string> attrs;
      for (size_t c = 1; c < row->size(); ++c) attrs.push_back(trim((*row)[c].get<std::string>()));
      if (auto why = attribute_rejection(attrs)) {
        last_problem[idx] = *why;
        warn("rejected attributes for '" + candidates[idx].name + "': " + *why);
        still.push_back(idx);
        continue;
      }
      candidates[idx].attributes = std::move(attrs);
    }
    pending = std::move(still);
  }

  if (!pending.empty()) {
    nlohmann::json failed = nlohmann::json::object();
    for (size_t idx : pending) failed[candidates[idx].name] = last_problem[idx];
    throw Error(ErrorCode::kAttributeValidationFailed,
                "attribute validation failed for " + std::to_string(pending.size()) + " object(s)",
                {{"failed", failed}});
  }
  return candidates;
}

ObjectCandidate Mapper::user_candidate(const std::string& concept_name, const std::string& name,
                                       int iteration) {
  ObjectCandidate c;
  c.name = trim(name);
  c.concept_name = concept_name;
  c.rationale = "User-supplied: " + concept_name + " is like " +
                std::string(indefinite_article(c.name)) + " " + c.name + ".";
  c.iteration = iteration;
  c.user_supplied = true;
  return suggest_attributes({c}).front();
}

ImageArtifact Mapper::preview_object(const ObjectCandidate& candidate) {
  if (trim(candidate.name).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "candidate has no name");
  }
  std::string key = normal_form(candidate.name);
  {
    std::lock_guard lock(preview_mu_);
    if (auto it = previews_.find(key); it != previews_.end()) return it->second;
  }
  auto art = oracle_->generate_image(preview_prompt(candidate.name));
  std::lock_guard lock(preview_mu_);
  return previews_.emplace(key, art).first->second;
}

}  // namespace metablend
