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

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metablend/expression.hpp"
#include "metablend/knowledge.hpp"
#include "metablend/oracle.hpp"

namespace metablend {

inline constexpr size_t kObjectsPerBatch = 5;
inline constexpr size_t kAttributesPerObject = 5;
inline constexpr size_t kRelatedObjectsLimit = 50;
inline constexpr size_t kRelatedAttributesLimit = 20;
inline constexpr size_t kRelatedConceptsCap = 2000;

struct Theme {
  std::string sentence;
  bool operator==(const Theme&) const = default;
};

struct ObjectCandidate {
  std::string name;
  std::string concept_name;
  std::string rationale;
  std::vector<std::string> attributes;  // exactly 5 once filled
  int iteration = 1;
  bool user_supplied = false;
  std::optional<ImageArtifact> preview;

  bool operator==(const ObjectCandidate&) const = default;
};

void to_json(nlohmann::json& j, const ObjectCandidate& c);
void from_json(const nlohmann::json& j, ObjectCandidate& c);

// Splits on terminal punctuation followed by whitespace or end of text.
std::vector<std::string> split_sentences(const std::string& text);

// Why `name` is not an acceptable object for `concept`, or nullopt.
// Rejects empty names, the concept itself, previously returned names,
// single-word activities (gerunds), category words and abstract nouns.
std::optional<std::string> object_rejection(const std::string& name, const std::string& concept_name,
                                            const std::vector<std::string>& excluded);

// Why an attribute row is not acceptable, or nullopt. Needs 5 non-empty,
// case-insensitively distinct attributes, none of them a generic class word
// ("size", "color", "shape").
std::optional<std::string> attribute_rejection(const std::vector<std::string>& attributes);

// Comma-separated terms, cut at a term boundary so the result stays within
// `cap` characters.
std::string serialize_related(const std::vector<RelatedTerm>& terms, size_t cap);

std::string preview_prompt(const std::string& object);

struct MapperOptions {
  double temperature = 0.7;
  int max_attempts = 3;
};

// Concept -> object -> attribute inference on top of the oracle and the
// knowledge base. Warnings (e.g. a multi-sentence theme that had to be cut)
// go to `on_warning`.
class Mapper {
 public:
  using WarningSink = std::function<void(const std::string&)>;

  Mapper(std::shared_ptr<Oracle> oracle, std::shared_ptr<KnowledgeClient> knowledge,
         MapperOptions options = {}, WarningSink on_warning = nullptr);

  // Sets expr.theme and returns it.
  Theme infer_theme(Expression& expr);

  // Exactly five candidates (attributes empty). `previous` holds every name
  // already returned for this concept; none of them recur.
  std::vector<ObjectCandidate> suggest_objects(const std::string& concept_name, const Expression& expr,
                                               int iteration,
                                               const std::vector<std::string>& previous = {});

  std::vector<ObjectCandidate> suggest_attributes(std::vector<ObjectCandidate> candidates);

  // Candidate for a user-named object: templated rationale, attributes from
  // the oracle.
  ObjectCandidate user_candidate(const std::string& concept_name, const std::string& name,
                                 int iteration);

  // Cached per normalized name.
  ImageArtifact preview_object(const ObjectCandidate& candidate);

  void set_warning_sink(WarningSink sink) { on_warning_ = std::move(sink); }

 private:
  void warn(const std::string& message);

  std::shared_ptr<Oracle> oracle_;
  std::shared_ptr<KnowledgeClient> knowledge_;
  MapperOptions options_;
  WarningSink on_warning_;
  std::mutex preview_mu_;
  std::map<std::string, ImageArtifact> previews_;
};

}  // namespace metablend
