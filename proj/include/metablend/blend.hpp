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

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metablend/mapping.hpp"
#include "metablend/oracle.hpp"
#include "metablend/scoring.hpp"

namespace metablend {

inline constexpr int kDefaultSchemeCount = 3;
inline constexpr int kMaxSchemeCount = 5;

struct BlendPair {
  std::string object_a;
  std::string attribute_a;
  std::string object_b;
  std::string attribute_b;
  bool operator==(const BlendPair&) const = default;
};

struct BlendScheme {
  std::string scheme;
  std::string reason;
  bool operator==(const BlendScheme&) const = default;
};

struct SecondaryElement {
  std::string concept_name;
  std::string object;
  std::string attribute;
  bool operator==(const SecondaryElement&) const = default;
};

struct ImagePrompt {
  std::string id;  // "p-" + first 12 hex of sha256(text)
  std::string text;
  BlendPair pair;
  BlendScheme scheme;
  Theme theme;
  std::vector<SecondaryElement> secondary;
  bool operator==(const ImagePrompt&) const = default;
};

struct ConceptChoice {
  std::string concept_name;
  std::string object;
  std::string attribute;
  bool operator==(const ConceptChoice&) const = default;
};

struct BlendPlan {
  BlendPair primary;
  std::string concept_a;  // concept of primary.object_a
  std::string concept_b;
  std::vector<SecondaryElement> secondary;
  bool operator==(const BlendPlan&) const = default;
};

void to_json(nlohmann::json& j, const BlendPair& p);
void from_json(const nlohmann::json& j, BlendPair& p);
void to_json(nlohmann::json& j, const BlendScheme& s);
void from_json(const nlohmann::json& j, BlendScheme& s);
void to_json(nlohmann::json& j, const SecondaryElement& e);
void from_json(const nlohmann::json& j, SecondaryElement& e);
void to_json(nlohmann::json& j, const ImagePrompt& p);
void from_json(const nlohmann::json& j, ImagePrompt& p);
void to_json(nlohmann::json& j, const ConceptChoice& c);
void from_json(const nlohmann::json& j, ConceptChoice& c);
void to_json(nlohmann::json& j, const BlendPlan& p);
void from_json(const nlohmann::json& j, BlendPlan& p);

// Non-empty fields, distinct objects. With `candidates`, each attribute must
// also belong to its object's stored attributes. Throws kInvalidArgument.
void check_pair(const BlendPair& pair, const std::vector<ObjectCandidate>* candidates = nullptr);

std::string prompt_id(const std::string& text);

// n in [1, 5]. Exactly n distinct schemes; surrounding <...> markers from
// the template's example format are removed.
std::vector<BlendScheme> generate_schemes(Oracle& oracle, const BlendPair& pair,
                                          int n = kDefaultSchemeCount,
                                          const CompleteOptions& options = {});

// Image template with the pair, scheme and theme bound. One trailing "." is
// dropped from the theme because the template supplies its own.
ImagePrompt compose_image_prompt(const BlendPair& pair, const BlendScheme& scheme,
                                 const Theme& theme);

// Primary clause, then "Include a/an {object} as a secondary element
// representing {concept}." per secondary element, then the considerations
// clause. No secondary elements gives compose_image_prompt's text.
ImagePrompt compose_multi_prompt(const BlendPlan& plan, const BlendScheme& scheme,
                                 const Theme& theme);

// >= 3 distinct concepts, one choice each. `diagram` must hold a link for
// every cross-concept pair of chosen objects. Primary = max norm_sim pair
// (ties: higher norm_sent, then names); secondary ordered by descending
// norm_sim to the closer primary object. Input order does not matter.
BlendPlan plan_multi_concept(const std::vector<ConceptChoice>& choices,
                             const AnalysisDiagram& diagram);

}  // namespace metablend
