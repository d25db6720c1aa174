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

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace metablend {

enum class PartOfSpeech { kNoun, kVerb, kAdjective };

std::string_view pos_name(PartOfSpeech pos);
PartOfSpeech pos_from_name(std::string_view name);

// Byte offsets into Expression::raw, half-open.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

struct ConceptToken {
  std::string surface;
  PartOfSpeech pos = PartOfSpeech::kNoun;
  Span span;
  bool selected = false;

  bool operator==(const ConceptToken&) const = default;
};

struct Expression {
  std::string raw;
  std::vector<ConceptToken> tokens;
  std::optional<std::string> theme;

  std::vector<std::string> selected_surfaces() const;
  bool operator==(const Expression&) const = default;
};

// Coarse word class assigned by a tagger. Only the three open classes
// survive into an Expression.
enum class WordClass {
  kNoun,
  kVerb,
  kAdjective,
  kOther,
};

struct RawWord {
  std::string text;
  Span span;
};

// Pluggable part-of-speech tagger: one class per word, same length and order
// as the input.
class PosTagger {
 public:
  virtual ~PosTagger() = default;
  virtual std::vector<WordClass> tag(const std::vector<RawWord>& words) const = 0;
};

// Rule + lexicon tagger for short English expressions. Needs no model files.
class LexiconTagger : public PosTagger {
 public:
  std::vector<WordClass> tag(const std::vector<RawWord>& words) const override;
};

const PosTagger& default_tagger();

// Splits on anything that is not a letter, digit, apostrophe, or an inner
// hyphen. Bytes >= 0x80 count as letters so UTF-8 words stay whole.
std::vector<RawWord> split_words(std::string_view text);

// Throws kEmptyExpression for blank text and kTaggerUnavailable when
// `tagger` is null.
Expression parse_expression(std::string_view text, const PosTagger* tagger);
Expression parse_expression(std::string_view text);

// Throws kIndexOutOfRange if any pick is not a valid token index.
Expression select_concepts(const Expression& expr, const std::vector<std::size_t>& picks);

void to_json(nlohmann::json& j, const Expression& e);
void from_json(const nlohmann::json& j, Expression& e);

}  // namespace metablend
