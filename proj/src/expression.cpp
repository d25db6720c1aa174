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

#include "metablend/expression.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "metablend/error.hpp"
#include "metablend/util.hpp"

namespace metablend {

std::string_view pos_name(PartOfSpeech pos) {
  switch (pos) {
    case PartOfSpeech::kNoun:
      return "noun";
    case PartOfSpeech::kVerb:
      return "verb";
    case PartOfSpeech::kAdjective:
      return "adjective";
  }
  return "noun";
}

PartOfSpeech pos_from_name(std::string_view name) {
  if (name == "noun") return PartOfSpeech::kNoun;
  if (name == "verb") return PartOfSpeech::kVerb;
  if (name == "adjective") return PartOfSpeech::kAdjective;
  throw Error(ErrorCode::kInvalidArgument, "unknown part of speech: " + std::string(name));
}

std::vector<std::string> Expression::selected_surfaces() const {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (t.selected) out.push_back(t.surface);
  }
  return out;
}

namespace {

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

// Closed-class word kinds. These never become concept tokens but steer the
// tagging of their neighbours.
enum class Function {
  kNone,
  kDeterminer,  // articles, demonstratives, possessives, quantifiers
  kSubjectPronoun,
  kObjectPronoun,
  kPreposition,
  kTo,
  kAuxiliary,  // be/have/do forms and modals
  kConjunction,
  kAdverb,
};

const std::unordered_map<std::string, Function>& function_words() {
  static const std::unordered_map<std::string, Function> kWords = [] {
    std::unordered_map<std::string, Function> m;
    auto add = [&m](Function f, std::initializer_list<const char*> words) {
      for (const char* w : words) m.emplace(w, f);
    };
    add(Function::kDeterminer,
        {"a", "an", "the", "this", "that", "these", "those", "some", "any", "every",
         "each", "no", "all", "both", "either", "neither", "my", "your", "his", "her",
         "its", "our", "their", "another", "such", "many", "much", "few", "several",
         "more", "most", "less", "least", "other", "whose", "one's"});
    add(Function::kSubjectPronoun,
        {"i", "you", "he", "she", "it", "we", "they", "who", "which", "what",
         "someone", "everyone", "nobody", "everything", "something", "nothing",
         "anything", "anyone", "one"});
    add(Function::kObjectPronoun,
        {"me", "him", "us", "them", "mine", "yours", "hers", "ours", "theirs",
         "myself", "yourself", "himself", "herself", "itself", "ourselves",
         "themselves", "whom"});
    add(Function::kPreposition,
        {"of", "in", "on", "at", "by", "for", "with", "about", "against", "between",
         "into", "through", "during", "before", "after", "above", "below", "from",
         "up", "down", "out", "off", "over", "under", "than", "like", "as", "per",
         "via", "within", "without", "across", "along", "among", "around", "behind",
         "beside", "beyond", "near", "toward", "towards", "upon", "unlike", "onto",
         "inside", "outside", "beneath", "despite", "until", "till"});
    add(Function::kTo, {"to"});
    add(Function::kAuxiliary,
        {"is", "am", "are", "was", "were", "be", "been", "being", "have", "has",
         "had", "having", "do", "does", "did", "will", "would", "shall", "should",
         "can", "could", "may", "might", "must", "isn't", "aren't", "wasn't",
         "weren't", "don't", "doesn't", "didn't", "won't", "can't", "cannot",
         "it's", "that's", "there's", "'s"});
    add(Function::kConjunction,
        {"and", "or", "but", "nor", "so", "yet", "if", "because", "while", "although",
         "though", "unless", "since", "whereas", "when", "where", "whether", "then",
         "once"});
    add(Function::kAdverb,
        {"not", "very", "too", "also", "just", "only", "really", "quite", "rather",
         "always", "never", "often", "sometimes", "here", "there", "now", "why",
         "how", "even", "still", "already", "ever", "again", "almost", "soon",
         "together", "away", "forever", "perhaps", "maybe", "indeed", "well"});
    return m;
  }();
  return kWords;
}

const std::unordered_set<std::string>& adjective_lexicon() {
  static const std::unordered_set<std::string> kWords = {
      "global", "warm", "cold", "hot", "cool", "bright", "dark", "good", "bad",
      "happy", "sad", "strong", "weak", "big", "small", "little", "large", "new",
      "old", "young", "free", "deep", "high", "low", "long", "short", "pure", "true",
      "real", "green", "red", "blue", "black", "white", "yellow", "round", "soft",
      "hard", "sweet", "bitter", "sour", "fresh", "clean", "dirty", "slow", "fast",
      "quick", "wise", "silent", "quiet", "loud", "heavy", "rich", "poor", "gentle",
      "golden", "sharp", "wild", "calm", "brave", "alive", "dead", "empty", "full",
      "eternal", "inner", "human", "modern", "ancient", "infinite", "vast", "tiny",
      "lovely", "lonely", "friendly", "ugly", "holy", "early", "late", "great",
      "fair", "kind", "cruel", "safe", "sick", "ill", "fit", "thin", "thick", "wet",
      "dry", "bold", "blind", "fierce", "rare", "raw", "ripe", "smooth", "rough",
      "fragile", "subtle", "simple", "complex", "certain", "clear", "whole", "mere",
      "own", "public", "private", "common", "urban", "rural", "broken", "hidden",
      "fallen", "frozen", "stolen", "forgotten", "lost", "best", "better", "worse",
      "worst", "first", "last", "next", "final", "main", "single", "double"};
  return kWords;
}

// Base forms that are only verbs in short expressions.
const std::unordered_set<std::string>& verb_lexicon() {
  static const std::unordered_set<std::string> kWords = {
      "guide", "give", "take", "make", "bring", "feed", "lead", "teach", "learn",
      "kill", "destroy", "save", "shine", "eat", "protect", "heal", "hurt", "bloom",
      "feel", "see", "know", "think", "speak", "grow", "become", "seem", "need",
      "want", "keep", "carry", "follow", "find", "lose", "win", "fall", "rise",
      "melt", "freeze", "consume", "create", "inspire", "empower", "nourish",
      "strengthen", "reflect", "open", "build", "break", "steal", "reveal",
      "connect", "unite", "divide", "ignite", "fuel", "warm", "burn", "heat",
      "bind", "free", "shape", "power", "mirror", "guide", "cure", "poison",
      "fade", "shatter", "brighten", "darken", "illuminate", "sustain", "support",
      "drive", "shelter", "spark", "feed", "bridge", "unlock", "open", "light"};
  return kWords;
}

// Words that are both nouns and verbs: resolved by context, noun by default.
const std::unordered_set<std::string>& noun_verb_lexicon() {
  static const std::unordered_set<std::string> kWords = {
      "hope", "guide", "fuel", "exercise", "love", "fear", "walk", "run", "dream",
      "light", "change", "work", "play", "care", "help", "rest", "smile", "cry",
      "fire", "water", "fight", "welcome", "heat", "burn", "mirror", "book",
      "power", "shape", "measure", "trust", "doubt", "face", "drive", "shelter",
      "spark", "bridge", "poison", "cure", "support", "smoke", "time", "struggle",
      "journey", "bloom", "freeze", "rise", "fall", "break", "win", "need"};
  return kWords;
}

// Nouns whose surface would otherwise trip a suffix rule.
const std::unordered_set<std::string>& noun_lexicon() {
  static const std::unordered_set<std::string> kWords = {
      "family", "belly", "jelly", "lily", "butterfly", "fly", "ally", "rally",
      "ring", "king", "string", "wing", "ceiling", "building", "painting",
      "swing", "spring", "thing", "morning", "evening", "clothing", "pudding",
      "wedding", "earring", "feeling", "meaning", "beginning", "ending",
      "being", "darling", "sibling", "seedling", "fish", "dish", "wish",
      "animal", "crystal", "metal", "signal", "festival", "capital", "hospital",
      "music", "magic", "logic", "knowledge", "life", "body", "soul", "death",
      "world", "earth", "mind", "heart", "news", "glass", "grass", "class",
      "lens", "bus", "gas", "chaos", "oasis", "atlas", "species", "series"};
  return kWords;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

// Candidate base forms for an inflected word: "guides" -> {guide, guid},
// "warming" -> {warm, warme}.
std::vector<std::string> base_forms(const std::string& w, std::string_view suffix) {
  std::vector<std::string> out;
  if (!ends_with(w, suffix)) return out;
  std::string stem = w.substr(0, w.size() - suffix.size());
  out.push_back(stem);
  out.push_back(stem + "e");
  if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2]) {
    out.push_back(stem.substr(0, stem.size() - 1));  // running -> run
  }
  if (ends_with(stem, "i")) out.push_back(stem.substr(0, stem.size() - 1) + "y");
  return out;
}

bool any_in(const std::vector<std::string>& forms,
            const std::unordered_set<std::string>& set) {
  return std::any_of(forms.begin(), forms.end(),
                     [&](const std::string& f) { return set.count(f) > 0; });
}

enum class Inflection { kBase, kThirdPerson, kPast, kGerund };

struct WordInfo {
  Function function = Function::kNone;
  bool adjective = false;
  bool verb_only = false;
  bool noun_verb = false;
  bool noun = false;
  Inflection inflection = Inflection::kBase;
  WordClass suffix_class = WordClass::kNoun;
};

WordInfo analyze(const std::string& lower) {
  WordInfo info;
  const auto& fw = function_words();
  if (auto it = fw.find(lower); it != fw.end()) {
    info.function = it->second;
    return info;
  }
  const auto& verbs = verb_lexicon();
  const auto& ambiguous = noun_verb_lexicon();
  info.noun = noun_lexicon().count(lower) > 0;
  info.adjective = adjective_lexicon().count(lower) > 0;
  info.noun_verb = ambiguous.count(lower) > 0;
  info.verb_only = !info.noun_verb && verbs.count(lower) > 0;
  if (info.noun || info.adjective || info.noun_verb || info.verb_only) return info;

  auto check_inflection = [&](std::string_view suffix, Inflection inf) {
    auto forms = base_forms(lower, suffix);
    if (forms.empty()) return false;
    bool nv = any_in(forms, ambiguous);
    bool v = any_in(forms, verbs);
    if (!nv && !v) return false;
    info.inflection = inf;
    info.noun_verb = nv;
    info.verb_only = !nv && v;
    return true;
  };
  if (check_inflection("ing", Inflection::kGerund)) return info;
  if (check_inflection("ed", Inflection::kPast)) return info;
  if (check_inflection("es", Inflection::kThirdPerson)) return info;
  if (check_inflection("s", Inflection::kThirdPerson)) return info;

  if (ends_with(lower, "ly")) {
    info.function = Function::kAdverb;
    return info;
  }
  for (std::string_view s : {"ness", "tion", "sion", "ment", "ity", "ism", "ship",
                             "hood", "ance", "ence", "dom", "ist"}) {
    if (ends_with(lower, s)) return info;  // noun
  }
  for (std::string_view s : {"ous", "ful", "less", "ive", "able", "ible", "ical"}) {
    if (ends_with(lower, s)) {
      info.adjective = true;
      return info;
    }
  }
  if (lower.size() > 5 && ends_with(lower, "ish")) {
    info.adjective = true;
    return info;
  }
  for (std::string_view s : {"ize", "ise", "ify"}) {
    if (ends_with(lower, s)) {
      info.verb_only = true;
      return info;
    }
  }
  if (ends_with(lower, "ing")) {
    info.noun_verb = true;
    info.inflection = Inflection::kGerund;
  } else if (ends_with(lower, "ed")) {
    info.noun_verb = true;
    info.inflection = Inflection::kPast;
  }
  return info;
}

// What the previous word tells us about the current slot.
enum class Slot {
  kStart,       // sentence-initial
  kNominal,     // after determiner, adjective, or preposition: expects a noun
  kPredicate,   // after a subject (noun or pronoun): expects a verb
  kVerbal,      // after to, an auxiliary, or a modal: expects a verb
  kOther,
};

Slot slot_after(Function f, WordClass c) {
  switch (f) {
    case Function::kDeterminer:
    case Function::kPreposition:
      return Slot::kNominal;
    case Function::kSubjectPronoun:
      return Slot::kPredicate;
    case Function::kTo:
    case Function::kAuxiliary:
      return Slot::kVerbal;
    case Function::kConjunction:
      return Slot::kStart;
    case Function::kObjectPronoun:
    case Function::kAdverb:
      return Slot::kOther;
    case Function::kNone:
      break;
  }
  switch (c) {
    case WordClass::kAdjective:
      return Slot::kNominal;
    case WordClass::kNoun:
      return Slot::kPredicate;
    case WordClass::kVerb:
    case WordClass::kOther:
      return Slot::kOther;
  }
  return Slot::kOther;
}

WordClass resolve(const WordInfo& info, Slot slot) {
  if (info.function != Function::kNone) return WordClass::kOther;
  if (info.noun) return WordClass::kNoun;
  if (info.adjective) {
    bool verb_capable = info.noun_verb || info.verb_only;
    if (verb_capable && slot == Slot::kVerbal) return WordClass::kVerb;
    return WordClass::kAdjective;
  }
  if (!info.noun_verb && !info.verb_only) return info.suffix_class;

  switch (info.inflection) {
    case Inflection::kGerund:
      // "is running" is progressive; everywhere else a gerund names a thing.
      return slot == Slot::kVerbal ? WordClass::kVerb : WordClass::kNoun;
    case Inflection::kPast:
      if (slot == Slot::kNominal || slot == Slot::kStart) return WordClass::kAdjective;
      return WordClass::kVerb;
    case Inflection::kThirdPerson:
      if (slot == Slot::kPredicate) return WordClass::kVerb;
      return info.verb_only && slot != Slot::kNominal ? WordClass::kVerb
                                                      : WordClass::kNoun;
    case Inflection::kBase:
      break;
  }
  if (slot == Slot::kVerbal) return WordClass::kVerb;
  if (info.verb_only) {
    return slot == Slot::kNominal ? WordClass::kNoun : WordClass::kVerb;
  }
  return WordClass::kNoun;
}

}  // namespace

std::vector<RawWord> split_words(std::string_view text) {
  std::vector<RawWord> words;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    size_t start = i;
    while (i < text.size()) {
      auto c = static_cast<unsigned char>(text[i]);
      if (is_word_byte(c)) {
        ++i;
      } else if (c == '-' && i + 1 < text.size() &&
                 is_word_byte(static_cast<unsigned char>(text[i + 1])) && i > start) {
        ++i;  // inner hyphen keeps compounds whole
      } else {
        break;
      }
    }
    size_t end = i;
    // Leading/trailing apostrophes are quotes, not part of the word.
    while (end > start && text[end - 1] == '\'') --end;
    while (start < end && text[start] == '\'') ++start;
    if (end > start) {
      words.push_back({std::string(text.substr(start, end - start)), {start, end}});
    }
  }
  return words;
}

std::vector<WordClass> LexiconTagger::tag(const std::vector<RawWord>& words) const {
  std::vector<WordClass> out;
  out.reserve(words.size());
  Slot slot = Slot::kStart;
  for (const auto& w : words) {
    std::string lower = to_lower(w.text);
    WordInfo info = analyze(lower);
    // "like" after a pronoun subject is the verb ("we like books").
    if (lower == "like" && slot == Slot::kPredicate &&
        !out.empty() && out.back() == WordClass::kOther) {
      info = WordInfo{};
      info.verb_only = true;
    }
    WordClass c = resolve(info, slot);
    out.push_back(c);
    slot = slot_after(info.function, c);
  }
  return out;
}

const PosTagger& default_tagger() {
  static const LexiconTagger kTagger;
  return kTagger;
}

Expression parse_expression(std::string_view text, const PosTagger* tagger) {
  if (trim(text).empty()) {
    throw Error(ErrorCode::kEmptyExpression, "expression is empty");
  }
  if (tagger == nullptr) {
    throw Error(ErrorCode::kTaggerUnavailable, "no part-of-speech tagger configured");
  }
  Expression expr;
  expr.raw = std::string(text);
  auto words = split_words(expr.raw);
  auto classes = tagger->tag(words);
  if (classes.size() != words.size()) {
    throw Error(ErrorCode::kTaggerUnavailable, "tagger returned a misaligned tag list");
  }
  std::set<std::pair<std::string, size_t>> seen;
  for (size_t i = 0; i < words.size(); ++i) {
    PartOfSpeech pos;
    switch (classes[i]) {
      case WordClass::kNoun:
        pos = PartOfSpeech::kNoun;
        break;
      case WordClass::kVerb:
        pos = PartOfSpeech::kVerb;
        break;
      case WordClass::kAdjective:
        pos = PartOfSpeech::kAdjective;
        break;
      default:
        continue;
    }
    if (!seen.insert({words[i].text, words[i].span.start}).second) continue;
    expr.tokens.push_back({words[i].text, pos, words[i].span, false});
  }
  return expr;
}

Expression parse_expression(std::string_view text) {
  return parse_expression(text, &default_tagger());
}

Expression select_concepts(const Expression& expr, const std::vector<std::size_t>& picks) {
  for (auto p : picks) {
    if (p >= expr.tokens.size()) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "token index " + std::to_string(p) + " out of range (have " +
                      std::to_string(expr.tokens.size()) + ")",
                  {{"index", p}, {"size", expr.tokens.size()}});
    }
  }
  Expression out = expr;
  for (auto& t : out.tokens) t.selected = false;
  for (auto p : picks) out.tokens[p].selected = true;
  return out;
}

void to_json(nlohmann::json& j, const Expression& e) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : e.tokens) {
    tokens.push_back({{"surface", t.surface},
                      {"pos", pos_name(t.pos)},
                      {"span", {t.span.start, t.span.end}},
                      {"selected", t.selected}});
  }
  j = {{"raw", e.raw}, {"tokens", std::move(tokens)}};
  j["theme"] = e.theme ? nlohmann::json(*e.theme) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Expression& e) {
  e.raw = j.at("raw").get<std::string>();
  e.tokens.clear();
  for (const auto& t : j.at("tokens")) {
    ConceptToken tok;
    tok.surface = t.at("surface").get<std::string>();
    tok.pos = pos_from_name(t.at("pos").get<std::string>());
    tok.span = {t.at("span").at(0).get<size_t>(), t.at("span").at(1).get<size_t>()};
    tok.selected = t.at("selected").get<bool>();
    e.tokens.push_back(std::move(tok));
  }
  if (j.contains("theme") && !j.at("theme").is_null()) {
    e.theme = j.at("theme").get<std::string>();
  } else {
    e.theme.reset();
  }
}

}  // namespace metablend
