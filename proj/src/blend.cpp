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

#include "metablend/blend.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "metablend/error.hpp"
#include "metablend/util.hpp"

namespace metablend {

void to_json(nlohmann::json& j, const BlendPair& p) {
  j = {{"object_a", p.object_a},
       {"attribute_a", p.attribute_a},
       {"object_b", p.object_b},
       {"attribute_b", p.attribute_b}};
}

void from_json(const nlohmann::json& j, BlendPair& p) {
  p.object_a = j.at("object_a").get<std::string>();
  p.attribute_a = j.at("attribute_a").get<std::string>();
  p.object_b = j.at("object_b").get<std::string>();
  p.attribute_b = j.at("attribute_b").get<std::string>();
}

void to_json(nlohmann::json& j, const BlendScheme& s) {
  j = {{"scheme", s.scheme}, {"reason", s.reason}};
}

void from_json(const nlohmann::json& j, BlendScheme& s) {
  s.scheme = j.at("scheme").get<std::string>();
  s.reason = j.at("reason").get<std::string>();
}

void to_json(nlohmann::json& j, const SecondaryElement& e) {
  j = {{"concept", e.concept_name}, {"object", e.object}, {"attribute", e.attribute}};
}

void from_json(const nlohmann::json& j, SecondaryElement& e) {
  e.concept_name = j.at("concept").get<std::string>();
  e.object = j.at("object").get<std::string>();
  e.attribute = j.value("attribute", std::string());
}

void to_json(nlohmann::json& j, const ImagePrompt& p) {
  j = {{"id", p.id},          {"text", p.text},         {"pair", p.pair},
       {"scheme", p.scheme},  {"theme", p.theme.sentence}, {"secondary", p.secondary}};
}

void from_json(const nlohmann::json& j, ImagePrompt& p) {
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.pair = j.at("pair").get<BlendPair>();
  p.scheme = j.at("scheme").get<BlendScheme>();
  p.theme.sentence = j.at("theme").get<std::string>();
  p.secondary = j.value("secondary", std::vector<SecondaryElement>{});
}

void to_json(nlohmann::json& j, const ConceptChoice& c) {
  j = {{"concept", c.concept_name}, {"object", c.object}, {"attribute", c.attribute}};
}

void from_json(const nlohmann::json& j, ConceptChoice& c) {
  c.concept_name = j.at("concept").get<std::string>();
  c.object = j.at("object").get<std::string>();
  c.attribute = j.value("attribute", std::string());
}

void to_json(nlohmann::json& j, const BlendPlan& p) {
  j = {{"primary", p.primary},
       {"concept_a", p.concept_a},
       {"concept_b", p.concept_b},
       {"secondary", p.secondary}};
}

void from_json(const nlohmann::json& j, BlendPlan& p) {
  p.primary = j.at("primary").get<BlendPair>();
  p.concept_a = j.at("concept_a").get<std::string>();
  p.concept_b = j.at("concept_b").get<std::string>();
  p.secondary = j.at("secondary").get<std::vector<SecondaryElement>>();
}

namespace {

bool has_attribute(const ObjectCandidate& c, const std::string& attribute) {
  std::string n = normal_form(attribute);
  return std::any_of(c.attributes.begin(), c.attributes.end(),
                     [&](const std::string& a) { return normal_form(a) == n; });
}

std::string strip_markers(const std::string& s) {
  std::string t = trim(s);
  if (t.size() >= 2 && t.front() == '<' && t.back() == '>') t = trim(t.substr(1, t.size() - 2));
  return t;
}

Bindings image_bindings(const BlendPair& pair, const BlendScheme& scheme, const Theme& theme) {
  std::string t = trim(theme.sentence);
  if (!t.empty() && t.back() == '.') t.pop_back();
  return {{"Object A", pair.object_a},   {"Object B", pair.object_b},
          {"Attribute 1", pair.attribute_a}, {"Attribute 2", pair.attribute_b},
          {"selectedScheme", scheme.scheme}, {"METAPHORICAL THEME", t}};
}

void check_compose_inputs(const BlendPair& pair, const BlendScheme& scheme, const Theme& theme) {
  check_pair(pair);
  if (trim(scheme.scheme).empty()) {
    throw Error(ErrorCode::kMissingBinding, "scheme text is empty", {{"name", "selectedScheme"}});
  }
  if (trim(theme.sentence).empty()) {
    throw Error(ErrorCode::kMissingBinding, "theme is empty", {{"name", "METAPHORICAL THEME"}});
  }
}

}  // namespace

void check_pair(const BlendPair& pair, const std::vector<ObjectCandidate>* candidates) {
  if (trim(pair.object_a).empty() || trim(pair.object_b).empty() ||
      trim(pair.attribute_a).empty() || trim(pair.attribute_b).empty()) {
    throw Error(ErrorCode::kInvalidArgument, "blend pair needs two objects and two attributes");
  }
  if (normal_form(pair.object_a) == normal_form(pair.object_b)) {
    throw Error(ErrorCode::kInvalidArgument, "blend pair objects must differ");
  }
  if (!candidates) return;
  auto check = [&](const std::string& object, const std::string& attribute) {
    for (const auto& c : *candidates) {
      if (normal_form(c.name) != normal_form(object)) continue;
      if (has_attribute(c, attribute)) return;
      throw Error(ErrorCode::kInvalidArgument,
                  "'" + attribute + "' is not an attribute of '" + object + "'");
    }
    throw Error(ErrorCode::kUnknownObject, "unknown object '" + object + "'");
  };
  check(pair.object_a, pair.attribute_a);
  check(pair.object_b, pair.attribute_b);
}

std::string prompt_id(const std::string& text) { return "p-" + sha256_hex(text).substr(0, 12); }

std::vector<BlendScheme> generate_schemes(Oracle& oracle, const BlendPair& pair, int n,
                                          const CompleteOptions& options) {
  check_pair(pair);
  if (n < 1 || n > kMaxSchemeCount) {
    throw Error(ErrorCode::kInvalidArgument,
                "scheme count must be in [1, " + std::to_string(kMaxSchemeCount) + "]");
  }
  Bindings bindings = {{"Object A", pair.object_a},   {"Object B", pair.object_b},
                       {"Attribute 1", pair.attribute_a}, {"Attribute 2", pair.attribute_b},
                       {"NUM", std::to_string(n)}};
  CompleteOptions opts = options;
  opts.expected_count = static_cast<size_t>(n);

  std::string last_text;
  for (int round = 0; round < 2; ++round) {
    opts.addendum = round == 0 ? options.addendum : "Every combination must be different.";
    auto resp = oracle.complete(TemplateId::kSchemes, bindings, opts);
    last_text = resp.text;
    std::vector<BlendScheme> out;
    std::set<std::string> seen;
    for (const auto& row : resp.parsed["result"]) {
      BlendScheme s{strip_markers(row[0].get<std::string>()),
                    strip_markers(row[1].get<std::string>())};
      if (s.scheme.empty() || s.reason.empty() || !seen.insert(normal_form(s.scheme)).second) {
        break;
      }
      out.push_back(std::move(s));
    }
    if (out.size() == static_cast<size_t>(n)) return out;
  }
  throw Error(ErrorCode::kInvalidOracleResponse, "schemes are empty or not distinct",
              {{"last_text", last_text}});
}

ImagePrompt compose_image_prompt(const BlendPair& pair, const BlendScheme& scheme,
                                 const Theme& theme) {
  check_compose_inputs(pair, scheme, theme);
  ImagePrompt p;
  p.text = render_template(TemplateId::kImage, image_bindings(pair, scheme, theme));
  p.id = prompt_id(p.text);
  p.pair = pair;
  p.scheme = scheme;
  p.theme = theme;
  return p;
}

ImagePrompt compose_multi_prompt(const BlendPlan& plan, const BlendScheme& scheme,
                                 const Theme& theme) {
  check_compose_inputs(plan.primary, scheme, theme);
  auto segments = PromptTemplate::get(TemplateId::kImage)
                      .render_segments(image_bindings(plan.primary, scheme, theme));
  std::string considerations = segments.back();
  segments.pop_back();
  for (const auto& e : plan.secondary) {
    if (trim(e.object).empty() || trim(e.concept_name).empty()) {
      throw Error(ErrorCode::kInvalidArgument, "secondary element needs an object and a concept");
    }
    segments.push_back("Include " + std::string(indefinite_article(e.object)) + " " + e.object +
                       " as a secondary element representing " + e.concept_name + ".");
  }
  segments.push_back(std::move(considerations));

  ImagePrompt p;
  p.text = join(segments, " ");
  p.id = prompt_id(p.text);
  p.pair = plan.primary;
  p.scheme = scheme;
  p.theme = theme;
  p.secondary = plan.secondary;
  return p;
}

BlendPlan plan_multi_concept(const std::vector<ConceptChoice>& choices,
                             const AnalysisDiagram& diagram) {
  std::vector<ConceptChoice> sorted = choices;
  for (const auto& c : sorted) {
    if (trim(c.concept_name).empty() || trim(c.object).empty()) {
      throw Error(ErrorCode::kInvalidArgument, "every choice needs a concept and an object");
    }
  }
  std::sort(sorted.begin(), sorted.end(), [](const ConceptChoice& x, const ConceptChoice& y) {
    return std::tuple(normal_form(x.concept_name), normal_form(x.object)) <
           std::tuple(normal_form(y.concept_name), normal_form(y.object));
  });
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (normal_form(sorted[i].concept_name) == normal_form(sorted[i - 1].concept_name)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "concept '" + sorted[i].concept_name + "' has more than one choice");
    }
  }
  if (sorted.size() < 3) {
    throw Error(ErrorCode::kInsufficientConcepts,
                "multi-concept planning needs at least 3 concepts, got " +
                    std::to_string(sorted.size()));
  }

  auto link = [&](const ConceptChoice& x, const ConceptChoice& y) -> const PairScore& {
    const PairScore* s = diagram.find(x.object, y.object);
    if (!s) {
      throw Error(ErrorCode::kPreconditionFailed,
                  "diagram has no link between '" + x.object + "' and '" + y.object + "'");
    }
    return *s;
  };

  // Larger key wins: similarity, then sentiment, then lexicographically
  // smaller names.
  struct Best {
    size_t i = 0, j = 0;
    double sim = 0, sent = 0;
    std::string first, second;
  };
  std::optional<Best> best;
  for (size_t i = 0; i < sorted.size(); ++i) {
    for (size_t j = i + 1; j < sorted.size(); ++j) {
      const auto& s = link(sorted[i], sorted[j]);
      std::string x = normal_form(sorted[i].object), y = normal_form(sorted[j].object);
      if (y < x) std::swap(x, y);
      Best cand{i, j, s.norm_sim, s.norm_sent, x, y};
      if (!best) {
        best = cand;
        continue;
      }
      auto better = [](const Best& p, const Best& q) {
        if (p.sim != q.sim) return p.sim > q.sim;
        if (p.sent != q.sent) return p.sent > q.sent;
        return std::tie(p.first, p.second) < std::tie(q.first, q.second);
      };
      if (better(cand, *best)) best = cand;
    }
  }

  const ConceptChoice* a = &sorted[best->i];
  const ConceptChoice* b = &sorted[best->j];
  if (normal_form(b->object) < normal_form(a->object)) std::swap(a, b);

  BlendPlan plan;
  plan.primary = {a->object, a->attribute, b->object, b->attribute};
  plan.concept_a = a->concept_name;
  plan.concept_b = b->concept_name;

  struct Rest {
    double sim, sent;
    const ConceptChoice* choice;
  };
  std::vector<Rest> rest;
  for (size_t k = 0; k < sorted.size(); ++k) {
    if (k == best->i || k == best->j) continue;
    const auto& sa = link(sorted[k], *a);
    const auto& sb = link(sorted[k], *b);
    const auto& closer = (sb.norm_sim > sa.norm_sim ||
                          (sb.norm_sim == sa.norm_sim && sb.norm_sent > sa.norm_sent))
                             ? sb
                             : sa;
    rest.push_back({closer.norm_sim, closer.norm_sent, &sorted[k]});
  }
  std::stable_sort(rest.begin(), rest.end(), [](const Rest& p, const Rest& q) {
    if (p.sim != q.sim) return p.sim > q.sim;
    if (p.sent != q.sent) return p.sent > q.sent;
    return normal_form(p.choice->object) < normal_form(q.choice->object);
  });
  for (const auto& r : rest) {
    plan.secondary.push_back({r.choice->concept_name, r.choice->object, r.choice->attribute});
  }
  return plan;
}

}  // namespace metablend
