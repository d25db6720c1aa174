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

#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "metablend/error.hpp"
#include "metablend/expression.hpp"

using namespace metablend;

namespace {

std::set<std::string> surfaces(const Expression& e, PartOfSpeech pos) {
  std::set<std::string> out;
  for (const auto& t : e.tokens) {
    if (t.pos == pos) out.insert(t.surface);
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

}  // namespace

TEST(Expression, GlobalWarming) {
  auto e = parse_expression("global warming");
  ASSERT_EQ(e.tokens.size(), 2u);
  EXPECT_EQ(e.tokens[0].surface, "global");
  EXPECT_EQ(e.tokens[0].pos, PartOfSpeech::kAdjective);
  EXPECT_EQ(e.tokens[1].surface, "warming");
  EXPECT_EQ(e.tokens[1].pos, PartOfSpeech::kNoun);
  EXPECT_EQ(e.tokens[1].span, (Span{7, 14}));
}

TEST(Expression, KnowledgeGuidesHope) {
  auto e = parse_expression("Knowledge guides the hope of our life");
  EXPECT_EQ(surfaces(e, PartOfSpeech::kNoun), (std::set<std::string>{"Knowledge", "hope", "life"}));
  EXPECT_EQ(surfaces(e, PartOfSpeech::kVerb), (std::set<std::string>{"guides"}));
  for (const auto& t : e.tokens) {
    EXPECT_NE(t.surface, "the");
    EXPECT_NE(t.surface, "of");
    EXPECT_NE(t.surface, "our");
  }
}

TEST(Expression, SpansPointIntoRawText) {
  std::string text = "Books are the mirror to the soul";
  auto e = parse_expression(text);
  for (const auto& t : e.tokens) {
    EXPECT_EQ(text.substr(t.span.start, t.span.end - t.span.start), t.surface);
  }
  EXPECT_EQ(e.raw, text);
}

TEST(Expression, EmptyAndBlank) {
  EXPECT_EQ(code_of([] { parse_expression(""); }), ErrorCode::kEmptyExpression);
  EXPECT_EQ(code_of([] { parse_expression("   \t "); }), ErrorCode::kEmptyExpression);
}

TEST(Expression, Selection) {
  auto e = parse_expression("global warming");
  auto both = select_concepts(e, {0, 1});
  EXPECT_TRUE(both.tokens[0].selected);
  EXPECT_TRUE(both.tokens[1].selected);
  EXPECT_EQ(both.selected_surfaces(), (std::vector<std::string>{"global", "warming"}));

  auto none = select_concepts(e, {});
  EXPECT_TRUE(none.selected_surfaces().empty());

  EXPECT_EQ(code_of([&] { select_concepts(e, {7}); }), ErrorCode::kIndexOutOfRange);
}

TEST(Expression, JsonRoundTrip) {
  auto e = select_concepts(parse_expression("Exercise fuels your body like vitamins"), {0});
  e.theme = "Exercise keeps the body healthy.";
  nlohmann::json j = e;
  EXPECT_EQ(j.get<Expression>(), e);
}

TEST(Expression, PosNames) {
  for (auto p : {PartOfSpeech::kNoun, PartOfSpeech::kVerb, PartOfSpeech::kAdjective}) {
    EXPECT_EQ(pos_from_name(pos_name(p)), p);
  }
}
