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

#include <algorithm>
#include <set>

#include "metablend/blend.hpp"
#include "test_support.hpp"

using namespace metablend;
using namespace metablend::testing;
using json = nlohmann::json;

namespace {

const BlendPair kOrangeDumbbell{"orange", "round shape", "dumbbell plate", "circular"};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

// Symmetric diagram over `objects` with similarities from `sim`.
AnalysisDiagram diagram(const std::vector<std::string>& objects,
                        const std::function<double(const std::string&, const std::string&)>& sim,
                        const std::function<double(const std::string&, const std::string&)>& sent) {
  AnalysisDiagram d;
  d.left = objects;
  d.right = objects;
  for (const auto& a : objects) {
    for (const auto& b : objects) {
      PairScore p{a, b, sim(a, b), sim(a, b), sent(a, b), sent(a, b)};
      d.links.push_back(p);
    }
  }
  return d;
}

}  // namespace

TEST(Schemes, OrangeDumbbellSingle) {
  TempDir tmp;
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest&) {
    return std::string(R"({"result": [["Merge the shapes of an orange and a dumbbell plate together.",
        "<Because both the shape of an orange and a dumbbell plate are circular.>"]]})");
  });
  auto oracle = make_oracle(chat, tmp.path());
  auto out = generate_schemes(*oracle, kOrangeDumbbell, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].scheme, "Merge the shapes of an orange and a dumbbell plate together.");
  EXPECT_EQ(out[0].reason, "Because both the shape of an orange and a dumbbell plate are circular.");
  const auto& prompt = chat->requests[0].messages[0].content;
  EXPECT_NE(prompt.find("produce (1) distinct combinations"), std::string::npos);
  EXPECT_NE(prompt.find("The first object is orange"), std::string::npos);
}

TEST(Schemes, ThreeDistinctWithRetry) {
  TempDir tmp;
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest& r) {
    if (r.addendum.empty()) return std::string(R"({"result": [["A","r"],["A","r"],["B","r"]]})");
    return std::string(R"({"result": [["A","r"],["B","r"],["C","r"]]})");
  });
  auto out = generate_schemes(*make_oracle(chat, tmp.path()), kOrangeDumbbell, 3);
  std::set<std::string> s;
  for (const auto& x : out) s.insert(x.scheme);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(chat->requests.back().addendum, "Every combination must be different.");
}

TEST(Schemes, MalformedAndBadN) {
  TempDir tmp;
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest&) { return "no"; });
  auto oracle = make_oracle(chat, tmp.path());
  EXPECT_EQ(code_of([&] { generate_schemes(*oracle, kOrangeDumbbell, 2); }),
            ErrorCode::kInvalidOracleResponse);
  EXPECT_EQ(code_of([&] { generate_schemes(*oracle, kOrangeDumbbell, 0); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { generate_schemes(*oracle, kOrangeDumbbell, 6); }),
            ErrorCode::kInvalidArgument);
}

TEST(Pair, Checks) {
  EXPECT_NO_THROW(check_pair(kOrangeDumbbell));
  EXPECT_THROW(check_pair({"orange", "round", "orange", "juicy"}), Error);
  EXPECT_THROW(check_pair({"orange", "", "egg", "oval"}), Error);
  std::vector<ObjectCandidate> cands(2);
  cands[0].name = "orange";
  cands[0].attributes = {"round", "orange color", "juicy", "dimpled peel", "segmented"};
  cands[1].name = "egg";
  cands[1].attributes = {"oval", "smooth shell", "white", "yolk", "fragile"};
  EXPECT_NO_THROW(check_pair({"orange", "round", "egg", "oval"}, &cands));
  EXPECT_THROW(check_pair({"orange", "oval", "egg", "round"}, &cands), Error);
  EXPECT_EQ(code_of([&] { check_pair({"orange", "round", "kiwi", "hairy"}, &cands); }),
            ErrorCode::kUnknownObject);
}

TEST(Compose, ImagePromptContract) {
  Theme theme{"Global warming is heating the planet."};
  auto p = compose_image_prompt({"earth", "round", "fireplace", "flames"},
                                {"Wrap the earth in flames.", "r"}, theme);
  EXPECT_NE(p.text.find("blended into a single object that has elements from both"),
            std::string::npos);
  EXPECT_NE(p.text.find("The blended image symbolizes a Global warming is heating the planet.The image"),
            std::string::npos);
  EXPECT_TRUE(p.text.ends_with(
      "The image should have a plain, solid-color background and no text or words."));
  EXPECT_EQ(p.id, prompt_id(p.text));
  EXPECT_EQ(p.id.size(), 14u);
  EXPECT_EQ(code_of([&] { compose_image_prompt(p.pair, {"", ""}, theme); }),
            ErrorCode::kMissingBinding);
  EXPECT_EQ(code_of([&] { compose_image_prompt(p.pair, p.scheme, Theme{""}); }),
            ErrorCode::kMissingBinding);
}

TEST(Compose, MultiPromptGolden) {
  BlendPlan plan;
  plan.primary = {"book", "paper pages", "hand mirror", "reflective glass"};
  plan.concept_a = "books";
  plan.concept_b = "mirror";
  plan.secondary = {{"soul", "phoenix", "fiery wings"}};
  auto p = compose_multi_prompt(
      plan,
      {"Replace the paper pages of an open book with sheets of reflective glass like a hand mirror.",
       "r"},
      Theme{"Reading reveals and reflects the inner self of a person."});
  EXPECT_EQ(p.text, golden("multi.txt"));
  EXPECT_EQ(p.secondary, plan.secondary);
}

TEST(Compose, MultiWithoutSecondaryReduces) {
  BlendPlan plan;
  plan.primary = {"earth", "round", "fireplace", "flames"};
  BlendScheme s{"Wrap the earth in flames.", "r"};
  Theme t{"Heat."};
  EXPECT_EQ(compose_multi_prompt(plan, s, t).text, compose_image_prompt(plan.primary, s, t).text);
  plan.secondary = {{"a", "apple", "red"}, {"b", "owl", "eyes"}};
  auto text = compose_multi_prompt(plan, s, t).text;
  EXPECT_NE(text.find("Include an apple as a secondary element representing a."), std::string::npos);
  EXPECT_NE(text.find("Include an owl as a secondary element representing b."), std::string::npos);
  EXPECT_TRUE(text.ends_with("no text or words."));
}

TEST(Plan, MaxSimilarityPrimaryAndPermutationInvariance) {
  auto d = diagram(
      {"book", "hand mirror", "phoenix"},
      [](const std::string& a, const std::string& b) {
        std::set<std::string> s{a, b};
        if (s == std::set<std::string>{"book", "hand mirror"}) return 0.9;
        if (s == std::set<std::string>{"hand mirror", "phoenix"}) return 0.6;
        return 0.2;
      },
      [](const std::string&, const std::string&) { return 0.5; });
  std::vector<ConceptChoice> choices = {{"books", "book", "paper pages"},
                                        {"mirror", "hand mirror", "reflective glass"},
                                        {"soul", "phoenix", "fiery wings"}};
  std::sort(choices.begin(), choices.end(),
            [](auto& a, auto& b) { return a.concept_name < b.concept_name; });
  std::optional<BlendPlan> first;
  do {
    auto plan = plan_multi_concept(choices, d);
    if (!first) first = plan;
    EXPECT_EQ(plan, *first);
  } while (std::next_permutation(choices.begin(), choices.end(), [](auto& a, auto& b) {
    return a.concept_name < b.concept_name;
  }));
  EXPECT_EQ(first->primary.object_a, "book");
  EXPECT_EQ(first->primary.object_b, "hand mirror");
  EXPECT_EQ(first->concept_a, "books");
  ASSERT_EQ(first->secondary.size(), 1u);
  EXPECT_EQ(first->secondary[0], (SecondaryElement{"soul", "phoenix", "fiery wings"}));
}

TEST(Plan, TiesBrokenBySentimentThenName) {
  auto flat = [](const std::string&, const std::string&) { return 0.5; };
  auto d1 = diagram({"a", "b", "c"}, flat, [](const std::string& x, const std::string& y) {
    return std::set<std::string>{x, y} == std::set<std::string>{"b", "c"} ? 0.9 : 0.1;
  });
  std::vector<ConceptChoice> ch = {{"x", "a", "1"}, {"y", "b", "2"}, {"z", "c", "3"}};
  auto p1 = plan_multi_concept(ch, d1);
  EXPECT_EQ(p1.primary.object_a, "b");
  EXPECT_EQ(p1.primary.object_b, "c");

  auto d2 = diagram({"a", "b", "c"}, flat, flat);
  auto p2 = plan_multi_concept(ch, d2);
  EXPECT_EQ(p2.primary.object_a, "a");
  EXPECT_EQ(p2.primary.object_b, "b");
  EXPECT_EQ(plan_multi_concept(ch, d2), p2);
}

TEST(Plan, Errors) {
  auto d = diagram({"a", "b"}, [](auto&, auto&) { return 0.5; }, [](auto&, auto&) { return 0.5; });
  EXPECT_EQ(code_of([&] { plan_multi_concept({{"x", "a", "1"}, {"y", "b", "2"}}, d); }),
            ErrorCode::kInsufficientConcepts);
  EXPECT_EQ(code_of([&] {
              plan_multi_concept({{"x", "a", "1"}, {"x", "b", "2"}, {"z", "c", "3"}}, d);
            }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] {
              plan_multi_concept({{"x", "a", "1"}, {"y", "b", "2"}, {"z", "c", "3"}}, d);
            }),
            ErrorCode::kPreconditionFailed);
}

TEST(Json, RoundTrips) {
  ImagePrompt p = compose_image_prompt(kOrangeDumbbell, {"s", "r"}, Theme{"t"});
  json j = p;
  EXPECT_EQ(j.get<ImagePrompt>(), p);
  BlendPlan plan{kOrangeDumbbell, "a", "b", {{"c", "o", "x"}}};
  EXPECT_EQ(json(plan).get<BlendPlan>(), plan);
  EXPECT_EQ(json(ConceptChoice{"c", "o", "x"})["concept"], "c");
}
