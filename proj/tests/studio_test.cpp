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

#include <thread>

#include "metablend/studio.hpp"
#include "test_support.hpp"

using namespace metablend;
using namespace metablend::testing;
using json = nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

AnalysisDiagram one_link(DiagramKind kind, const std::string& a, const std::string& b,
                         double norm_sim) {
  AnalysisDiagram d;
  d.kind = kind;
  d.left = {a};
  d.right = {b};
  d.links = {{a, b, 0.1, norm_sim, 0.5, 0.5}};
  d.palette = palette_for(kind);
  return d;
}

// Session with one prompt whose pair sits at objects 0.7, attributes 0.3.
Session placed_session(LogicalClock& clock) {
  Session s = create_session("global warming", clock);
  s.objects_diagram = one_link(DiagramKind::kObjects, "earth", "fireplace", 0.7);
  s.attributes_diagram = one_link(DiagramKind::kAttributes, "round", "flames", 0.3);
  s.attribute_objects = std::make_pair(std::string("earth"), std::string("fireplace"));
  s.theme = Theme{"Heat."};
  add_prompt(s, compose_image_prompt({"earth", "round", "fireplace", "flames"}, {"Burn.", "r"}, *s.theme),
             clock);
  return s;
}

ImageArtifact artifact(const std::string& id) { return {id, "p", "images/" + id + ".png", "t"}; }

}  // namespace

TEST(Session, CreateIdsAndEvent) {
  LogicalClock clock;
  Session a = create_session("global warming", clock, 1);
  Session b = create_session("global warming", clock, 2);
  EXPECT_EQ(a.id.rfind("s-", 0), 0u);
  EXPECT_EQ(a.id.size(), 14u);
  EXPECT_NE(a.id, b.id);
  ASSERT_EQ(a.events.size(), 1u);
  EXPECT_EQ(a.events[0].kind, "created");
  EXPECT_EQ(code_of([&] { create_session("", clock); }), ErrorCode::kEmptyExpression);
}

TEST(Session, RoundTrip) {
  LogicalClock clock;
  Session s = placed_session(clock);
  place_result(s, s.prompts[0].id, artifact("x1"), clock);
  TempDir tmp;
  save_session(s, tmp.path() / "s.json");
  Session back = load_session(tmp.path() / "s.json");
  EXPECT_EQ(back, s);
  EXPECT_EQ(session_document(back), session_document(s));
  EXPECT_EQ(session_document(s).back(), '\n');
}

TEST(Session, CorruptAndFutureFiles) {
  LogicalClock clock;
  TempDir tmp;
  std::string doc = session_document(placed_session(clock));
  write_file_atomic(tmp.path() / "cut.json", doc.substr(0, doc.size() / 2));
  EXPECT_EQ(code_of([&] { load_session(tmp.path() / "cut.json"); }), ErrorCode::kCorruptSessionFile);
  EXPECT_EQ(code_of([&] { load_session(tmp.path() / "missing.json"); }),
            ErrorCode::kCorruptSessionFile);
  auto j = json::parse(doc);
  j["schema_version"] = kSessionSchemaVersion + 1;
  EXPECT_EQ(code_of([&] { session_from_document(j.dump()); }), ErrorCode::kUnsupportedSchemaVersion);
}

TEST(Session, VersionZeroMigrates) {
  LogicalClock clock;
  auto j = json::parse(session_document(placed_session(clock)));
  j.erase("schema_version");
  j.erase("events");
  j.erase("artifacts");
  j.erase("schemes");
  Session s = session_from_document(j.dump());
  EXPECT_EQ(s.schema_version, kSessionSchemaVersion);
  EXPECT_TRUE(s.events.empty());
  EXPECT_TRUE(list_history(s).empty());
}

TEST(Canvas, GroupingAndCoords) {
  LogicalClock clock;
  Session s = placed_session(clock);
  const std::string pid = s.prompts[0].id;
  auto first = place_result(s, pid, artifact("a1"), clock);
  EXPECT_EQ(first.count, 1);
  EXPECT_DOUBLE_EQ(first.x, 0.7);
  EXPECT_DOUBLE_EQ(first.y, 0.3);
  place_result(s, pid, artifact("a2"), clock);
  auto third = place_result(s, pid, artifact("a3"), clock);
  EXPECT_EQ(third.count, 3);
  EXPECT_DOUBLE_EQ(third.x, 0.7);
  EXPECT_DOUBLE_EQ(third.y, 0.3);
  ASSERT_EQ(s.canvas.size(), 1u);
  EXPECT_EQ(s.canvas[0].image_refs, (std::vector<std::string>{"a1", "a2", "a3"}));
  int generations = 0;
  for (const auto& e : list_history(s)) generations += e.kind == "generation";
  EXPECT_EQ(generations, 3);

  // Frozen coords stay put when the diagrams move; current coords follow.
  s.objects_diagram->links[0].norm_sim = 0.2;
  EXPECT_DOUBLE_EQ(s.canvas[0].x, 0.7);
  EXPECT_DOUBLE_EQ(current_coords(s, s.canvas[0])->first, 0.2);
}

TEST(Canvas, Errors) {
  LogicalClock clock;
  Session s = placed_session(clock);
  EXPECT_EQ(code_of([&] { place_result(s, "p-nope", artifact("z"), clock); }),
            ErrorCode::kUnknownPrompt);
  s.attribute_objects = std::make_pair(std::string("globe"), std::string("sun"));
  EXPECT_EQ(code_of([&] { place_result(s, s.prompts[0].id, artifact("z"), clock); }),
            ErrorCode::kPreconditionFailed);
}

TEST(Prompts, AddIsIdempotent) {
  LogicalClock clock;
  Session s = placed_session(clock);
  add_prompt(s, s.prompts[0], clock);
  EXPECT_EQ(s.prompts.size(), 1u);
}

class ReplaceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    engine = Engine::build(offline_config(tmp.path()));
    svc = std::make_unique<Service>(engine, std::make_shared<SessionStore>());
    id = svc->create_session({{"expression", "global warming"}})["id"];
    svc->select_concepts(id, {{"indices", {0, 1}}});
    svc->infer_theme(id);
    svc->suggest_objects(id, "global", {{"iteration", 1}});
    svc->suggest_objects(id, "warming", {{"iteration", 1}});
    svc->objects_analysis(id);
    svc->attributes_analysis(id, "earth,fireplace");
    BlendPair pair{"earth", "round", "fireplace", "flames"};
    svc->schemes(id, {{"pair", pair}, {"n", 3}});
    for (int i = 0; i < 3; ++i) {
      auto p = svc->prompts(id, {{"pair", pair}, {"scheme_index", i}});
      svc->images(id, {{"prompt_id", p["id"]}});
    }
  }
  TempDir tmp;
  std::shared_ptr<Engine> engine;
  std::unique_ptr<Service> svc;
  std::string id;
};

TEST_F(ReplaceTest, FireplaceToIceCream) {
  ASSERT_EQ(svc->snapshot(id).canvas.size(), 3u);
  svc->replace(id, {{"concept", "warming"}, {"old", "fireplace"}, {"new", "ice cream"}});
  Session s = svc->snapshot(id);
  EXPECT_TRUE(s.canvas.empty());
  const ObjectCandidate* c = s.find_candidate("ice cream");
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->attributes.size(), 5u);
  EXPECT_TRUE(c->user_supplied);
  EXPECT_EQ(s.find_concept("warming")->retired, (std::vector<std::string>{"fireplace"}));
  const auto& ev = s.events.back();
  EXPECT_EQ(ev.kind, "replacement");
  EXPECT_EQ(ev.detail["tombstones"].size(), 3u);
  EXPECT_EQ(ev.detail["tombstones"][0]["image_refs"].size(), 1u);
  ASSERT_TRUE(s.objects_diagram.has_value());
  for (const auto& l : s.objects_diagram->links) {
    EXPECT_NE(l.a, "fireplace");
    EXPECT_NE(l.b, "fireplace");
  }
}

TEST_F(ReplaceTest, SameNameIsNoOpWithWarning) {
  Session before = svc->snapshot(id);
  svc->replace(id, {{"concept", "warming"}, {"old", "fireplace"}, {"new", "fireplace"}});
  Session after = svc->snapshot(id);
  EXPECT_EQ(after.canvas, before.canvas);
  EXPECT_EQ(after.events.back().kind, "warning");
}

TEST_F(ReplaceTest, UnknownObjectAndConcept) {
  EXPECT_EQ(code_of([&] {
              svc->replace(id, {{"concept", "warming"}, {"old", "volcano"}, {"new", "ice cream"}});
            }),
            ErrorCode::kUnknownObject);
  EXPECT_EQ(code_of([&] {
              svc->replace(id, {{"concept", "cooling"}, {"old", "fireplace"}, {"new", "x"}});
            }),
            ErrorCode::kUnknownConcept);
}

TEST(Store, PersistAndReload) {
  TempDir tmp;
  LogicalClock clock;
  Session s = create_session("global warming", clock);
  std::string id = s.id;
  {
    SessionStore store(tmp.path());
    store.add(s);
    store.persist(s);
    EXPECT_TRUE(fs::exists(*store.path_for(id)));
  }
  SessionStore fresh(tmp.path());
  EXPECT_EQ(fresh.get(id)->session, s);
  EXPECT_EQ(code_of([&] { fresh.get("s-000000000000"); }), ErrorCode::kUnknownSession);
}

TEST(Store, ConcurrentWritersSerialize) {
  TempDir tmp;
  auto engine = Engine::build(offline_config(tmp.path()));
  Service svc(engine, std::make_shared<SessionStore>(tmp.path()));
  std::string id = svc.create_session({{"expression", "global warming"}})["id"];
  svc.select_concepts(id, {{"indices", {0, 1}}});
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      for (int k = 0; k < 5; ++k) svc.infer_theme(id);
    });
  }
  for (auto& t : threads) t.join();
  Session s = svc.snapshot(id);
  for (size_t i = 1; i < s.events.size(); ++i) EXPECT_EQ(s.events[i].seq, s.events[i - 1].seq + 1);
  EXPECT_EQ(load_session(tmp.path() / "sessions" / (id + ".json")), s);
}
