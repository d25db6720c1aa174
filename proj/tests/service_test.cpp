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
#include <httplib.h>

#include <chrono>
#include <thread>

#include "metablend/service.hpp"
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

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars](const char* name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

// Server on a free port over offline fixtures.
class ApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    engine = Engine::build(offline_config(tmp.path()));
    service = std::make_shared<Service>(engine, std::make_shared<SessionStore>(tmp.path()));
    server = std::make_unique<HttpServer>(service);
    port = server->bind("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    thread = std::thread([this] { server->listen_after_bind(); });
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(30, 0);
    for (int i = 0; i < 100 && !client->Get("/healthz"); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  void TearDown() override {
    server->stop();
    thread.join();
  }

  std::pair<int, json> post(const std::string& path, const json& body) {
    auto r = client->Post(path, body.dump(), "application/json");
    if (!r) return {-1, nullptr};
    return {r->status, json::parse(r->body)};
  }
  std::pair<int, json> get(const std::string& path) {
    auto r = client->Get(path);
    if (!r) return {-1, nullptr};
    return {r->status, json::parse(r->body)};
  }

  TempDir tmp;
  std::shared_ptr<Engine> engine;
  std::shared_ptr<Service> service;
  std::unique_ptr<HttpServer> server;
  std::unique_ptr<httplib::Client> client;
  std::thread thread;
  int port = 0;
};

}  // namespace

TEST(Config, Precedence) {
  TempDir tmp;
  write_file_atomic(tmp.path() / "c.json",
                    R"({"oracle_model": "from-file", "oracle_api_key": "file-key", "port": 9000})");
  Config c = resolve_config(tmp.path() / "c.json", fake_env({{"ORACLE_API_KEY", "env-key"}}),
                            json{{"port", 9100}});
  EXPECT_EQ(c.oracle_model, "from-file");
  EXPECT_EQ(c.oracle_api_key, "env-key");
  EXPECT_EQ(c.port, 9100);
  EXPECT_EQ(c.image_model, "dall-e-3");
}

TEST(Config, RejectsUnknownAndBadValues) {
  TempDir tmp;
  write_file_atomic(tmp.path() / "c.json", R"({"oracle_modle": "x"})");
  EXPECT_EQ(code_of([&] { resolve_config(tmp.path() / "c.json", nullptr, json::object()); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { resolve_config(std::nullopt, nullptr, json{{"mode", "sideways"}}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { resolve_config(tmp.path() / "absent.json", nullptr, json::object()); }),
            ErrorCode::kInvalidArgument);
}

TEST(Errors, StatusMapping) {
  EXPECT_EQ(http_status_for(ErrorCode::kEmptyExpression), 400);
  EXPECT_EQ(http_status_for(ErrorCode::kUnknownPrompt), 404);
  EXPECT_EQ(http_status_for(ErrorCode::kUnknownJob), 404);
  EXPECT_EQ(http_status_for(ErrorCode::kPreconditionFailed), 409);
  EXPECT_EQ(http_status_for(ErrorCode::kInvalidOracleResponse), 502);
  EXPECT_EQ(http_status_for(ErrorCode::kCorruptSessionFile), 500);
  auto j = api_error_json(Error(ErrorCode::kRateLimited, "slow down", json{{"retry_after", "7"}}));
  EXPECT_EQ(j["error"]["code"], "rate_limited");
  EXPECT_EQ(json::parse(j["error"]["provider_detail"].get<std::string>())["retry_after"], "7");
  EXPECT_EQ(api_error_line(Error(ErrorCode::kUnknownSession, "nope")),
            "error: unknown_session: nope");
}

TEST_F(ApiTest, FullFlowMatchesCliRun) {
  auto [st, created] = post("/sessions", {{"expression", "global warming"}});
  ASSERT_EQ(st, 201);
  std::string sid = "/sessions/" + created["id"].get<std::string>();
  EXPECT_EQ(created["tokens"].size(), 2u);

  EXPECT_EQ(post(sid + "/concepts", {{"indices", {0, 1}}}).first, 200);
  auto theme = post(sid + "/theme", json::object());
  ASSERT_EQ(theme.first, 200);
  for (const char* c : {"global", "warming"}) {
    auto objs = post(sid + "/concepts/" + std::string(c) + "/objects", {{"iteration", 1}});
    ASSERT_EQ(objs.first, 200) << objs.second.dump();
  }
  auto od = get(sid + "/analysis/objects");
  ASSERT_EQ(od.first, 200);
  EXPECT_EQ(od.second["kind"], "objects");
  EXPECT_EQ(get(sid + "/analysis/attributes?pair=earth,fireplace").first, 200);

  json pair = {{"object_a", "earth"}, {"attribute_a", "round"},
               {"object_b", "fireplace"}, {"attribute_b", "flames"}};
  auto schemes = post(sid + "/schemes", {{"pair", pair}, {"n", 3}});
  ASSERT_EQ(schemes.first, 200) << schemes.second.dump();
  std::vector<std::string> prompt_ids;
  for (int i = 0; i < 3; ++i) {
    auto p = post(sid + "/prompts", {{"pair", pair}, {"scheme_index", i}});
    ASSERT_EQ(p.first, 200) << p.second.dump();
    prompt_ids.push_back(p.second["id"]);
    auto img = post(sid + "/images", {{"prompt_id", prompt_ids.back()}});
    ASSERT_EQ(img.first, 200) << img.second.dump();
  }

  auto golden_session = json::parse(golden("session-global-warming.json"));
  std::vector<std::string> golden_ids;
  for (const auto& p : golden_session["prompts"]) golden_ids.push_back(p["id"]);
  EXPECT_EQ(prompt_ids, golden_ids);
  auto canvas = get(sid + "/canvas");
  ASSERT_EQ(canvas.second["items"].size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(canvas.second["items"][i]["prompt_id"], golden_session["canvas"][i]["prompt_id"]);
    EXPECT_EQ(canvas.second["items"][i]["count"], 1);
  }
  auto hist = get(sid + "/history");
  EXPECT_GT(hist.second["events"].size(), 5u);

  auto image = client->Get("/images/" + golden_session["canvas"][0]["image_refs"][0].get<std::string>());
  ASSERT_TRUE(image);
  EXPECT_EQ(image->status, 200);
  EXPECT_EQ(image->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(engine->offline->attempts(), 0);
}

TEST_F(ApiTest, ErrorsAsJson) {
  auto blank = post("/sessions", {{"expression", "   "}});
  EXPECT_EQ(blank.first, 400);
  EXPECT_EQ(blank.second["error"]["code"], "empty_expression");
  auto r = client->Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);

  auto [st, created] = post("/sessions", {{"expression", "global warming"}});
  std::string sid = "/sessions/" + created["id"].get<std::string>();
  auto missing = post(sid + "/images", {{"prompt_id", "p-000000000000"}});
  EXPECT_EQ(missing.first, 404);
  EXPECT_EQ(missing.second["error"]["code"], "unknown_prompt");
  EXPECT_EQ(get("/sessions/s-ffffffffffff").first, 404);
  EXPECT_EQ(get("/jobs/j-000000000000").second["error"]["code"], "unknown_job");
  EXPECT_EQ(post(sid + "/concepts/global/objects", {{"iteration", 1}}).first, 409);
  EXPECT_EQ(get(sid + "/analysis/attributes").first, 400);
}

TEST_F(ApiTest, AsyncImageJob) {
  AutoOptions o;
  o.expression = "global warming";
  std::string id = service->run_auto(o);
  Session s = service->snapshot(id);
  ASSERT_FALSE(s.prompts.empty());
  auto r = client->Post("/sessions/" + id + "/images?async=1",
                        json{{"prompt_id", s.prompts[0].id}}.dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 202);
  auto accepted = json::parse(r->body);
  EXPECT_EQ(r->get_header_value("Location"), accepted["status_url"]);
  json job;
  for (int i = 0; i < 500; ++i) {
    job = get(accepted["status_url"]).second;
    if (job["status"] != "pending") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ASSERT_EQ(job["status"], "done") << job.dump();
  EXPECT_EQ(job["result"]["item"]["count"], 2);
}

TEST(ServiceRun, HermeticAndValidated) {
  TempDir tmp;
  auto engine = Engine::build(offline_config(tmp.path()));
  Service svc(engine, std::make_shared<SessionStore>());
  AutoOptions o;
  o.expression = "global warming";
  std::string id = svc.run_auto(o);
  EXPECT_EQ(svc.snapshot(id).canvas.size(), 3u);
  EXPECT_EQ(engine->offline->attempts(), 0);
  o.iterations = 0;
  EXPECT_EQ(code_of([&] { svc.run_auto(o); }), ErrorCode::kInvalidArgument);
}

TEST(ServiceRun, UnrecordedExpressionIsFixtureMissing) {
  TempDir tmp;
  auto engine = Engine::build(offline_config(tmp.path()));
  Service svc(engine, std::make_shared<SessionStore>());
  AutoOptions o;
  o.expression = "quiet thunder";
  EXPECT_EQ(code_of([&] { svc.run_auto(o); }), ErrorCode::kFixtureMissing);
  EXPECT_EQ(engine->offline->attempts(), 0);
}

TEST(Cli, UsageAndSessionShow) {
  EXPECT_EQ(run_cli({"run", "--offline"}).exit_code, 2);
  EXPECT_EQ(run_cli({}).exit_code, 2);
  TempDir tmp;
  auto run = run_cli({"run", "--expression", "global warming", "--auto", "--offline", "--fixtures",
                      fixtures_dir().string(), "--out", tmp.path().string()});
  ASSERT_EQ(run.exit_code, 0) << run.out;
  auto show = run_cli({"session", "show", (tmp.path() / "session.json").string()});
  EXPECT_EQ(show.exit_code, 0);
  EXPECT_NE(show.out.find("expression: global warming"), std::string::npos);
  auto as_json = run_cli({"session", "show", "--json", (tmp.path() / "session.json").string()});
  EXPECT_EQ(as_json.out, read_file(tmp.path() / "session.json"));
  auto bad = run_cli({"session", "show", (tmp.path() / "nope.json").string()});
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.out.find("error: corrupt_session_file"), std::string::npos);
}
