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

// Acceptance runner: one PASS/FAIL line per criterion.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "metablend/blend.hpp"
#include "metablend/mapping.hpp"
#include "metablend/scoring.hpp"
#include "metablend/service.hpp"
#include "metablend/studio.hpp"
#include "test_support.hpp"

using namespace metablend;
using namespace metablend::testing;
using json = nlohmann::json;
using Clock_ = std::chrono::steady_clock;

namespace {

struct Failure {
  std::string what;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

double seconds_since(Clock_::time_point t0) {
  return std::chrono::duration<double>(Clock_::now() - t0).count();
}

const std::string kImageOpening = "Generate an image that creatively blends";
const std::string kImageClosing =
    "The image should have a plain, solid-color background and no text or words.";

bool ends_with(const std::string& s, const std::string& tail) {
  return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
}

// 1 ---------------------------------------------------------------------------
std::string template_fidelity() {
  auto t0 = Clock_::now();
  auto bindings = json::parse(golden("bindings.json"));
  const std::vector<std::pair<std::string, TemplateId>> chat = {
      {"theme", TemplateId::kTheme},
      {"objects", TemplateId::kObjects},
      {"attributes", TemplateId::kAttributes},
      {"schemes", TemplateId::kSchemes}};
  for (const auto& [name, id] : chat) {
    std::string got = render_template(id, bindings["chat"][name].get<Bindings>());
    expect(got == golden(name + ".txt"), name + " render differs from golden");
  }

  Bindings image = bindings["image"].get<Bindings>();
  std::string rendered = render_template(TemplateId::kImage, image);
  expect(rendered == golden("image.txt"), "image render differs from golden");

  BlendPair pair{image["Object A"], image["Attribute 1"], image["Object B"], image["Attribute 2"]};
  Theme theme{image["METAPHORICAL THEME"] + "."};
  ImagePrompt composed = compose_image_prompt(pair, {image["selectedScheme"], "r"}, theme);
  expect(composed.text == golden("image.txt"), "compose_image_prompt differs from golden");

  // Opening and closing sentences hold for arbitrary bindings.
  std::mt19937 rng(7);
  const std::vector<std::string> words = {"lamp", "ocean", "clock", "feather", "stone", "apple"};
  for (int i = 0; i < 200; ++i) {
    auto w = [&] { return words[rng() % words.size()]; };
    BlendPair p{w(), w() + " edge", w() + "x", w() + " glow"};
    ImagePrompt ip = compose_image_prompt(p, {"Merge them.", "why"}, Theme{"A " + w() + "."});
    expect(ip.text.rfind(kImageOpening, 0) == 0, "image prompt opening missing");
    expect(ends_with(ip.text, kImageClosing), "image prompt closing missing");
  }
  double dt = seconds_since(t0);
  expect(dt < 1.0, "took " + std::to_string(dt) + " s");
  return "5 templates byte-identical to golden renders, " + std::to_string(dt * 1000).substr(0, 5) +
         " ms";
}

// 2 ---------------------------------------------------------------------------
std::string scoring_laws() {
  auto t0 = Clock_::now();
  std::mt19937_64 rng(20260101);
  std::uniform_real_distribution<double> coord(-10.0, 10.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int cases = 10000;
  for (int c = 0; c < cases; ++c) {
    // cosine
    size_t dim = 1 + rng() % 16;
    std::vector<double> u(dim), v(dim);
    for (auto& x : u) x = coord(rng);
    for (auto& x : v) x = coord(rng);
    u[0] += (u[0] >= 0 ? 1e-3 : -1e-3);
    v[0] += (v[0] >= 0 ? 1e-3 : -1e-3);
    double s = cosine_similarity(u, v);
    expect(s >= -1.0 - 1e-12 && s <= 1.0 + 1e-12, "cosine out of bounds");
    expect(std::abs(s - cosine_similarity(v, u)) <= 1e-12, "cosine not symmetric");
    double k = 0.01 + unit(rng) * 100.0;
    std::vector<double> kv(v);
    for (auto& x : kv) x *= k;
    expect(std::abs(s - cosine_similarity(u, kv)) <= 1e-9, "cosine not scale invariant");

    // minmax
    size_t n = 1 + rng() % 20;
    std::vector<double> xs(n);
    bool degenerate = rng() % 10 == 0;
    double base = coord(rng);
    for (auto& x : xs) x = degenerate ? base : std::round(coord(rng) * 4) / 4;
    auto mm = minmax_normalize(xs);
    double lo = *std::min_element(xs.begin(), xs.end());
    double hi = *std::max_element(xs.begin(), xs.end());
    for (size_t i = 0; i < n; ++i) {
      if (lo == hi) {
        expect(mm[i] == 0.5, "degenerate minmax not 0.5");
        continue;
      }
      if (xs[i] == lo) expect(mm[i] == 0.0, "min not mapped to 0");
      if (xs[i] == hi) expect(mm[i] == 1.0, "max not mapped to 1");
      for (size_t j = 0; j < n; ++j) {
        if (xs[i] < xs[j]) expect(mm[i] < mm[j], "minmax order broken");
        if (xs[i] == xs[j]) expect(mm[i] == mm[j], "minmax tie broken");
      }
    }

    // quantile on random input
    auto q = quantile_normalize(xs);
    auto oracle = quantile_oracle(xs);
    for (size_t i = 0; i < n; ++i) {
      expect(std::abs(q[i] - oracle[i]) <= 1e-12, "quantile differs from rank oracle");
    }

    // sentiment mapping
    double conf = unit(rng);
    expect(sentiment_from_label(SentimentLabel::kPositive, conf).score == conf,
           "positive score != C");
    expect(sentiment_from_label(SentimentLabel::kNegative, conf).score == 1.0 - conf,
           "negative score != 1 - C");
  }

  // Quantile: every tie pattern (ordered set partition) for n <= 8.
  long patterns = 0;
  for (size_t n = 1; n <= 8; ++n) {
    std::vector<int> levels(n, 0);
    std::function<void(size_t)> rec = [&](size_t pos) {
      if (pos == n) {
        int top = *std::max_element(levels.begin(), levels.end());
        std::vector<bool> used(top + 1, false);
        for (int l : levels) used[l] = true;
        if (std::find(used.begin(), used.end(), false) != used.end()) return;
        std::vector<double> vals(n);
        for (size_t i = 0; i < n; ++i) vals[i] = 0.37 * levels[i] - 1.5;
        auto got = quantile_normalize(vals);
        auto want = quantile_oracle(vals);
        for (size_t i = 0; i < n; ++i) {
          expect(std::abs(got[i] - want[i]) <= 1e-12, "quantile tie pattern mismatch");
        }
        ++patterns;
        return;
      }
      for (size_t l = 0; l < n; ++l) {
        levels[pos] = static_cast<int>(l);
        rec(pos + 1);
      }
    };
    rec(0);
  }
  expect(patterns == 1 + 3 + 13 + 75 + 541 + 4683 + 47293 + 545835, "tie pattern count off");
  double dt = seconds_since(t0);
  expect(dt < 30.0, "took " + std::to_string(dt) + " s");
  return std::to_string(cases) + " random cases, " + std::to_string(patterns) +
         " quantile tie patterns, " + std::to_string(dt).substr(0, 5) + " s";
}

// 3 ---------------------------------------------------------------------------
std::string pair_math() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    auto a = sentiment_from_label(rng() % 2 ? SentimentLabel::kPositive : SentimentLabel::kNegative,
                                  unit(rng));
    auto b = sentiment_from_label(rng() % 2 ? SentimentLabel::kPositive : SentimentLabel::kNegative,
                                  unit(rng));
    expect(std::abs(pair_sentiment(a, b) - (a.score + b.score) / 2.0) <= 1e-12,
           "pair sentiment is not the mean");
  }

  Scorer scorer(std::make_shared<HashEmbeddingProvider>(32),
                std::make_shared<LexiconSentimentProvider>());
  for (int i = 0; i < 50; ++i) {
    size_t na = 1 + rng() % 7, nb = 1 + rng() % 7;
    std::vector<std::string> left, right;
    for (size_t k = 0; k < na; ++k) left.push_back("left item " + std::to_string(rng() % 1000));
    for (size_t k = 0; k < nb; ++k) right.push_back("right item " + std::to_string(rng() % 1000));
    auto d = scorer.build_diagram(DiagramKind::kObjects, left, right);
    expect(d.links.size() == na * nb, "link count != |A|*|B|");
  }

  // Mutating the attributes diagram leaves the objects diagram bytes alone.
  TempDir tmp;
  auto engine = Engine::build(offline_config(tmp.path()));
  Service svc(engine, std::make_shared<SessionStore>());
  auto created = svc.create_session({{"expression", "global warming"}});
  std::string id = created["id"];
  svc.select_concepts(id, {{"indices", {0, 1}}});
  svc.suggest_objects(id, "global", {{"iteration", 1}});
  svc.suggest_objects(id, "warming", {{"iteration", 1}});
  std::string before = svc.objects_analysis(id).dump();
  std::set<std::string> seen;
  for (const char* pair : {"earth,fireplace", "globe,sun", "passport,radiator", "earth,ice cube"}) {
    seen.insert(svc.attributes_analysis(id, pair).dump());
    Session s = svc.snapshot(id);
    expect(diagram_to_json(*s.objects_diagram).dump() == before,
           "objects diagram changed after attributes rebuild");
  }
  expect(seen.size() == 4, "attributes diagrams did not change between pairs");
  return "10000 mean checks, 50 diagrams sized |A|*|B|, objects bytes stable over 4 rebuilds";
}

// 4 ---------------------------------------------------------------------------
std::string cardinality() {
  // The recorded objects answer for "exercise" really does contain "running".
  bool fixture_has_running = false;
  for (const auto& f : fs::directory_iterator(fixtures_dir() / "oracle")) {
    auto rec = json::parse(read_file(f.path()));
    if (rec["template_id"] != "objects" || rec["bindings"]["INPUT"] != "Exercise") continue;
    for (const auto& r : rec["responses"]) {
      auto parsed = extract_json_result(r.get<std::string>(), TemplateId::kObjects);
      for (const auto& row : parsed["result"]) {
        if (normal_form(row[0].get<std::string>()) == "running") fixture_has_running = true;
      }
    }
  }
  expect(fixture_has_running, "no fixture offers 'running'");

  TempDir tmp;
  auto engine = Engine::build(offline_config(tmp.path()));
  Service svc(engine, std::make_shared<SessionStore>());
  std::string id = svc.create_session({{"expression", "Exercise fuels your body like vitamins"}})["id"];
  Session s = svc.snapshot(id);
  std::vector<size_t> picks;
  for (size_t i = 0; i < s.expression.tokens.size(); ++i) {
    auto n = normal_form(s.expression.tokens[i].surface);
    if (n == "exercise" || n == "vitamins") picks.push_back(i);
  }
  svc.select_concepts(id, {{"indices", picks}});
  for (const char* c : {"Exercise", "vitamins"}) {
    std::set<std::string> all;
    for (int it = 1; it <= 2; ++it) {
      auto batch = svc.suggest_objects(id, c, {{"iteration", it}})["candidates"];
      expect(batch.size() == kObjectsPerBatch, std::string(c) + " batch size != 5");
      for (const auto& cand : batch) {
        std::string n = normal_form(cand["name"].get<std::string>());
        expect(n != "running", "'running' was accepted");
        expect(all.insert(n).second, "'" + n + "' repeated across iterations");
      }
    }
  }
  s = svc.snapshot(id);
  size_t total = 0;
  for (const auto& c : s.all_candidates()) {
    expect(c.attributes.size() == kAttributesPerObject, c.name + " lacks 5 attributes");
    ++total;
  }
  bool logged = false;
  for (const auto& e : s.events) {
    if (e.detail.dump().find("rejected object 'running'") != std::string::npos) logged = true;
  }
  expect(logged, "rejection of 'running' not logged");
  expect(object_rejection("running", "exercise", {}).has_value(), "direct rule accepts running");
  return std::to_string(total) + " candidates in 4 batches of 5, disjoint, 5 attributes each; "
         "'running' rejected";
}

// Listener that must never see a connection.
struct SilentListener {
  int fd = -1;
  int port = 0;
  SilentListener() {
    fd = socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    listen(fd, 16);
    socklen_t len = sizeof addr;
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port = ntohs(addr.sin_port);
    fcntl(fd, F_SETFL, O_NONBLOCK);
  }
  ~SilentListener() { close(fd); }
  int hits() {
    int n = 0;
    while (true) {
      int c = accept(fd, nullptr, nullptr);
      if (c < 0) break;
      close(c);
      ++n;
    }
    return n;
  }
};

// 5 ---------------------------------------------------------------------------
std::string offline_golden_run() {
  TempDir tmp;
  SilentListener sink;
  std::string base = "http://127.0.0.1:" + std::to_string(sink.port);
  json cfg = {{"oracle_base_url", base + "/v1"},      {"image_base_url", base + "/v1"},
              {"knowledge_base_url", base},           {"embedding_base_url", base + "/v1"},
              {"sentiment_url", base + "/sentiment"}};
  write_file_atomic(tmp.path() / "config.json", cfg.dump());

  auto t0 = Clock_::now();
  auto out1 = tmp.path() / "out1";
  auto r = run_cli({"run", "--expression", "global warming", "--auto", "--offline", "--fixtures",
                    fixtures_dir().string(), "--config", (tmp.path() / "config.json").string(),
                    "--out", out1.string()});
  double dt = seconds_since(t0);
  expect(r.exit_code == 0, "run failed: " + r.out);
  expect(dt < 10.0, "took " + std::to_string(dt) + " s");
  expect(sink.hits() == 0, "a connection reached the local listener");

  auto r2 = run_cli({"run", "--expression", "global warming", "--auto", "--offline", "--fixtures",
                     fixtures_dir().string(), "--out", (tmp.path() / "out2").string()});
  expect(r2.exit_code == 0, "second run failed: " + r2.out);
  std::string doc = read_file(out1 / "session.json");
  expect(doc == read_file(tmp.path() / "out2" / "session.json"), "session bytes differ between runs");
  expect(doc == golden("session-global-warming.json"), "session differs from frozen document");

  Session s = session_from_document(doc);
  auto has = [&](const std::string& concept_name, const std::string& object) {
    const ConceptState* c = s.find_concept(concept_name);
    if (!c) return false;
    return std::any_of(c->candidates.begin(), c->candidates.end(),
                       [&](const ObjectCandidate& x) { return x.name == object; });
  };
  expect(has("global", "earth") && has("warming", "fireplace"), "earth/fireplace missing");
  expect(!s.prompts.empty(), "no composed prompt");
  for (const auto& p : s.prompts) {
    expect(p.pair == BlendPair{"earth", "round", "fireplace", "flames"}, "pair is not round/flames");
  }
  expect(!s.canvas.empty(), "empty canvas");
  for (const auto& item : s.canvas) {
    expect(item.x == 1.0 && item.y == 1.0 && item.count == 1, "canvas coords not frozen at (1, 1)");
  }
  for (const char* f : {"diagrams/objects.json", "diagrams/attributes.json", "prompts.json"}) {
    expect(fs::exists(out1 / f), std::string(f) + " missing");
  }
  return "earth+fireplace, round+flames, " + std::to_string(s.prompts.size()) + " prompts, " +
         std::to_string(s.canvas.size()) + " items at (1, 1), byte-stable, 0 connections, " +
         std::to_string(dt).substr(0, 5) + " s";
}

// 6 ---------------------------------------------------------------------------
std::string replacement() {
  TempDir tmp;
  auto r = run_cli({"run", "--expression", "global warming", "--offline", "--fixtures",
                    fixtures_dir().string(), "--replace", "warming:fireplace:ice cream", "--out",
                    tmp.path().string()});
  expect(r.exit_code == 0, "run failed: " + r.out);
  Session s = load_session(tmp.path() / "session.json");
  for (const auto& item : s.canvas) {
    const ImagePrompt* p = s.find_prompt(item.prompt_id);
    expect(p != nullptr, "canvas item without prompt");
    expect(to_lower(p->text).find("fireplace") == std::string::npos &&
               p->pair.object_a != "fireplace" && p->pair.object_b != "fireplace",
           "canvas still references fireplace");
  }
  const HistoryEvent* ev = nullptr;
  for (const auto& e : s.events) {
    if (e.kind == "replacement") ev = &e;
  }
  expect(ev != nullptr, "no replacement event");
  expect(ev->detail.contains("tombstones") && !ev->detail["tombstones"].empty(), "no tombstones");
  const ObjectCandidate* c = s.find_candidate("ice cream");
  expect(c != nullptr && c->user_supplied, "ice cream candidate missing");
  expect(c->attributes.size() == 5, "ice cream lacks 5 attributes");
  expect(s.find_candidate("fireplace") == nullptr, "fireplace still a candidate");
  return std::to_string(ev->detail["tombstones"].size()) + " tombstones, " +
         std::to_string(s.canvas.size()) + " live items, ice cream has 5 attributes";
}

// 7 ---------------------------------------------------------------------------
std::string multi_concept() {
  TempDir tmp;
  auto engine = Engine::build(offline_config(tmp.path()));
  Service svc(engine, std::make_shared<SessionStore>());
  std::string id = svc.create_session({{"expression", "Books are the mirror to the soul"}})["id"];
  Session s = svc.snapshot(id);
  std::vector<size_t> picks;
  for (size_t i = 0; i < s.expression.tokens.size(); ++i) {
    auto n = normal_form(s.expression.tokens[i].surface);
    if (n == "books" || n == "mirror" || n == "soul") picks.push_back(i);
  }
  expect(picks.size() == 3, "tokens books/mirror/soul not found");
  svc.select_concepts(id, {{"indices", picks}});
  svc.infer_theme(id);
  std::map<std::string, std::string> surface;
  for (size_t i : picks) {
    surface[normal_form(s.expression.tokens[i].surface)] = s.expression.tokens[i].surface;
  }
  for (const auto& [n, surf] : surface) svc.suggest_objects(id, surf, {{"iteration", 1}});

  std::vector<json> choices = {
      {{"concept", surface["books"]}, {"object", "book"}, {"attribute", "paper pages"}},
      {{"concept", surface["mirror"]}, {"object", "hand mirror"}, {"attribute", "reflective glass"}},
      {{"concept", surface["soul"]}, {"object", "phoenix"}, {"attribute", "fiery wings"}}};
  std::sort(choices.begin(), choices.end());
  std::optional<json> first;
  do {
    auto plan = svc.plan_multi(id, {{"choices", choices}})["plan"];
    if (!first) first = plan;
    expect(plan == *first, "plan depends on choice order");
  } while (std::next_permutation(choices.begin(), choices.end()));

  BlendPlan plan = first->get<BlendPlan>();
  std::set<std::string> primary = {plan.primary.object_a, plan.primary.object_b};
  expect(primary == std::set<std::string>{"book", "hand mirror"}, "primary is not book+hand mirror");
  expect(plan.secondary.size() == 1 && plan.secondary[0].object == "phoenix" &&
             normal_form(plan.secondary[0].concept_name) == "soul",
         "secondary is not phoenix for soul");

  svc.schemes(id, {{"pair", plan.primary}, {"n", 3}});
  auto prompt = svc.prompts(id, {{"plan", plan}, {"scheme_index", 0}});
  std::string text = prompt["text"];
  expect(text == golden("multi.txt"), "multi prompt differs from golden:\n" + text);
  expect(text.find("Include a phoenix as a secondary element representing soul.") !=
             std::string::npos,
         "secondary clause missing");
  return "primary book+hand mirror, secondary phoenix/soul over 6 orderings, prompt matches golden";
}

// 8 ---------------------------------------------------------------------------
std::string oracle_robustness() {
  TempDir tmp;
  for (const char* name : {"fenced", "prefixed", "suffixed"}) {
    Bindings b = install_robustness_record(name, tmp.path());
    auto chat = std::make_shared<CountingChat>(std::make_shared<FixtureChatProvider>(tmp.path()));
    auto oracle = make_oracle(chat, tmp.path());
    auto resp = oracle->complete(TemplateId::kTheme, b);
    expect(resp.parsed["result"] == "Knowledge is a light that guides the way.",
           std::string(name) + " did not parse");
    expect(chat->calls == 1, std::string(name) + " needed a retry");
  }
  Bindings b = install_robustness_record("malformed", tmp.path());
  for (int max_attempts : {1, 3, 5}) {
    auto chat = std::make_shared<CountingChat>(std::make_shared<FixtureChatProvider>(tmp.path()));
    auto oracle = make_oracle(chat, tmp.path());
    CompleteOptions opts;
    opts.max_attempts = max_attempts;
    bool raised = false;
    try {
      oracle->complete(TemplateId::kTheme, b, opts);
    } catch (const Error& e) {
      raised = e.code() == ErrorCode::kInvalidOracleResponse;
    }
    expect(raised, "malformed fixture did not raise invalid_oracle_response");
    expect(chat->calls == max_attempts,
           "expected " + std::to_string(max_attempts) + " tries, saw " + std::to_string(chat->calls));
  }
  return "fenced, prefixed, suffixed parse first try; malformed fails after exactly max_attempts";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria = {
      {"template fidelity", template_fidelity},
      {"scoring laws", scoring_laws},
      {"pair math", pair_math},
      {"cardinality rules", cardinality},
      {"offline golden run", offline_golden_run},
      {"replacement semantics", replacement},
      {"multi-concept plan", multi_concept},
      {"oracle robustness", oracle_robustness},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    std::string verdict, note;
    try {
      note = criteria[i].second();
      verdict = "PASS";
    } catch (const Failure& f) {
      verdict = "FAIL";
      note = f.what;
    } catch (const std::exception& e) {
      verdict = "FAIL";
      note = std::string("exception: ") + e.what();
    }
    if (verdict == "FAIL") ++failed;
    std::cout << verdict << " " << (i + 1) << " " << criteria[i].first << ": " << note << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
