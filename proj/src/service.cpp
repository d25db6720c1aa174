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

#include "metablend/service.hpp"

#include <algorithm>
#include <shared_mutex>

#include "metablend/util.hpp"

namespace metablend {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

std::string_view provider_mode_name(ProviderMode mode) {
  switch (mode) {
    case ProviderMode::kLive:
      return "live";
    case ProviderMode::kOffline:
      return "offline";
    case ProviderMode::kRecord:
      return "record";
  }
  return "live";
}

ProviderMode provider_mode_from_name(std::string_view name) {
  if (name == "live") return ProviderMode::kLive;
  if (name == "offline") return ProviderMode::kOffline;
  if (name == "record") return ProviderMode::kRecord;
  throw Error(ErrorCode::kInvalidArgument, "unknown provider mode '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const Config& c) {
  auto opt_path = [](const std::optional<fs::path>& p) {
    return p ? nlohmann::json(p->string()) : nlohmann::json(nullptr);
  };
  j = {{"mode", provider_mode_name(c.mode)},
       {"fixtures_dir", opt_path(c.fixtures_dir)},
       {"cache_dir", opt_path(c.cache_dir)},
       {"data_dir", c.data_dir.string()},
       {"oracle_base_url", c.oracle_base_url},
       {"oracle_api_key", c.oracle_api_key.empty() ? "" : "***"},
       {"oracle_model", c.oracle_model},
       {"image_base_url", c.image_base_url},
       {"image_api_key", c.image_api_key.empty() ? "" : "***"},
       {"image_model", c.image_model},
       {"knowledge_base_url", c.knowledge_base_url},
       {"embedding_base_url", c.embedding_base_url},
       {"embedding_model", c.embedding_model},
       {"sentiment_url", c.sentiment_url},
       {"host", c.host},
       {"port", c.port},
       {"max_in_flight", c.max_in_flight},
       {"temperature", c.temperature},
       {"max_attempts", c.max_attempts},
       {"schemes", c.schemes}};
}

namespace {

void apply_config(Config& c, const nlohmann::json& j, const std::string& source) {
  if (j.is_null()) return;
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, source + ": configuration must be a JSON object");
  }
  try {
    for (const auto& [key, v] : j.items()) {
      if (v.is_null()) continue;
      if (key == "mode") {
        c.mode = provider_mode_from_name(v.get<std::string>());
      } else if (key == "fixtures_dir") {
        c.fixtures_dir = fs::path(v.get<std::string>());
      } else if (key == "cache_dir") {
        c.cache_dir = fs::path(v.get<std::string>());
      } else if (key == "data_dir") {
        c.data_dir = v.get<std::string>();
      } else if (key == "oracle_base_url") {
        c.oracle_base_url = v.get<std::string>();
      } else if (key == "oracle_api_key") {
        c.oracle_api_key = v.get<std::string>();
      } else if (key == "oracle_model") {
        c.oracle_model = v.get<std::string>();
      } else if (key == "image_base_url") {
        c.image_base_url = v.get<std::string>();
      } else if (key == "image_api_key") {
        c.image_api_key = v.get<std::string>();
      } else if (key == "image_model") {
        c.image_model = v.get<std::string>();
      } else if (key == "knowledge_base_url") {
        c.knowledge_base_url = v.get<std::string>();
      } else if (key == "embedding_base_url") {
        c.embedding_base_url = v.get<std::string>();
      } else if (key == "embedding_model") {
        c.embedding_model = v.get<std::string>();
      } else if (key == "sentiment_url") {
        c.sentiment_url = v.get<std::string>();
      } else if (key == "host") {
        c.host = v.get<std::string>();
      } else if (key == "port") {
        c.port = v.get<int>();
      } else if (key == "max_in_flight") {
        c.max_in_flight = v.get<int>();
      } else if (key == "temperature") {
        c.temperature = v.get<double>();
      } else if (key == "max_attempts") {
        c.max_attempts = v.get<int>();
      } else if (key == "schemes") {
        c.schemes = v.get<int>();
      } else {
        throw Error(ErrorCode::kInvalidArgument, source + ": unknown configuration key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, source + ": " + e.what());
  }
}

void validate_config(const Config& c) {
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::kInvalidArgument, "port out of range");
  if (c.max_in_flight < 1 || c.max_in_flight > 1024) {
    throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be in [1, 1024]");
  }
  if (c.max_attempts < 1) throw Error(ErrorCode::kInvalidArgument, "max_attempts must be >= 1");
  if (c.temperature < 0.0) throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  if (c.schemes < 1 || c.schemes > kMaxSchemeCount) {
    throw Error(ErrorCode::kInvalidArgument, "schemes must be in [1, 5]");
  }
}

}  // namespace

Config resolve_config(const std::optional<fs::path>& file, const EnvLookup& env,
                      const nlohmann::json& overrides) {
  Config c;
  if (file) {
    std::string text;
    try {
      text = read_file(*file);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, "cannot read config file: " + std::string(e.what()));
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, file->string() + ": " + e.what());
    }
    apply_config(c, j, file->string());
  }
  if (env) {
    if (auto v = env("ORACLE_API_KEY")) c.oracle_api_key = *v;
    if (auto v = env("IMAGE_API_KEY")) c.image_api_key = *v;
    if (auto v = env("KNOWLEDGE_BASE_URL")) c.knowledge_base_url = *v;
    if (auto v = env("CACHE_DIR")) c.cache_dir = fs::path(*v);
  }
  apply_config(c, overrides, "command line");
  validate_config(c);
  return c;
}

// ---------------------------------------------------------------------------
// Errors

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyExpression:
    case ErrorCode::kIndexOutOfRange:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kMissingBinding:
    case ErrorCode::kInsufficientConcepts:
      return 400;
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownPrompt:
    case ErrorCode::kUnknownObject:
    case ErrorCode::kUnknownConcept:
    case ErrorCode::kUnknownArtifact:
    case ErrorCode::kUnknownJob:
      return 404;
    case ErrorCode::kPreconditionFailed:
      return 409;
    case ErrorCode::kKnowledgeUnavailable:
    case ErrorCode::kRateLimited:
    case ErrorCode::kFixtureMissing:
    case ErrorCode::kOracleUnavailable:
    case ErrorCode::kInvalidOracleResponse:
    case ErrorCode::kParseFailure:
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kImageProviderUnavailable:
    case ErrorCode::kContentRejected:
    case ErrorCode::kEmbeddingUnavailable:
    case ErrorCode::kSentimentUnavailable:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kZeroVector:
    case ErrorCode::kCandidateValidationFailed:
    case ErrorCode::kAttributeValidationFailed:
      return 502;
    case ErrorCode::kTaggerUnavailable:
    case ErrorCode::kCorruptSessionFile:
    case ErrorCode::kUnsupportedSchemaVersion:
    case ErrorCode::kInternal:
      return 500;
  }
  return 500;
}

nlohmann::json api_error_json(const Error& e) {
  nlohmann::json err = {{"code", error_code_name(e.code())}, {"message", e.what()}};
  if (!e.detail().is_null()) {
    err["provider_detail"] = e.detail().is_string() ? e.detail().get<std::string>()
                                                    : e.detail().dump();
  }
  return {{"error", err}};
}

std::string api_error_line(const Error& e) {
  std::string line = "error: " + std::string(error_code_name(e.code())) + ": " + e.what();
  if (!e.detail().is_null()) line += " (" + e.detail().dump() + ")";
  return line;
}

// ---------------------------------------------------------------------------
// Engine

std::shared_ptr<Engine> Engine::build(const Config& config,
                                      std::shared_ptr<HttpTransport> transport) {
  auto e = std::make_shared<Engine>();
  e->config = config;
  bool offline = config.mode == ProviderMode::kOffline;
  bool record = config.mode == ProviderMode::kRecord;
  if ((offline || record) && !config.fixtures_dir) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(provider_mode_name(config.mode)) + " mode needs a fixtures directory");
  }

  if (offline) {
    e->offline = std::make_shared<OfflineTransport>();
    e->transport = e->offline;
    e->clock = std::make_shared<LogicalClock>();
  } else {
    if (!transport) transport = std::make_shared<HttplibTransport>();
    e->transport = std::make_shared<BoundedTransport>(transport, config.max_in_flight);
    e->clock = std::make_shared<SystemClock>();
  }

  KnowledgeOptions kopts;
  kopts.base_url = config.knowledge_base_url;
  kopts.mode = config.mode;
  kopts.cache_dir = config.cache_dir;
  kopts.fixtures_dir = config.fixtures_dir;
  e->knowledge = std::make_shared<KnowledgeClient>(kopts, e->transport, e->clock);

  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<ImageProvider> images;
  std::shared_ptr<EmbeddingProvider> embeddings;
  std::shared_ptr<SentimentProvider> sentiment;
  auto lexicon = std::make_shared<LexiconSentimentProvider>();

  if (offline) {
    const fs::path& dir = *config.fixtures_dir;
    chat = std::make_shared<FixtureChatProvider>(dir);
    images = std::make_shared<FixtureImageProvider>(dir);
    if (fs::exists(dir / "embeddings.json")) {
      embeddings = std::make_shared<TableEmbeddingProvider>(dir / "embeddings.json");
    } else {
      embeddings = std::make_shared<HashEmbeddingProvider>();
    }
    sentiment = std::make_shared<TableSentimentProvider>(dir / "sentiment.json", lexicon);
  } else {
    ChatHttpOptions copts;
    copts.base_url = config.oracle_base_url;
    copts.api_key = config.oracle_api_key;
    copts.model = config.oracle_model;
    std::shared_ptr<ChatProvider> live_chat = std::make_shared<HttpChatProvider>(copts, e->transport);

    ImageHttpOptions iopts;
    iopts.base_url = config.image_base_url;
    iopts.api_key = config.image_api_key;
    iopts.model = config.image_model;
    std::shared_ptr<ImageProvider> live_images =
        std::make_shared<HttpImageProvider>(iopts, e->transport);

    if (config.embedding_base_url.empty()) {
      embeddings = std::make_shared<HashEmbeddingProvider>();
    } else {
      EmbeddingHttpOptions eopts;
      eopts.base_url = config.embedding_base_url;
      eopts.api_key = config.oracle_api_key;
      eopts.model = config.embedding_model;
      embeddings = std::make_shared<HttpEmbeddingProvider>(eopts, e->transport);
    }
    if (config.sentiment_url.empty()) {
      sentiment = lexicon;
    } else {
      sentiment = std::make_shared<HttpSentimentProvider>(config.sentiment_url,
                                                          config.oracle_api_key, e->transport);
    }

    if (record) {
      const fs::path& dir = *config.fixtures_dir;
      chat = std::make_shared<FixtureChatProvider>(dir, live_chat, true);
      images = std::make_shared<FixtureImageProvider>(dir, live_images, true);
      embeddings = std::make_shared<RecordingEmbeddingProvider>(embeddings, dir / "embeddings.json");
      sentiment = std::make_shared<TableSentimentProvider>(dir / "sentiment.json", sentiment, true);
    } else {
      chat = live_chat;
      images = live_images;
    }
  }

  auto store = std::make_shared<ImageStore>(config.data_dir);
  e->oracle = std::make_shared<Oracle>(chat, images, store, e->clock);
  e->scorer = std::make_shared<Scorer>(embeddings, sentiment);
  return e;
}

// ---------------------------------------------------------------------------
// Service

namespace {

using ReadLock = std::shared_lock<std::shared_mutex>;
using WriteLock = std::unique_lock<std::shared_mutex>;

std::string require_string(const nlohmann::json& body, const char* key) {
  if (!body.is_object() || !body.contains(key) || !body[key].is_string()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("missing string field '") + key + "'");
  }
  return body[key].get<std::string>();
}

template <typename T>
T field(const nlohmann::json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) {
    throw Error(ErrorCode::kInvalidArgument, std::string("missing field '") + key + "'");
  }
  try {
    return body[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad field '") + key + "': " + e.what());
  }
}

ObjectCandidate* find_candidate_mut(Session& s, const std::string& name) {
  std::string n = normal_form(name);
  for (auto& c : s.concepts) {
    for (auto& cand : c.candidates) {
      if (normal_form(cand.name) == n) return &cand;
    }
  }
  return nullptr;
}

std::vector<std::string> candidate_names(const ConceptState& c) {
  std::vector<std::string> out;
  for (const auto& cand : c.candidates) out.push_back(cand.name);
  return out;
}

bool same_pair(const BlendPair& x, const BlendPair& y) {
  return normal_form(x.object_a) == normal_form(y.object_a) &&
         normal_form(x.object_b) == normal_form(y.object_b) &&
         normal_form(x.attribute_a) == normal_form(y.attribute_a) &&
         normal_form(x.attribute_b) == normal_form(y.attribute_b);
}

// Max norm_sim; ties by higher norm_sent, then by names.
const PairScore& best_link(const AnalysisDiagram& d) {
  const PairScore* best = &d.links.front();
  for (const auto& l : d.links) {
    if (l.norm_sim != best->norm_sim) {
      if (l.norm_sim > best->norm_sim) best = &l;
      continue;
    }
    if (l.norm_sent != best->norm_sent) {
      if (l.norm_sent > best->norm_sent) best = &l;
      continue;
    }
    if (std::tie(l.a, l.b) < std::tie(best->a, best->b)) best = &l;
  }
  return *best;
}

nlohmann::json canvas_item_json(const Session& s, const CanvasItem& item) {
  nlohmann::json j = item;
  auto now = current_coords(s, item);
  j["current"] = now ? nlohmann::json{{"x", now->first}, {"y", now->second}}
                     : nlohmann::json(nullptr);
  nlohmann::json urls = nlohmann::json::array();
  for (const auto& ref : item.image_refs) urls.push_back("/images/" + ref);
  j["image_urls"] = urls;
  return j;
}

nlohmann::json artifact_json(const ImageArtifact& a) {
  nlohmann::json j = a;
  j["url"] = "/images/" + a.id;
  return j;
}

}  // namespace

Service::Service(std::shared_ptr<Engine> engine, std::shared_ptr<SessionStore> store)
    : engine_(std::move(engine)), store_(std::move(store)) {}

Service::~Service() {
  std::lock_guard lock(jobs_mu_);
  for (auto& [id, job] : jobs_) job.result.wait();
}

CompleteOptions Service::complete_options() const {
  CompleteOptions o;
  o.temperature = engine_->config.temperature;
  o.max_attempts = engine_->config.max_attempts;
  return o;
}

Mapper Service::make_mapper(std::vector<std::string>& warnings) {
  MapperOptions opts{engine_->config.temperature, engine_->config.max_attempts};
  return Mapper(engine_->oracle, engine_->knowledge, opts,
                [&warnings](const std::string& w) { warnings.push_back(w); });
}

void Service::flush_warnings(Session& s, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) log_event(s, *engine_->clock, "warning", {{"message", w}});
}

void Service::ensure_objects_diagram(Session& s) {
  if (s.concepts.size() < 2) {
    throw Error(ErrorCode::kPreconditionFailed, "select two concepts first");
  }
  auto left = candidate_names(s.concepts[0]);
  auto right = candidate_names(s.concepts[1]);
  if (s.objects_diagram && s.objects_diagram->left == left && s.objects_diagram->right == right) {
    return;
  }
  rebuild_objects_diagram(s, *engine_->scorer, *engine_->clock);
}

void Service::ensure_attributes_diagram(Session& s, const std::string& a, const std::string& b) {
  const auto* ca = s.find_candidate(a);
  const auto* cb = s.find_candidate(b);
  if (!ca) throw Error(ErrorCode::kUnknownObject, "unknown object '" + a + "'");
  if (!cb) throw Error(ErrorCode::kUnknownObject, "unknown object '" + b + "'");
  if (s.attributes_diagram && s.attribute_objects) {
    const auto& [x, y] = *s.attribute_objects;
    const auto& d = *s.attributes_diagram;
    bool forward = normal_form(x) == normal_form(ca->name) &&
                   normal_form(y) == normal_form(cb->name) && d.left == ca->attributes &&
                   d.right == cb->attributes;
    bool reverse = normal_form(x) == normal_form(cb->name) &&
                   normal_form(y) == normal_form(ca->name) && d.left == cb->attributes &&
                   d.right == ca->attributes;
    if (forward || reverse) return;
  }
  rebuild_attributes_diagram(s, *engine_->scorer, ca->name, cb->name, *engine_->clock);
}

nlohmann::json Service::create_session(const nlohmann::json& body) {
  std::string text = require_string(body, "expression");
  Session s = metablend::create_session(text, *engine_->clock, store_->next_ordinal());
  nlohmann::json out = {{"id", s.id}, {"expression", s.expression}};
  out["tokens"] = out["expression"]["tokens"];
  store_->persist(s);
  store_->add(std::move(s));
  return out;
}

nlohmann::json Service::get_session(const std::string& id) {
  auto slot = store_->get(id);
  ReadLock lock(slot->mu);
  return slot->session;
}

Session Service::snapshot(const std::string& id) {
  auto slot = store_->get(id);
  ReadLock lock(slot->mu);
  return slot->session;
}

nlohmann::json Service::select_concepts(const std::string& id, const nlohmann::json& body) {
  auto picks = field<std::vector<size_t>>(body, "indices");
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  apply_selection(s, picks, *engine_->clock);
  store_->persist(s);
  return {{"concepts", s.expression.selected_surfaces()}, {"expression", s.expression}};
}

nlohmann::json Service::infer_theme(const std::string& id) {
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  std::vector<std::string> warnings;
  auto mapper = make_mapper(warnings);
  Expression expr = s.expression;
  Theme theme = mapper.infer_theme(expr);
  s.expression = expr;
  s.theme = theme;
  flush_warnings(s, warnings);
  log_event(s, *engine_->clock, "theme", {{"theme", theme.sentence}});
  store_->persist(s);
  return {{"theme", theme.sentence}, {"warnings", warnings}};
}

nlohmann::json Service::suggest_objects(const std::string& id, const std::string& concept_name,
                                        const nlohmann::json& body) {
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  ConceptState* state = s.find_concept(concept_name);
  if (!state) {
    throw Error(ErrorCode::kPreconditionFailed, "'" + concept_name + "' is not a selected concept");
  }
  int iteration = state->iterations + 1;
  if (body.is_object() && body.contains("iteration")) iteration = field<int>(body, "iteration");
  if (iteration < 1) throw Error(ErrorCode::kInvalidArgument, "iteration must be >= 1");

  nlohmann::json batch = nlohmann::json::array();
  if (iteration <= state->iterations) {
    for (const auto& c : state->candidates) {
      if (c.iteration == iteration) batch.push_back(c);
    }
    return {{"concept", state->concept_name}, {"iteration", iteration}, {"candidates", batch}};
  }
  if (iteration != state->iterations + 1) {
    throw Error(ErrorCode::kPreconditionFailed,
                "next iteration for '" + state->concept_name + "' is " +
                    std::to_string(state->iterations + 1));
  }

  std::vector<std::string> previous = candidate_names(*state);
  previous.insert(previous.end(), state->retired.begin(), state->retired.end());
  std::vector<std::string> warnings;
  auto mapper = make_mapper(warnings);
  std::vector<ObjectCandidate> fresh;
  try {
    fresh = mapper.suggest_objects(state->concept_name, s.expression, iteration, previous);
    fresh = mapper.suggest_attributes(std::move(fresh));
  } catch (...) {
    flush_warnings(s, warnings);
    store_->persist(s);
    throw;
  }
  std::vector<std::string> names;
  for (auto& c : fresh) {
    names.push_back(c.name);
    batch.push_back(c);
    state->candidates.push_back(std::move(c));
  }
  state->iterations = iteration;
  flush_warnings(s, warnings);
  log_event(s, *engine_->clock, "objects_suggested",
            {{"concept", state->concept_name}, {"iteration", iteration}, {"names", names}});
  store_->persist(s);
  return {{"concept", state->concept_name}, {"iteration", iteration}, {"candidates", batch}};
}

nlohmann::json Service::object_attributes(const std::string& id, const nlohmann::json& body) {
  auto names = field<std::vector<std::string>>(body, "names");
  bool refresh = body.value("refresh", false);
  if (names.empty()) throw Error(ErrorCode::kInvalidArgument, "names is empty");
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  std::vector<ObjectCandidate*> targets;
  for (const auto& n : names) {
    auto* c = find_candidate_mut(s, n);
    if (!c) throw Error(ErrorCode::kUnknownObject, "unknown object '" + n + "'");
    targets.push_back(c);
  }
  if (refresh) {
    std::vector<std::string> warnings;
    auto mapper = make_mapper(warnings);
    std::vector<ObjectCandidate> batch;
    for (auto* c : targets) batch.push_back(*c);
    batch = mapper.suggest_attributes(std::move(batch));
    for (size_t i = 0; i < targets.size(); ++i) targets[i]->attributes = batch[i].attributes;
    flush_warnings(s, warnings);
    log_event(s, *engine_->clock, "attributes_filled", {{"names", names}});
    store_->persist(s);
  }
  nlohmann::json out = nlohmann::json::array();
  for (auto* c : targets) out.push_back(*c);
  return {{"candidates", out}};
}

nlohmann::json Service::preview(const std::string& id, const nlohmann::json& body) {
  std::string name = require_string(body, "name");
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  auto* c = find_candidate_mut(s, name);
  if (!c) throw Error(ErrorCode::kUnknownObject, "unknown object '" + name + "'");
  if (!c->preview) {
    std::vector<std::string> warnings;
    auto mapper = make_mapper(warnings);
    c->preview = mapper.preview_object(*c);
    log_event(s, *engine_->clock, "preview", {{"name", c->name}, {"artifact_id", c->preview->id}});
    store_->persist(s);
  }
  return artifact_json(*c->preview);
}

nlohmann::json Service::objects_analysis(const std::string& id) {
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  bool had = s.objects_diagram.has_value();
  auto before = s.objects_diagram;
  ensure_objects_diagram(s);
  if (!had || before != s.objects_diagram) store_->persist(s);
  return diagram_to_json(*s.objects_diagram);
}

nlohmann::json Service::attributes_analysis(const std::string& id, const std::string& pair) {
  auto comma = pair.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "pair must be 'object_a,object_b'");
  }
  std::string a = trim(pair.substr(0, comma));
  std::string b = trim(pair.substr(comma + 1));
  if (a.empty() || b.empty()) throw Error(ErrorCode::kInvalidArgument, "pair has an empty object");
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  auto before = s.attributes_diagram;
  ensure_attributes_diagram(s, a, b);
  if (before != s.attributes_diagram) store_->persist(s);
  return diagram_to_json(*s.attributes_diagram);
}

nlohmann::json Service::schemes(const std::string& id, const nlohmann::json& body) {
  auto pair = field<BlendPair>(body, "pair");
  int n = body.value("n", engine_->config.schemes);
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  auto candidates = s.all_candidates();
  check_pair(pair, &candidates);
  auto out = generate_schemes(*engine_->oracle, pair, n, complete_options());
  auto it = std::find_if(s.schemes.begin(), s.schemes.end(),
                         [&](const SchemeSet& set) { return same_pair(set.pair, pair); });
  if (it != s.schemes.end()) {
    it->schemes = out;
  } else {
    s.schemes.push_back({pair, out});
  }
  log_event(s, *engine_->clock, "schemes", {{"pair", pair}, {"count", out.size()}});
  store_->persist(s);
  return {{"pair", pair}, {"schemes", out}};
}

nlohmann::json Service::prompts(const std::string& id, const nlohmann::json& body) {
  int index = field<int>(body, "scheme_index");
  std::optional<BlendPlan> plan;
  BlendPair pair;
  if (body.contains("plan")) {
    plan = field<BlendPlan>(body, "plan");
    pair = plan->primary;
  } else {
    pair = field<BlendPair>(body, "pair");
  }
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  if (!s.theme) throw Error(ErrorCode::kPreconditionFailed, "infer the theme first");
  auto it = std::find_if(s.schemes.begin(), s.schemes.end(),
                         [&](const SchemeSet& set) { return same_pair(set.pair, pair); });
  if (it == s.schemes.end()) {
    throw Error(ErrorCode::kPreconditionFailed, "generate schemes for this pair first");
  }
  if (index < 0 || static_cast<size_t>(index) >= it->schemes.size()) {
    throw Error(ErrorCode::kIndexOutOfRange, "scheme_index " + std::to_string(index) +
                                                 " out of range for " +
                                                 std::to_string(it->schemes.size()) + " schemes");
  }
  ImagePrompt p = plan ? compose_multi_prompt(*plan, it->schemes[index], *s.theme)
                       : compose_image_prompt(pair, it->schemes[index], *s.theme);
  const ImagePrompt& stored = add_prompt(s, p, *engine_->clock);
  nlohmann::json out = stored;
  store_->persist(s);
  return out;
}

nlohmann::json Service::images(const std::string& id, const nlohmann::json& body) {
  std::string prompt_id = require_string(body, "prompt_id");
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  const ImagePrompt* p = s.find_prompt(prompt_id);
  if (!p) throw Error(ErrorCode::kUnknownPrompt, "unknown prompt '" + prompt_id + "'");
  ImagePrompt prompt = *p;
  ensure_objects_diagram(s);
  ensure_attributes_diagram(s, prompt.pair.object_a, prompt.pair.object_b);
  ImageArtifact art = engine_->oracle->generate_image(prompt.text);
  CanvasItem item = place_result(s, prompt_id, art, *engine_->clock);
  store_->persist(s);
  return {{"item", canvas_item_json(s, item)}, {"artifact", artifact_json(art)}};
}

nlohmann::json Service::replace(const std::string& id, const nlohmann::json& body) {
  std::string concept_name = require_string(body, "concept");
  std::string old_object = require_string(body, "old");
  std::string new_object = require_string(body, "new");
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  std::vector<std::string> warnings;
  auto mapper = make_mapper(warnings);
  replace_object(s, concept_name, old_object, new_object, mapper, *engine_->scorer, *engine_->clock);
  flush_warnings(s, warnings);
  store_->persist(s);

  nlohmann::json concepts = nlohmann::json::array();
  for (const auto& c : s.concepts) {
    concepts.push_back({{"concept", c.concept_name},
                        {"candidates", candidate_names(c)},
                        {"retired", c.retired}});
  }
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : s.canvas) items.push_back(canvas_item_json(s, item));
  return {{"id", s.id},
          {"concepts", concepts},
          {"canvas", items},
          {"last_event", s.events.back()}};
}

nlohmann::json Service::canvas(const std::string& id) {
  auto slot = store_->get(id);
  ReadLock lock(slot->mu);
  const Session& s = slot->session;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : s.canvas) items.push_back(canvas_item_json(s, item));
  return {{"items", items}};
}

nlohmann::json Service::history(const std::string& id) {
  auto slot = store_->get(id);
  ReadLock lock(slot->mu);
  return {{"events", list_history(slot->session)}};
}

nlohmann::json Service::plan_multi(const std::string& id, const nlohmann::json& body) {
  auto choices = field<std::vector<ConceptChoice>>(body, "choices");
  if (choices.size() < 3) {
    throw Error(ErrorCode::kInsufficientConcepts,
                "multi-concept planning needs at least 3 concepts; use the two-concept path");
  }
  auto slot = store_->get(id);
  WriteLock lock(slot->mu);
  Session& s = slot->session;
  std::vector<std::string> objects;
  for (const auto& c : choices) {
    const ConceptState* state = s.find_concept(c.concept_name);
    if (!state) throw Error(ErrorCode::kUnknownConcept, "unknown concept '" + c.concept_name + "'");
    const ObjectCandidate* cand = nullptr;
    for (const auto& x : state->candidates) {
      if (normal_form(x.name) == normal_form(c.object)) cand = &x;
    }
    if (!cand) {
      throw Error(ErrorCode::kUnknownObject,
                  "'" + c.object + "' is not a candidate of '" + c.concept_name + "'");
    }
    if (std::none_of(cand->attributes.begin(), cand->attributes.end(), [&](const std::string& a) {
          return normal_form(a) == normal_form(c.attribute);
        })) {
      throw Error(ErrorCode::kInvalidArgument,
                  "'" + c.attribute + "' is not an attribute of '" + c.object + "'");
    }
    objects.push_back(cand->name);
  }
  std::sort(objects.begin(), objects.end());
  auto diagram = engine_->scorer->build_diagram(DiagramKind::kObjects, objects, objects);
  BlendPlan plan = plan_multi_concept(choices, diagram);
  log_event(s, *engine_->clock, "plan", {{"plan", plan}});
  store_->persist(s);
  return {{"plan", plan}, {"diagram", diagram_to_json(diagram)}};
}

std::string Service::submit_image_job(const std::string& id, const nlohmann::json& body) {
  // Fail fast on an unknown session or prompt.
  std::string prompt_id = require_string(body, "prompt_id");
  {
    auto slot = store_->get(id);
    ReadLock lock(slot->mu);
    if (!slot->session.find_prompt(prompt_id)) {
      throw Error(ErrorCode::kUnknownPrompt, "unknown prompt '" + prompt_id + "'");
    }
  }
  std::lock_guard lock(jobs_mu_);
  std::string job_id = "j-" + sha256_hex(id + "|" + prompt_id + "|" +
                                         std::to_string(++job_counter_))
                                  .substr(0, 12);
  auto fut = std::async(std::launch::async, [this, id, body]() -> nlohmann::json {
               try {
                 return {{"status", "done"}, {"result", images(id, body)}};
               } catch (const Error& e) {
                 auto j = api_error_json(e);
                 j["status"] = "failed";
                 j["http_status"] = http_status_for(e.code());
                 return j;
               } catch (const std::exception& e) {
                 return {{"status", "failed"},
                         {"http_status", 500},
                         {"error", {{"code", "internal"}, {"message", e.what()}}}};
               }
             }).share();
  jobs_[job_id] = {id, fut};
  return job_id;
}

nlohmann::json Service::job(const std::string& job_id) {
  std::shared_future<nlohmann::json> fut;
  {
    std::lock_guard lock(jobs_mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw Error(ErrorCode::kUnknownJob, "unknown job '" + job_id + "'");
    fut = it->second.result;
  }
  if (fut.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
    return {{"job_id", job_id}, {"status", "pending"}};
  }
  nlohmann::json out = fut.get();
  out["job_id"] = job_id;
  return out;
}

fs::path Service::image_path(const std::string& artifact_id) const {
  bool valid = !artifact_id.empty() && artifact_id.size() <= 128 &&
               std::all_of(artifact_id.begin(), artifact_id.end(), [](char c) {
                 return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
               });
  if (valid) {
    fs::path dir = engine_->oracle->store().root() / "images";
    std::error_code ec;
    if (fs::is_directory(dir, ec)) {
      for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.path().stem() == artifact_id) return entry.path();
      }
    }
  }
  throw Error(ErrorCode::kUnknownArtifact, "unknown artifact '" + artifact_id + "'");
}

std::string Service::run_auto(const AutoOptions& options) {
  auto created = create_session({{"expression", options.expression}});
  std::string id = created["id"].get<std::string>();
  Session s = snapshot(id);

  std::vector<size_t> picks;
  if (options.concepts.empty()) {
    std::vector<size_t> open;
    for (size_t i = 0; i < s.expression.tokens.size(); ++i) {
      if (s.expression.tokens[i].pos != PartOfSpeech::kVerb) open.push_back(i);
    }
    if (open.size() < 2) {
      throw Error(ErrorCode::kInsufficientConcepts,
                  "auto mode needs two noun or adjective concepts; pass --concepts");
    }
    picks = {open.front(), open.back()};
  } else {
    for (const auto& name : options.concepts) {
      auto it = std::find_if(s.expression.tokens.begin(), s.expression.tokens.end(),
                             [&](const ConceptToken& t) {
                               return normal_form(t.surface) == normal_form(name);
                             });
      if (it == s.expression.tokens.end()) {
        throw Error(ErrorCode::kUnknownConcept, "'" + name + "' is not a token of the expression");
      }
      picks.push_back(static_cast<size_t>(it - s.expression.tokens.begin()));
    }
    if (picks.size() != 2) {
      throw Error(ErrorCode::kInvalidArgument, "auto mode blends exactly two concepts");
    }
  }

  auto selected = select_concepts(id, {{"indices", picks}});
  infer_theme(id);
  if (options.iterations < 1) {
    throw Error(ErrorCode::kInvalidArgument, "iterations must be at least 1");
  }
  for (const auto& c : selected["concepts"]) {
    for (int it = 1; it <= options.iterations; ++it) {
      suggest_objects(id, c.get<std::string>(), {{"iteration", it}});
    }
  }
  auto objects = diagram_from_json(objects_analysis(id));
  const PairScore& ol = best_link(objects);
  std::string a = ol.a, b = ol.b;
  auto attributes = diagram_from_json(attributes_analysis(id, a + "," + b));
  const PairScore& al = best_link(attributes);
  BlendPair pair{a, al.a, b, al.b};

  auto sch = schemes(id, {{"pair", pair}, {"n", options.schemes}});
  for (size_t i = 0; i < sch["schemes"].size(); ++i) {
    auto p = prompts(id, {{"pair", pair}, {"scheme_index", i}});
    images(id, {{"prompt_id", p["id"]}});
  }
  for (const auto& r : options.replacements) {
    replace(id, {{"concept", r.concept_name}, {"old", r.old_object}, {"new", r.new_object}});
  }
  return id;
}

}  // namespace metablend
