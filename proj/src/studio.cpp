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

#include "metablend/studio.hpp"

#include <algorithm>

#include "metablend/error.hpp"

namespace metablend {

namespace fs = std::filesystem;

ConceptState* Session::find_concept(const std::string& concept_name) {
  std::string n = normal_form(concept_name);
  for (auto& c : concepts) {
    if (normal_form(c.concept_name) == n) return &c;
  }
  return nullptr;
}

const ConceptState* Session::find_concept(const std::string& concept_name) const {
  return const_cast<Session*>(this)->find_concept(concept_name);
}

const ObjectCandidate* Session::find_candidate(const std::string& name) const {
  std::string n = normal_form(name);
  for (const auto& c : concepts) {
    for (const auto& cand : c.candidates) {
      if (normal_form(cand.name) == n) return &cand;
    }
  }
  return nullptr;
}

const ImagePrompt* Session::find_prompt(const std::string& id) const {
  for (const auto& p : prompts) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

std::vector<ObjectCandidate> Session::all_candidates() const {
  std::vector<ObjectCandidate> out;
  for (const auto& c : concepts) out.insert(out.end(), c.candidates.begin(), c.candidates.end());
  return out;
}

void to_json(nlohmann::json& j, const CanvasItem& c) {
  j = {{"prompt_id", c.prompt_id},
       {"coords", {{"x", c.x}, {"y", c.y}}},
       {"image_refs", c.image_refs},
       {"count", c.count}};
}

void from_json(const nlohmann::json& j, CanvasItem& c) {
  c.prompt_id = j.at("prompt_id").get<std::string>();
  c.x = j.at("coords").at("x").get<double>();
  c.y = j.at("coords").at("y").get<double>();
  c.image_refs = j.at("image_refs").get<std::vector<std::string>>();
  c.count = j.at("count").get<int>();
}

void to_json(nlohmann::json& j, const HistoryEvent& e) {
  j = {{"seq", e.seq}, {"at", e.at}, {"kind", e.kind}, {"detail", e.detail}};
}

void from_json(const nlohmann::json& j, HistoryEvent& e) {
  e.seq = j.at("seq").get<long>();
  e.at = j.at("at").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
  e.detail = j.value("detail", nlohmann::json(nullptr));
}

namespace {

nlohmann::json concept_to_json(const ConceptState& c) {
  return {{"concept", c.concept_name},
          {"candidates", c.candidates},
          {"retired", c.retired},
          {"iterations", c.iterations}};
}

ConceptState concept_from_json(const nlohmann::json& j) {
  ConceptState c;
  c.concept_name = j.at("concept").get<std::string>();
  c.candidates = j.at("candidates").get<std::vector<ObjectCandidate>>();
  c.retired = j.value("retired", std::vector<std::string>{});
  c.iterations = j.value("iterations", 0);
  return c;
}

nlohmann::json scheme_set_to_json(const SchemeSet& s) {
  return {{"pair", s.pair}, {"schemes", s.schemes}};
}

bool mentions(const std::string& haystack, const std::string& needle) {
  return to_lower(haystack).find(normal_form(needle)) != std::string::npos;
}

bool prompt_references(const ImagePrompt& p, const std::string& object) {
  std::string n = normal_form(object);
  if (normal_form(p.pair.object_a) == n || normal_form(p.pair.object_b) == n) return true;
  for (const auto& e : p.secondary) {
    if (normal_form(e.object) == n) return true;
  }
  return mentions(p.text, object);
}

std::vector<std::string> names_of(const ConceptState& c) {
  std::vector<std::string> out;
  for (const auto& cand : c.candidates) out.push_back(cand.name);
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const Session& s) {
  j = nlohmann::json::object();
  j["schema_version"] = s.schema_version;
  j["id"] = s.id;
  j["created_at"] = s.created_at;
  j["expression"] = s.expression;
  j["theme"] = s.theme ? nlohmann::json(s.theme->sentence) : nlohmann::json(nullptr);
  j["concepts"] = nlohmann::json::array();
  for (const auto& c : s.concepts) j["concepts"].push_back(concept_to_json(c));
  j["diagrams"] = {
      {"objects", s.objects_diagram ? diagram_to_json(*s.objects_diagram) : nlohmann::json()},
      {"attributes",
       s.attributes_diagram ? diagram_to_json(*s.attributes_diagram) : nlohmann::json()}};
  j["attribute_objects"] = s.attribute_objects
                               ? nlohmann::json::array({s.attribute_objects->first,
                                                        s.attribute_objects->second})
                               : nlohmann::json(nullptr);
  j["schemes"] = nlohmann::json::array();
  for (const auto& set : s.schemes) j["schemes"].push_back(scheme_set_to_json(set));
  j["prompts"] = s.prompts;
  j["canvas"] = s.canvas;
  j["artifacts"] = nlohmann::json::object();
  for (const auto& [id, a] : s.artifacts) j["artifacts"][id] = a;
  j["events"] = s.events;
}

void from_json(const nlohmann::json& j, Session& s) {
  s.schema_version = j.at("schema_version").get<int>();
  s.id = j.at("id").get<std::string>();
  s.created_at = j.value("created_at", std::string());
  s.expression = j.at("expression").get<Expression>();
  if (j.contains("theme") && !j["theme"].is_null()) {
    s.theme = Theme{j["theme"].get<std::string>()};
  } else {
    s.theme.reset();
  }
  s.concepts.clear();
  for (const auto& c : j.at("concepts")) s.concepts.push_back(concept_from_json(c));
  const auto& d = j.at("diagrams");
  s.objects_diagram.reset();
  s.attributes_diagram.reset();
  if (!d.at("objects").is_null()) s.objects_diagram = diagram_from_json(d["objects"]);
  if (!d.at("attributes").is_null()) s.attributes_diagram = diagram_from_json(d["attributes"]);
  s.attribute_objects.reset();
  if (j.contains("attribute_objects") && !j["attribute_objects"].is_null()) {
    s.attribute_objects = {j["attribute_objects"][0].get<std::string>(),
                           j["attribute_objects"][1].get<std::string>()};
  }
  s.schemes.clear();
  for (const auto& set : j.at("schemes")) {
    s.schemes.push_back(
        {set.at("pair").get<BlendPair>(), set.at("schemes").get<std::vector<BlendScheme>>()});
  }
  s.prompts = j.at("prompts").get<std::vector<ImagePrompt>>();
  s.canvas = j.at("canvas").get<std::vector<CanvasItem>>();
  s.artifacts.clear();
  for (const auto& [id, a] : j.at("artifacts").items()) s.artifacts[id] = a.get<ImageArtifact>();
  s.events = j.at("events").get<std::vector<HistoryEvent>>();
}

void log_event(Session& s, Clock& clock, const std::string& kind, nlohmann::json detail) {
  HistoryEvent e;
  e.seq = s.events.empty() ? 1 : s.events.back().seq + 1;
  e.at = clock.now();
  e.kind = kind;
  e.detail = std::move(detail);
  s.events.push_back(std::move(e));
}

Session create_session(const std::string& expression_text, Clock& clock, long ordinal,
                       const PosTagger* tagger) {
  Session s;
  s.expression = parse_expression(expression_text, tagger);
  s.id = "s-" + sha256_hex(s.expression.raw + "|" + std::to_string(ordinal)).substr(0, 12);
  s.created_at = clock.now();
  log_event(s, clock, "created", {{"expression", s.expression.raw}});
  return s;
}

std::string session_document(const Session& s) { return nlohmann::json(s).dump(2) + "\n"; }

void save_session(const Session& s, const fs::path& file) {
  write_file_atomic(file, session_document(s));
}

Session session_from_document(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptSessionFile, std::string("session file is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kCorruptSessionFile, "session file is not an object");
  int version = 0;
  if (j.contains("schema_version")) {
    if (!j["schema_version"].is_number_integer()) {
      throw Error(ErrorCode::kCorruptSessionFile, "schema_version is not an integer");
    }
    version = j["schema_version"].get<int>();
  }
  if (version > kSessionSchemaVersion) {
    throw Error(ErrorCode::kUnsupportedSchemaVersion,
                "session schema_version " + std::to_string(version) + " is newer than " +
                    std::to_string(kSessionSchemaVersion),
                {{"schema_version", version}});
  }
  if (version < 0) {
    throw Error(ErrorCode::kUnsupportedSchemaVersion, "negative schema_version");
  }
  if (version == 0) {
    // Version 0: no schema_version, no event log, no artifact index.
    j["schema_version"] = kSessionSchemaVersion;
    if (!j.contains("events")) j["events"] = nlohmann::json::array();
    if (!j.contains("artifacts")) j["artifacts"] = nlohmann::json::object();
    if (!j.contains("schemes")) j["schemes"] = nlohmann::json::array();
  }
  try {
    return j.get<Session>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptSessionFile, std::string("malformed session: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptSessionFile, std::string("malformed session: ") + e.what());
  }
}

Session load_session(const fs::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kCorruptSessionFile, "cannot read " + file.string() + ": " + e.what());
  }
  return session_from_document(text);
}

void apply_selection(Session& s, const std::vector<size_t>& picks, Clock& clock) {
  s.expression = select_concepts(s.expression, picks);
  std::vector<ConceptState> next;
  for (const auto& surface : s.expression.selected_surfaces()) {
    if (const auto* existing = s.find_concept(surface)) {
      next.push_back(*existing);
    } else if (std::none_of(next.begin(), next.end(), [&](const ConceptState& c) {
                 return normal_form(c.concept_name) == normal_form(surface);
               })) {
      next.push_back({surface, {}, {}, 0});
    }
  }
  s.concepts = std::move(next);
  log_event(s, clock, "concepts_selected", {{"concepts", s.expression.selected_surfaces()}});
}

void rebuild_objects_diagram(Session& s, Scorer& scorer, Clock& clock) {
  if (s.concepts.size() < 2 || s.concepts[0].candidates.empty() ||
      s.concepts[1].candidates.empty()) {
    throw Error(ErrorCode::kPreconditionFailed,
                "the objects diagram needs candidates for two selected concepts");
  }
  s.objects_diagram = scorer.build_diagram(DiagramKind::kObjects, names_of(s.concepts[0]),
                                           names_of(s.concepts[1]));
  log_event(s, clock, "diagram_built",
            {{"kind", "objects"}, {"links", s.objects_diagram->links.size()}});
}

void rebuild_attributes_diagram(Session& s, Scorer& scorer, const std::string& object_a,
                                const std::string& object_b, Clock& clock) {
  const auto* a = s.find_candidate(object_a);
  const auto* b = s.find_candidate(object_b);
  if (!a) throw Error(ErrorCode::kUnknownObject, "unknown object '" + object_a + "'");
  if (!b) throw Error(ErrorCode::kUnknownObject, "unknown object '" + object_b + "'");
  if (a->attributes.empty() || b->attributes.empty()) {
    throw Error(ErrorCode::kPreconditionFailed, "both objects need attributes first");
  }
  s.attributes_diagram = scorer.build_diagram(DiagramKind::kAttributes, a->attributes,
                                              b->attributes);
  s.attribute_objects = {a->name, b->name};
  log_event(s, clock, "diagram_built",
            {{"kind", "attributes"},
             {"objects", {a->name, b->name}},
             {"links", s.attributes_diagram->links.size()}});
}

const ImagePrompt& add_prompt(Session& s, const ImagePrompt& prompt, Clock& clock) {
  for (const auto& p : s.prompts) {
    if (p.id == prompt.id) return p;
  }
  s.prompts.push_back(prompt);
  log_event(s, clock, "prompt", {{"prompt_id", prompt.id}});
  return s.prompts.back();
}

namespace {

struct Coords {
  double x, y;
};

std::optional<Coords> coords_for(const Session& s, const ImagePrompt& p) {
  if (!s.objects_diagram || !s.attributes_diagram || !s.attribute_objects) return std::nullopt;
  auto same = [](const std::string& x, const std::string& y) {
    return normal_form(x) == normal_form(y);
  };
  const auto& [ao, bo] = *s.attribute_objects;
  bool covers = (same(ao, p.pair.object_a) && same(bo, p.pair.object_b)) ||
                (same(ao, p.pair.object_b) && same(bo, p.pair.object_a));
  if (!covers) return std::nullopt;
  const PairScore* obj = s.objects_diagram->find(p.pair.object_a, p.pair.object_b);
  const PairScore* attr = s.attributes_diagram->find(p.pair.attribute_a, p.pair.attribute_b);
  if (!obj || !attr) return std::nullopt;
  return Coords{obj->norm_sim, attr->norm_sim};
}

}  // namespace

CanvasItem place_result(Session& s, const std::string& prompt_id, const ImageArtifact& artifact,
                        Clock& clock) {
  const ImagePrompt* prompt = s.find_prompt(prompt_id);
  if (!prompt) throw Error(ErrorCode::kUnknownPrompt, "unknown prompt '" + prompt_id + "'");

  for (auto& item : s.canvas) {
    if (item.prompt_id != prompt_id) continue;
    item.image_refs.push_back(artifact.id);
    item.count = static_cast<int>(item.image_refs.size());
    s.artifacts[artifact.id] = artifact;
    log_event(s, clock, "generation",
              {{"prompt_id", prompt_id}, {"artifact_id", artifact.id}, {"count", item.count}});
    return item;
  }

  auto c = coords_for(s, *prompt);
  if (!c) {
    throw Error(ErrorCode::kPreconditionFailed,
                "no current diagrams cover the pair " + prompt->pair.object_a + "/" +
                    prompt->pair.object_b);
  }
  CanvasItem item{prompt_id, std::clamp(c->x, 0.0, 1.0), std::clamp(c->y, 0.0, 1.0),
                  {artifact.id}, 1};
  s.canvas.push_back(item);
  s.artifacts[artifact.id] = artifact;
  log_event(s, clock, "generation",
            {{"prompt_id", prompt_id}, {"artifact_id", artifact.id}, {"count", 1}});
  return item;
}

std::optional<std::pair<double, double>> current_coords(const Session& s, const CanvasItem& item) {
  const ImagePrompt* p = s.find_prompt(item.prompt_id);
  if (!p) return std::nullopt;
  auto c = coords_for(s, *p);
  if (!c) return std::nullopt;
  return std::pair{c->x, c->y};
}

void replace_object(Session& s, const std::string& concept_name, const std::string& old_object,
                    const std::string& new_object, Mapper& mapper, Scorer& scorer, Clock& clock) {
  ConceptState* state = s.find_concept(concept_name);
  if (!state) throw Error(ErrorCode::kUnknownConcept, "unknown concept '" + concept_name + "'");
  auto it = std::find_if(state->candidates.begin(), state->candidates.end(),
                         [&](const ObjectCandidate& c) {
                           return normal_form(c.name) == normal_form(old_object);
                         });
  if (it == state->candidates.end()) {
    throw Error(ErrorCode::kUnknownObject,
                "'" + old_object + "' is not a candidate of '" + concept_name + "'");
  }
  if (trim(new_object).empty()) throw Error(ErrorCode::kInvalidArgument, "new object is empty");
  if (normal_form(new_object) == normal_form(old_object)) {
    log_event(s, clock, "warning",
              {{"message", "replacement of '" + it->name + "' with itself ignored"}});
    return;
  }
  if (s.find_candidate(new_object)) {
    throw Error(ErrorCode::kInvalidArgument,
                "'" + new_object + "' is already a candidate in this session");
  }

  // Everything that can fail runs before the session is touched.
  ObjectCandidate fresh = mapper.user_candidate(state->concept_name, new_object, it->iteration);
  std::string old_name = it->name;

  std::optional<AnalysisDiagram> objects;
  std::optional<AnalysisDiagram> attributes;
  std::optional<std::pair<std::string, std::string>> attribute_objects = s.attribute_objects;
  {
    Session scratch = s;
    auto* st = scratch.find_concept(concept_name);
    *std::find_if(st->candidates.begin(), st->candidates.end(), [&](const ObjectCandidate& c) {
      return c.name == old_name;
    }) = fresh;
    if (s.objects_diagram && scratch.concepts.size() >= 2) {
      objects = scorer.build_diagram(DiagramKind::kObjects, names_of(scratch.concepts[0]),
                                     names_of(scratch.concepts[1]));
    }
    if (attribute_objects) {
      auto& [a, b] = *attribute_objects;
      if (normal_form(a) == normal_form(old_name)) a = fresh.name;
      if (normal_form(b) == normal_form(old_name)) b = fresh.name;
      const auto* ca = scratch.find_candidate(a);
      const auto* cb = scratch.find_candidate(b);
      if (ca && cb) {
        attributes = scorer.build_diagram(DiagramKind::kAttributes, ca->attributes, cb->attributes);
      } else {
        attribute_objects.reset();
      }
    }
  }

  *it = fresh;
  state->retired.push_back(old_name);

  nlohmann::json tombstones = nlohmann::json::array();
  std::vector<CanvasItem> kept;
  for (auto& item : s.canvas) {
    const ImagePrompt* p = s.find_prompt(item.prompt_id);
    if (p && prompt_references(*p, old_name)) {
      tombstones.push_back({{"prompt_id", item.prompt_id},
                            {"image_refs", item.image_refs},
                            {"coords", {{"x", item.x}, {"y", item.y}}},
                            {"count", item.count}});
    } else {
      kept.push_back(std::move(item));
    }
  }
  s.canvas = std::move(kept);

  s.objects_diagram = objects;
  s.attributes_diagram = attributes;
  s.attribute_objects = attribute_objects;

  log_event(s, clock, "replacement",
            {{"concept", state->concept_name},
             {"old", old_name},
             {"new", fresh.name},
             {"tombstones", tombstones}});
}

std::vector<HistoryEvent> list_history(const Session& s) { return s.events; }

SessionStore::SessionStore(std::optional<fs::path> dir) : dir_(std::move(dir)) {}

std::optional<fs::path> SessionStore::path_for(const std::string& id) const {
  if (!dir_) return std::nullopt;
  return *dir_ / "sessions" / (id + ".json");
}

std::shared_ptr<SessionSlot> SessionStore::add(Session s) {
  auto slot = std::make_shared<SessionSlot>();
  std::string id = s.id;
  slot->session = std::move(s);
  std::lock_guard lock(mu_);
  sessions_[id] = slot;
  return slot;
}

std::shared_ptr<SessionSlot> SessionStore::get(const std::string& id) {
  std::lock_guard lock(mu_);
  if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  auto path = path_for(id);
  bool valid_id = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
  });
  if (valid_id && path && fs::exists(*path)) {
    auto slot = std::make_shared<SessionSlot>();
    slot->session = load_session(*path);
    sessions_[id] = slot;
    return slot;
  }
  throw Error(ErrorCode::kUnknownSession, "unknown session '" + id + "'");
}

void SessionStore::persist(const Session& s) {
  if (auto path = path_for(s.id)) save_session(s, *path);
}

}  // namespace metablend
