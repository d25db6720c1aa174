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

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "metablend/blend.hpp"
#include "metablend/expression.hpp"
#include "metablend/mapping.hpp"
#include "metablend/oracle.hpp"
#include "metablend/scoring.hpp"
#include "metablend/util.hpp"

namespace metablend {

inline constexpr int kSessionSchemaVersion = 1;

struct CanvasItem {
  std::string prompt_id;
  double x = 0.0;  // objects norm_sim at placement
  double y = 0.0;  // attributes norm_sim at placement
  std::vector<std::string> image_refs;  // artifact ids, oldest first
  int count = 0;
  bool operator==(const CanvasItem&) const = default;
};

struct HistoryEvent {
  long seq = 0;
  std::string at;
  std::string kind;
  nlohmann::json detail;
  bool operator==(const HistoryEvent&) const = default;
};

struct ConceptState {
  std::string concept_name;
  std::vector<ObjectCandidate> candidates;  // all iterations, in order
  std::vector<std::string> retired;         // replaced names, still excluded
  int iterations = 0;
  bool operator==(const ConceptState&) const = default;
};

struct SchemeSet {
  BlendPair pair;
  std::vector<BlendScheme> schemes;
  bool operator==(const SchemeSet&) const = default;
};

struct Session {
  int schema_version = kSessionSchemaVersion;
  std::string id;
  std::string created_at;
  Expression expression;
  std::optional<Theme> theme;
  std::vector<ConceptState> concepts;  // selection order
  std::optional<AnalysisDiagram> objects_diagram;
  std::optional<AnalysisDiagram> attributes_diagram;
  std::optional<std::pair<std::string, std::string>> attribute_objects;
  std::vector<SchemeSet> schemes;
  std::vector<ImagePrompt> prompts;
  std::vector<CanvasItem> canvas;
  std::map<std::string, ImageArtifact> artifacts;
  std::vector<HistoryEvent> events;

  ConceptState* find_concept(const std::string& concept_name);
  const ConceptState* find_concept(const std::string& concept_name) const;
  const ObjectCandidate* find_candidate(const std::string& name) const;
  const ImagePrompt* find_prompt(const std::string& id) const;
  std::vector<ObjectCandidate> all_candidates() const;

  bool operator==(const Session&) const = default;
};

void to_json(nlohmann::json& j, const CanvasItem& c);
void from_json(const nlohmann::json& j, CanvasItem& c);
void to_json(nlohmann::json& j, const HistoryEvent& e);
void from_json(const nlohmann::json& j, HistoryEvent& e);
void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);

// Appends an event stamped by `clock`.
void log_event(Session& s, Clock& clock, const std::string& kind, nlohmann::json detail);

// Parses the expression (kEmptyExpression on blank text). `ordinal` makes
// ids unique within one process: id = "s-" + sha256(text | ordinal)[:12].
Session create_session(const std::string& expression_text, Clock& clock, long ordinal = 1,
                       const PosTagger* tagger = &default_tagger());

// Single JSON document, keys sorted, two-space indent, trailing newline.
std::string session_document(const Session& s);
void save_session(const Session& s, const std::filesystem::path& file);

// kCorruptSessionFile for unreadable or malformed files,
// kUnsupportedSchemaVersion for versions newer than this build. Version 0
// files (no events, no schema_version) are migrated.
Session load_session(const std::filesystem::path& file);
Session session_from_document(const std::string& text);

// Stores the selection on the expression and resets per-concept state for
// concepts no longer selected.
void apply_selection(Session& s, const std::vector<size_t>& picks, Clock& clock);

// Objects diagram across the first two selected concepts' candidates.
void rebuild_objects_diagram(Session& s, Scorer& scorer, Clock& clock);

// Attributes diagram for one object pair (attributes of a x attributes of b).
void rebuild_attributes_diagram(Session& s, Scorer& scorer, const std::string& object_a,
                                const std::string& object_b, Clock& clock);

// Adds the prompt unless one with the same id exists; returns the stored one.
const ImagePrompt& add_prompt(Session& s, const ImagePrompt& prompt, Clock& clock);

// Groups by prompt: appends to the existing item (count + 1, coords kept) or
// creates one at (objects norm_sim, attributes norm_sim) of the prompt's
// pair. kUnknownPrompt; kPreconditionFailed when a diagram for the pair is
// missing.
CanvasItem place_result(Session& s, const std::string& prompt_id, const ImageArtifact& artifact,
                        Clock& clock);

// Current (not frozen) coordinates for an item, when the diagrams still
// cover its pair.
std::optional<std::pair<double, double>> current_coords(const Session& s, const CanvasItem& item);

// Swaps `old_object` for a user-named object: new candidate via `mapper`
// (5 attributes), canvas items whose prompt mentions the old object are
// removed and tombstoned in the event log, diagrams rebuilt. Same name is a
// no-op with a warning event. kUnknownConcept, kUnknownObject.
void replace_object(Session& s, const std::string& concept_name, const std::string& old_object,
                    const std::string& new_object, Mapper& mapper, Scorer& scorer, Clock& clock);

std::vector<HistoryEvent> list_history(const Session& s);

// In-memory session registry with optional on-disk persistence under
// <dir>/sessions/<id>.json. Each slot carries its own lock: writers take it
// exclusively, readers shared.
struct SessionSlot {
  std::shared_mutex mu;
  Session session;
};

class SessionStore {
 public:
  explicit SessionStore(std::optional<std::filesystem::path> dir = std::nullopt);

  std::shared_ptr<SessionSlot> add(Session s);
  // kUnknownSession when neither memory nor disk has it.
  std::shared_ptr<SessionSlot> get(const std::string& id);
  void persist(const Session& s);
  long next_ordinal() { return ++ordinal_; }
  std::optional<std::filesystem::path> path_for(const std::string& id) const;

 private:
  std::optional<std::filesystem::path> dir_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
  std::atomic<long> ordinal_{0};
};

}  // namespace metablend
