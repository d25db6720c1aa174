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

#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metablend/blend.hpp"
#include "metablend/error.hpp"
#include "metablend/http.hpp"
#include "metablend/knowledge.hpp"
#include "metablend/mapping.hpp"
#include "metablend/oracle.hpp"
#include "metablend/scoring.hpp"
#include "metablend/studio.hpp"

namespace httplib {
class Server;
}

namespace metablend {

struct Config {
  ProviderMode mode = ProviderMode::kLive;
  std::optional<std::filesystem::path> fixtures_dir;
  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path data_dir = "metablend-data";

  std::string oracle_base_url = "https://api.openai.com/v1";
  std::string oracle_api_key;
  std::string oracle_model = "gpt-3.5-turbo";
  std::string image_base_url = "https://api.openai.com/v1";
  std::string image_api_key;
  std::string image_model = "dall-e-3";
  std::string knowledge_base_url = "https://api.conceptnet.io";
  std::string embedding_base_url;  // empty: hash embedding
  std::string embedding_model = "clip-vit-base-patch32";
  std::string sentiment_url;       // empty: bundled lexicon

  std::string host = "127.0.0.1";
  int port = 8080;
  int max_in_flight = 8;
  double temperature = 0.7;
  int max_attempts = 3;
  int schemes = kDefaultSchemeCount;
};

void to_json(nlohmann::json& j, const Config& c);

std::string_view provider_mode_name(ProviderMode mode);
ProviderMode provider_mode_from_name(std::string_view name);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

// Defaults, then the JSON config file, then ORACLE_API_KEY, IMAGE_API_KEY,
// KNOWLEDGE_BASE_URL and CACHE_DIR, then `overrides` (CLI flags, same keys
// as the file). Unknown keys are rejected with kInvalidArgument.
Config resolve_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                      const nlohmann::json& overrides);

// {"error": {"code", "message", "provider_detail"?}}
nlohmann::json api_error_json(const Error& e);
int http_status_for(ErrorCode code);
// One line for stderr: "error: <code>: <message>".
std::string api_error_line(const Error& e);

// Provider graph for one configuration. Offline mode wires fixture
// playback everywhere and an OfflineTransport that refuses (and counts)
// any network attempt.
struct Engine {
  Config config;
  std::shared_ptr<HttpTransport> transport;
  std::shared_ptr<OfflineTransport> offline;  // set in offline mode
  std::shared_ptr<Clock> clock;
  std::shared_ptr<KnowledgeClient> knowledge;
  std::shared_ptr<Oracle> oracle;
  std::shared_ptr<Scorer> scorer;

  static std::shared_ptr<Engine> build(const Config& config,
                                       std::shared_ptr<HttpTransport> transport = nullptr);
};

struct AutoOptions {
  std::string expression;
  std::vector<std::string> concepts;  // empty: first and last noun/adjective
  int schemes = kDefaultSchemeCount;
  int iterations = 1;  // object batches per concept
  struct Replacement {
    std::string concept_name, old_object, new_object;
  };
  std::vector<Replacement> replacements;
};

// Session operations behind both the HTTP API and the CLI. Every method
// takes the session's lock (exclusive for mutations) and persists after a
// mutation when the store has a directory.
class Service {
 public:
  Service(std::shared_ptr<Engine> engine, std::shared_ptr<SessionStore> store);
  ~Service();

  nlohmann::json create_session(const nlohmann::json& body);
  nlohmann::json get_session(const std::string& id);
  nlohmann::json select_concepts(const std::string& id, const nlohmann::json& body);
  nlohmann::json infer_theme(const std::string& id);
  nlohmann::json suggest_objects(const std::string& id, const std::string& concept_name,
                                 const nlohmann::json& body);
  nlohmann::json object_attributes(const std::string& id, const nlohmann::json& body);
  nlohmann::json preview(const std::string& id, const nlohmann::json& body);
  nlohmann::json objects_analysis(const std::string& id);
  nlohmann::json attributes_analysis(const std::string& id, const std::string& pair);
  nlohmann::json schemes(const std::string& id, const nlohmann::json& body);
  nlohmann::json prompts(const std::string& id, const nlohmann::json& body);
  nlohmann::json images(const std::string& id, const nlohmann::json& body);
  nlohmann::json replace(const std::string& id, const nlohmann::json& body);
  nlohmann::json canvas(const std::string& id);
  nlohmann::json history(const std::string& id);
  nlohmann::json plan_multi(const std::string& id, const nlohmann::json& body);

  // Async image generation: returns the job id.
  std::string submit_image_job(const std::string& id, const nlohmann::json& body);
  nlohmann::json job(const std::string& job_id);

  // Path of a stored image by artifact id. kUnknownArtifact.
  std::filesystem::path image_path(const std::string& artifact_id) const;

  // The non-interactive pipeline: the same calls a scripted client makes,
  // in the same order. Returns the session id.
  std::string run_auto(const AutoOptions& options);

  Session snapshot(const std::string& id);
  Engine& engine() { return *engine_; }
  SessionStore& store() { return *store_; }

 private:
  struct Job {
    std::string session_id;
    std::shared_future<nlohmann::json> result;
  };

  Mapper make_mapper(std::vector<std::string>& warnings);
  void flush_warnings(Session& s, const std::vector<std::string>& warnings);
  void ensure_objects_diagram(Session& s);
  void ensure_attributes_diagram(Session& s, const std::string& a, const std::string& b);
  CompleteOptions complete_options() const;

  std::shared_ptr<Engine> engine_;
  std::shared_ptr<SessionStore> store_;
  std::mutex jobs_mu_;
  std::map<std::string, Job> jobs_;
  long job_counter_ = 0;
};

// JSON-over-HTTP front end.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<Service> service);
  ~HttpServer();

  // Binds (port 0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen_after_bind();
  void stop();

 private:
  void routes();

  std::shared_ptr<Service> service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace metablend
