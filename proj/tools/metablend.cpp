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

// metablend: serve | run | record | lookup | session show

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metablend/service.hpp"
#include "metablend/util.hpp"

#ifndef METABLEND_DEFAULT_FIXTURES
#define METABLEND_DEFAULT_FIXTURES "fixtures"
#endif

namespace fs = std::filesystem;
using namespace metablend;

namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::optional<std::string> env_lookup(const char* name) { return getenv_string(name); }

struct RunArgs {
  std::string expression;
  bool auto_mode = false;
  bool offline = false;
  std::string fixtures;
  std::string out = "metablend-out";
  std::string config;
  std::vector<std::string> concepts;
  std::vector<std::string> replace;
  int schemes = 0;
  int iterations = 1;
};

AutoOptions::Replacement parse_replacement(const std::string& spec) {
  auto first = spec.find(':');
  auto second = first == std::string::npos ? std::string::npos : spec.find(':', first + 1);
  if (second == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                "--replace expects concept:old:new, got '" + spec + "'");
  }
  return {spec.substr(0, first), spec.substr(first + 1, second - first - 1),
          spec.substr(second + 1)};
}

void write_run_outputs(Service& svc, const std::string& id, const fs::path& out) {
  Session s = svc.snapshot(id);
  write_file_atomic(out / "session.json", session_document(s));
  if (s.objects_diagram) {
    write_file_atomic(out / "diagrams" / "objects.json",
                      diagram_to_json(*s.objects_diagram).dump(2) + "\n");
  }
  if (s.attributes_diagram) {
    write_file_atomic(out / "diagrams" / "attributes.json",
                      diagram_to_json(*s.attributes_diagram).dump(2) + "\n");
  }
  write_file_atomic(out / "prompts.json", nlohmann::json(s.prompts).dump(2) + "\n");
}

int do_run(const RunArgs& args, ProviderMode mode) {
  nlohmann::json overrides = nlohmann::json::object();
  overrides["mode"] = provider_mode_name(mode);
  overrides["data_dir"] = args.out;
  if (!args.fixtures.empty()) {
    overrides["fixtures_dir"] = args.fixtures;
  } else if (mode != ProviderMode::kLive) {
    overrides["fixtures_dir"] = METABLEND_DEFAULT_FIXTURES;
  }
  if (args.schemes > 0) overrides["schemes"] = args.schemes;
  std::optional<fs::path> config_file;
  if (!args.config.empty()) config_file = args.config;
  Config config = resolve_config(config_file, env_lookup, overrides);

  auto engine = Engine::build(config);
  auto store = std::make_shared<SessionStore>();
  Service svc(engine, store);

  AutoOptions opts;
  opts.expression = args.expression;
  opts.concepts = args.concepts;
  opts.schemes = config.schemes;
  opts.iterations = args.iterations;
  for (const auto& r : args.replace) opts.replacements.push_back(parse_replacement(r));

  std::string id = svc.run_auto(opts);
  fs::path out = args.out;
  write_run_outputs(svc, id, out);

  Session s = svc.snapshot(id);
  std::cout << "session " << s.id << "\n";
  std::cout << "theme: " << (s.theme ? s.theme->sentence : "") << "\n";
  for (const auto& p : s.prompts) std::cout << "prompt " << p.id << ": " << p.text << "\n";
  for (const auto& item : s.canvas) {
    std::cout << "canvas " << item.prompt_id << " at (" << item.x << ", " << item.y
              << ") count " << item.count << "\n";
  }
  std::cout << "wrote " << (out / "session.json").string() << "\n";
  if (engine->offline && engine->offline->attempts() != 0) {
    throw Error(ErrorCode::kInternal, "offline run attempted network access");
  }
  return 0;
}

int do_serve(int port, const std::string& host, const std::string& config_path, bool offline,
             const std::string& fixtures, const std::string& data_dir) {
  nlohmann::json overrides = nlohmann::json::object();
  if (port >= 0) overrides["port"] = port;
  if (!host.empty()) overrides["host"] = host;
  if (offline) overrides["mode"] = "offline";
  if (!fixtures.empty()) overrides["fixtures_dir"] = fixtures;
  if (!data_dir.empty()) overrides["data_dir"] = data_dir;
  std::optional<fs::path> config_file;
  if (!config_path.empty()) config_file = config_path;
  Config config = resolve_config(config_file, env_lookup, overrides);
  if (config.mode == ProviderMode::kOffline && !config.fixtures_dir) {
    config.fixtures_dir = METABLEND_DEFAULT_FIXTURES;
  }

  auto engine = Engine::build(config);
  auto store = std::make_shared<SessionStore>(config.data_dir);
  auto svc = std::make_shared<Service>(engine, store);
  HttpServer server(svc);
  int bound = server.bind(config.host, config.port);
  if (bound < 0) {
    throw Error(ErrorCode::kInternal,
                "cannot bind " + config.host + ":" + std::to_string(config.port));
  }
  std::cout << "listening on http://" << config.host << ":" << bound << "\n" << std::flush;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

struct LookupArgs {
  std::string seed;
  bool attributes = false;
  int limit = 50;
  bool offline = false;
  bool record = false;
  std::string fixtures;
  std::string config;
};

int do_lookup(const LookupArgs& args) {
  nlohmann::json overrides = nlohmann::json::object();
  ProviderMode mode = args.record    ? ProviderMode::kRecord
                      : args.offline ? ProviderMode::kOffline
                                     : ProviderMode::kLive;
  overrides["mode"] = provider_mode_name(mode);
  if (!args.fixtures.empty()) {
    overrides["fixtures_dir"] = args.fixtures;
  } else if (mode != ProviderMode::kLive) {
    overrides["fixtures_dir"] = METABLEND_DEFAULT_FIXTURES;
  }
  std::optional<fs::path> config_file;
  if (!args.config.empty()) config_file = args.config;
  Config config = resolve_config(config_file, env_lookup, overrides);
  auto engine = Engine::build(config);
  KnowledgeQuery q{args.seed, args.attributes ? KnowledgeKind::kAttributes : KnowledgeKind::kObjects,
                   args.limit};
  if (trim(q.seed).empty()) throw Error(ErrorCode::kInvalidArgument, "seed is empty");
  std::cout << nlohmann::json(engine->knowledge->lookup(q)).dump(2) << "\n";
  return 0;
}

int do_show(const std::string& file, bool as_json) {
  Session s = load_session(file);
  if (as_json) {
    std::cout << session_document(s);
    return 0;
  }
  std::cout << "session " << s.id << " (schema " << s.schema_version << ")\n";
  std::cout << "expression: " << s.expression.raw << "\n";
  std::cout << "theme: " << (s.theme ? s.theme->sentence : "-") << "\n";
  for (const auto& c : s.concepts) {
    std::cout << "concept " << c.concept_name << " (" << c.iterations << " iteration(s))\n";
    for (const auto& cand : c.candidates) {
      std::cout << "  " << cand.name << " [" << join(cand.attributes, ", ") << "]"
                << (cand.user_supplied ? " (user)" : "") << "\n";
    }
    if (!c.retired.empty()) std::cout << "  retired: " << join(c.retired, ", ") << "\n";
  }
  std::cout << "prompts: " << s.prompts.size() << "\n";
  for (const auto& item : s.canvas) {
    std::cout << "canvas " << item.prompt_id << " at (" << item.x << ", " << item.y
              << ") count " << item.count << "\n";
  }
  std::cout << "events:\n";
  for (const auto& e : list_history(s)) {
    std::cout << "  #" << e.seq << " " << e.at << " " << e.kind << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metablend: concept-to-visual-blend ideation engine"};
  app.require_subcommand(1);

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  int port = -1;
  std::string host, serve_config, serve_fixtures, data_dir;
  bool serve_offline = false;
  serve->add_option("--port", port, "Listen port (0 picks a free one)");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--config", serve_config, "JSON config file");
  serve->add_flag("--offline", serve_offline, "Fixture playback, no network");
  serve->add_option("--fixtures", serve_fixtures, "Fixtures directory");
  serve->add_option("--data-dir", data_dir, "Session and image storage");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run the whole pipeline non-interactively");
  run->add_option("--expression", run_args.expression, "Expression text")->required();
  run->add_flag("--auto", run_args.auto_mode, "Pick the top-similarity pair automatically");
  run->add_flag("--offline", run_args.offline, "Fixture playback, no network");
  run->add_option("--fixtures", run_args.fixtures, "Fixtures directory");
  run->add_option("--out", run_args.out, "Output directory");
  run->add_option("--config", run_args.config, "JSON config file");
  run->add_option("--concepts", run_args.concepts, "Concepts to blend (two)")->delimiter(',');
  run->add_option("--replace", run_args.replace, "concept:old:new, applied after generation");
  run->add_option("--schemes", run_args.schemes, "Schemes per pair (1-5)");
  run->add_option("--iterations", run_args.iterations, "Object batches per concept");

  RunArgs rec_args;
  auto* record = app.add_subcommand("record", "Run live and capture fixtures");
  record->add_option("--expression", rec_args.expression, "Expression text")->required();
  record->add_option("--fixtures", rec_args.fixtures, "Fixtures directory to write");
  record->add_option("--out", rec_args.out, "Output directory");
  record->add_option("--config", rec_args.config, "JSON config file");
  record->add_option("--concepts", rec_args.concepts, "Concepts to blend (two)")->delimiter(',');
  record->add_option("--replace", rec_args.replace, "concept:old:new, applied after generation");
  record->add_option("--schemes", rec_args.schemes, "Schemes per pair (1-5)");
  record->add_option("--iterations", rec_args.iterations, "Object batches per concept");

  LookupArgs lookup_args;
  auto* lookup = app.add_subcommand("lookup", "Query the knowledge base");
  lookup->add_option("SEED", lookup_args.seed, "Concept or object")->required();
  lookup->add_flag("--attributes", lookup_args.attributes, "Attribute edges instead of objects");
  lookup->add_option("--limit", lookup_args.limit, "Maximum terms (1-100)");
  lookup->add_flag("--offline", lookup_args.offline, "Fixture playback, no network");
  lookup->add_flag("--record", lookup_args.record, "Write the answer to the fixtures dir");
  lookup->add_option("--fixtures", lookup_args.fixtures, "Fixtures directory");
  lookup->add_option("--config", lookup_args.config, "JSON config file");

  auto* session = app.add_subcommand("session", "Inspect session files");
  session->require_subcommand(1);
  auto* show = session->add_subcommand("show", "Print a session summary");
  std::string show_file;
  bool show_json = false;
  show->add_option("FILE", show_file, "Session file")->required();
  show->add_flag("--json", show_json, "Print the normalized document");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*serve) {
      return do_serve(port, host, serve_config, serve_offline, serve_fixtures, data_dir);
    }
    if (*run) {
      return do_run(run_args, run_args.offline ? ProviderMode::kOffline : ProviderMode::kLive);
    }
    if (*record) return do_run(rec_args, ProviderMode::kRecord);
    if (*lookup) return do_lookup(lookup_args);
    if (*show) return do_show(show_file, show_json);
  } catch (const Error& e) {
    std::cerr << api_error_line(e) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << api_error_line(Error(ErrorCode::kInternal, e.what())) << "\n";
    return 1;
  }
  return 2;
}
