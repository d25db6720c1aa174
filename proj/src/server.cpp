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

#include <httplib.h>

#include "metablend/service.hpp"
#include "metablend/util.hpp"

namespace metablend {

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (trim(req.body).empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_json(res, http_status_for(e.code()), api_error_json(e));
  } catch (const nlohmann::json::exception& e) {
    send_json(res, 400, api_error_json(Error(ErrorCode::kInvalidArgument, e.what())));
  } catch (const std::exception& e) {
    send_json(res, 500, api_error_json(Error(ErrorCode::kInternal, e.what())));
  }
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<Service> service)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

void HttpServer::routes() {
  auto& srv = *server_;
  auto svc = service_;
  const std::string sid = "/sessions/([A-Za-z0-9_-]+)";

  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  srv.Post("/sessions", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, svc->create_session(parse_body(req))); });
  });

  srv.Get(sid, [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->get_session(req.matches[1])); });
  });

  srv.Post(sid + "/concepts", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->select_concepts(req.matches[1], parse_body(req))); });
  });

  srv.Post(sid + "/theme", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->infer_theme(req.matches[1])); });
  });

  srv.Post(sid + "/concepts/([^/]+)/objects",
           [svc](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               send_json(res, 200,
                         svc->suggest_objects(req.matches[1], req.matches[2], parse_body(req)));
             });
           });

  srv.Post(sid + "/objects/attributes", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res,
            [&] { send_json(res, 200, svc->object_attributes(req.matches[1], parse_body(req))); });
  });

  srv.Post(sid + "/objects/preview", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->preview(req.matches[1], parse_body(req))); });
  });

  srv.Post(sid + "/objects/replace", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->replace(req.matches[1], parse_body(req))); });
  });

  srv.Get(sid + "/analysis/objects", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->objects_analysis(req.matches[1])); });
  });

  srv.Get(sid + "/analysis/attributes", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("pair")) {
        throw Error(ErrorCode::kInvalidArgument, "missing query parameter 'pair'");
      }
      send_json(res, 200, svc->attributes_analysis(req.matches[1], req.get_param_value("pair")));
    });
  });

  srv.Post(sid + "/schemes", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->schemes(req.matches[1], parse_body(req))); });
  });

  srv.Post(sid + "/prompts", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->prompts(req.matches[1], parse_body(req))); });
  });

  srv.Post(sid + "/images", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = parse_body(req);
      bool async = (req.has_param("async") && req.get_param_value("async") != "0") ||
                   (body.is_object() && body.value("async", false));
      if (async) {
        std::string job = svc->submit_image_job(req.matches[1], body);
        res.set_header("Location", "/jobs/" + job);
        send_json(res, 202, {{"job_id", job}, {"status_url", "/jobs/" + job}});
        return;
      }
      send_json(res, 200, svc->images(req.matches[1], body));
    });
  });

  srv.Get("/jobs/([A-Za-z0-9_-]+)", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->job(req.matches[1])); });
  });

  srv.Get(sid + "/canvas", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->canvas(req.matches[1])); });
  });

  srv.Get(sid + "/history", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->history(req.matches[1])); });
  });

  srv.Post(sid + "/plan-multi", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, svc->plan_multi(req.matches[1], parse_body(req))); });
  });

  srv.Get("/images/([A-Za-z0-9_-]+)", [svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto path = svc->image_path(req.matches[1]);
      std::string ext = path.extension().string();
      std::string type = ext == ".jpg" || ext == ".jpeg" ? "image/jpeg"
                         : ext == ".webp"                 ? "image/webp"
                                                          : "image/png";
      res.status = 200;
      res.set_content(read_file(path), type);
    });
  });
}

}  // namespace metablend
