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

#include "metablend/http.hpp"

#include "httplib.h"

#include <thread>

namespace metablend {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string target;  // /path?query
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttplibTransport::send(const HttpRequest& request) {
  auto [origin, target] = split_url(request.url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);

  httplib::Headers headers;
  std::string content_type = "application/json";
  for (const auto& [k, v] : request.headers) {
    if (k == "Content-Type") {
      content_type = v;
    } else {
      headers.emplace(k, v);
    }
  }

  httplib::Result result;
  if (request.method == "GET") {
    result = client.Get(target, headers);
  } else if (request.method == "POST") {
    result = client.Post(target, headers, request.body, content_type);
  } else {
    HttpResponse r;
    r.error = "unsupported method " + request.method;
    return r;
  }

  HttpResponse response;
  if (!result) {
    response.error = httplib::to_string(result.error());
    return response;
  }
  response.status = result->status;
  response.body = result->body;
  for (const auto& [k, v] : result->headers) response.headers[k] = v;
  return response;
}

BoundedTransport::BoundedTransport(std::shared_ptr<HttpTransport> inner,
                                   int max_in_flight)
    : inner_(std::move(inner)), slots_(max_in_flight < 1 ? 1 : max_in_flight) {}

HttpResponse BoundedTransport::send(const HttpRequest& request) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_->send(request);
}

HttpResponse OfflineTransport::send(const HttpRequest& request) {
  ++attempts_;
  HttpResponse r;
  r.error = "offline mode: refused request to " + request.url;
  return r;
}

HttpResponse send_with_retry(HttpTransport& transport, const HttpRequest& request,
                             const RetryPolicy& policy) {
  HttpResponse last;
  int attempts = policy.max_attempts < 1 ? 1 : policy.max_attempts;
  for (int i = 0; i < attempts; ++i) {
    if (i > 0 && policy.backoff.count() > 0) {
      std::this_thread::sleep_for(policy.backoff * (1 << (i - 1)));
    }
    last = transport.send(request);
    bool retryable = last.status == 0 || last.status == 429 || last.status >= 500;
    if (!retryable) break;
  }
  return last;
}

std::string url_encode(const std::string& s) {
  static const char* kHex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xf]);
    }
  }
  return out;
}

}  // namespace metablend
