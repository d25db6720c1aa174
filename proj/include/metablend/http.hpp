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
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <semaphore>
#include <string>

namespace metablend {

struct HttpRequest {
  std::string method = "GET";
  std::string url;  // absolute: scheme://host[:port]/path?query
  std::map<std::string, std::string> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;  // 0 = transport failure (connection refused, timeout)
  std::map<std::string, std::string> headers;
  std::string body;
  std::string error;  // transport error text when status == 0
};

// Outbound HTTP. Every provider that talks to the network goes through one
// of these, which is what makes offline runs checkable.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

// cpp-httplib backed transport.
class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(60))
      : timeout_(timeout) {}
  HttpResponse send(const HttpRequest& request) override;

 private:
  std::chrono::seconds timeout_;
};

// Caps concurrent in-flight requests across every provider sharing it.
class BoundedTransport : public HttpTransport {
 public:
  BoundedTransport(std::shared_ptr<HttpTransport> inner, int max_in_flight);
  HttpResponse send(const HttpRequest& request) override;

 private:
  std::shared_ptr<HttpTransport> inner_;
  std::counting_semaphore<1024> slots_;
};

// Refuses every request. Installed in offline mode; `attempts()` lets tests
// assert that nothing tried to reach the network.
class OfflineTransport : public HttpTransport {
 public:
  HttpResponse send(const HttpRequest& request) override;
  long attempts() const { return attempts_.load(); }

 private:
  std::atomic<long> attempts_{0};
};

// Test double: routes every request to a handler.
class FunctionTransport : public HttpTransport {
 public:
  using Handler = std::function<HttpResponse(const HttpRequest&)>;
  explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}
  HttpResponse send(const HttpRequest& request) override {
    ++calls_;
    return handler_(request);
  }
  long calls() const { return calls_.load(); }

 private:
  Handler handler_;
  std::atomic<long> calls_{0};
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{250};
};

// Sends with retries on transport failures, 429 and 5xx. Returns the last
// response; the caller decides how to surface a failure.
HttpResponse send_with_retry(HttpTransport& transport, const HttpRequest& request,
                             const RetryPolicy& policy);

// Percent-encodes a path segment or query value.
std::string url_encode(const std::string& s);

}  // namespace metablend
