// Copyright 2026 The Bracketrank Authors.
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

// HttpTransport backed by cpp-httplib. Kept out of judge.hpp so only the
// translation units that talk to a real service pay for the include. https
// endpoints need CPPHTTPLIB_OPENSSL_SUPPORT defined before inclusion.

#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <utility>

#include "bracketrank/judge.hpp"
#include "httplib.h"

namespace bracketrank {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline SplitUrl SplitEndpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw UsageError("endpoint '" + url + "' needs an http:// or https:// scheme");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline HttpTransport MakeHttplibTransport() {
  return [](const HttpRequest& request) -> HttpResponse {
    const SplitUrl url = SplitEndpoint(request.url);
    httplib::Client client(url.origin);
    const auto seconds =
        std::chrono::duration_cast<std::chrono::seconds>(request.timeout).count();
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
                            request.timeout - std::chrono::seconds(seconds))
                            .count();
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [name, value] : request.headers) {
      if (name == "Content-Type") {
        content_type = value;
      } else {
        headers.emplace(name, value);
      }
    }
    auto result = client.Post(url.path, headers, request.body, content_type);
    if (!result) {
      throw std::runtime_error("request to " + request.url + " failed: " +
                               httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  };
}

}  // namespace bracketrank
