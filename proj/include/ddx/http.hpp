/*
 * Copyright 2025 The ddxflow Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef DDXFLOW_HTTP_HPP
#define DDXFLOW_HTTP_HPP

#include <map>
#include <memory>
#include <string>

namespace ddx::http {

struct Response {
  int status = 0;
  std::string body;
};

using Headers = std::map<std::string, std::string>;

/// Minimal HTTP client surface so retrieval and live-backend code can be
/// exercised against stub transports in tests.
class Transport {
 public:
  virtual ~Transport() = default;

  /// GET on a full URL (scheme://host[:port]/path?query).
  /// Throws Error(TransportError) when no response could be obtained.
  virtual Response get(const std::string& url, const Headers& headers) = 0;

  /// POST a body to a full URL.
  virtual Response post(const std::string& url, const Headers& headers,
                        const std::string& body, const std::string& content_type) = 0;
};

/// Real transport backed by cpp-httplib.
std::shared_ptr<Transport> make_httplib_transport();

std::string url_encode(const std::string& value);

}  // namespace ddx::http

#endif  // DDXFLOW_HTTP_HPP
