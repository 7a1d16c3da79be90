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
#include "ddx/http.hpp"

#include <cstdio>

#include <httplib.h>

#include "ddx/errors.hpp"

namespace ddx::http {

namespace {

struct SplitUrl {
  std::string origin;        // scheme://host[:port]
  std::string path_query;    // /path?query
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::TransportError, "URL without scheme: " + url);
  }
  auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) {
    return SplitUrl{url, "/"};
  }
  return SplitUrl{url.substr(0, path_begin), url.substr(path_begin)};
}

httplib::Headers to_httplib(const Headers& headers) {
  httplib::Headers out;
  for (const auto& [k, v] : headers) out.emplace(k, v);
  return out;
}

class HttplibTransport : public Transport {
 public:
  Response get(const std::string& url, const Headers& headers) override {
    const SplitUrl parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    client.set_follow_location(true);
    auto result = client.Get(parts.path_query, to_httplib(headers));
    return convert(result, url);
  }

  Response post(const std::string& url, const Headers& headers,
                const std::string& body, const std::string& content_type) override {
    const SplitUrl parts = split_url(url);
    httplib::Client client(parts.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    auto result = client.Post(parts.path_query, to_httplib(headers), body, content_type);
    return convert(result, url);
  }

 private:
  static Response convert(const httplib::Result& result, const std::string& url) {
    if (!result) {
      throw Error(ErrorCode::TransportError,
                  "request to " + url + " failed: " + httplib::to_string(result.error()));
    }
    return Response{result->status, result->body};
  }
};

}  // namespace

std::shared_ptr<Transport> make_httplib_transport() {
  return std::make_shared<HttplibTransport>();
}

std::string url_encode(const std::string& value) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  out.reserve(value.size() * 3);
  for (unsigned char c : value) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
        c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else if (c == ' ') {
      out.push_back('+');
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0x0F]);
    }
  }
  return out;
}

}  // namespace ddx::http
