#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dialport/agent_server.hpp"

namespace dialport {

struct HttpRequest {
  std::string method;
  std::string path;
  std::string body;
  /// Regex capture groups from the route pattern.
  std::vector<std::string> captures;
};

struct HttpAnswer {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct HttpRoute {
  std::string method;   // "GET" or "POST"
  std::string pattern;  // httplib regex pattern
  std::function<HttpAnswer(const HttpRequest&)> handler;
};

/// Binds and starts serving on a background thread. An empty `cors_origin`
/// disables CORS headers. Throws protocol::BindFailure.
std::unique_ptr<protocol::RunningServer> start_http_server(const std::string& host, int port,
                                                           const std::vector<HttpRoute>& routes,
                                                           const std::string& cors_origin = "");

}  // namespace dialport
