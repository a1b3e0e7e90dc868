#include <httplib.h>

#include <spdlog/spdlog.h>

#include "dialport/agent_server.hpp"
#include "dialport/http_server.hpp"
#include "dialport/knowledge.hpp"
#include "dialport/transport.hpp"

namespace dialport {

namespace {

class HttplibServer final : public protocol::RunningServer {
 public:
  HttplibServer(std::unique_ptr<httplib::Server> server, const std::string& host, int port)
      : server_(std::move(server)) {
    if (port == 0) {
      port_ = server_->bind_to_any_port(host);
    } else {
      port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    if (port_ <= 0) throw protocol::BindFailure("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }

  ~HttplibServer() override { stop(); }

  int port() const override { return port_; }

  void stop() override {
    if (thread_.joinable()) {
      server_->stop();
      thread_.join();
    }
  }

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

void post_route(httplib::Server& server, const std::string& path,
                std::function<protocol::WireResponse(const std::string&, const std::string&)> dispatch) {
  server.Post(path, [path, dispatch](const httplib::Request& req, httplib::Response& res) {
    auto answer = dispatch(path, req.body);
    res.status = answer.status;
    res.set_content(answer.body, "application/json");
  });
}

}  // namespace

std::unique_ptr<protocol::RunningServer> start_http_server(const std::string& host, int port,
                                                           const std::vector<HttpRoute>& routes,
                                                           const std::string& cors_origin) {
  auto server = std::make_unique<httplib::Server>();
  if (!cors_origin.empty()) {
    server->set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                 {"Access-Control-Allow-Headers", "Content-Type"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server->Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }
  for (const auto& route : routes) {
    auto handler = [fn = route.handler](const httplib::Request& req, httplib::Response& res) {
      HttpRequest request{req.method, req.path, req.body, {}};
      for (std::size_t i = 1; i < req.matches.size(); ++i) request.captures.push_back(req.matches[i].str());
      auto answer = fn(request);
      res.status = answer.status;
      res.set_content(answer.body, answer.content_type);
    };
    if (route.method == "GET") {
      server->Get(route.pattern, handler);
    } else {
      server->Post(route.pattern, handler);
    }
  }
  return std::make_unique<HttplibServer>(std::move(server), host, port);
}

namespace protocol {

struct HttpTransport::Impl {
  std::string scheme_host_port;
};

HttpTransport::HttpTransport(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout), impl_(std::make_unique<Impl>()) {
  const std::string scheme = "http://";
  if (endpoint_.rfind(scheme, 0) != 0) throw Unreachable("unsupported endpoint '" + endpoint_ + "'");
  auto slash = endpoint_.find('/', scheme.size());
  impl_->scheme_host_port = endpoint_.substr(0, slash);
  if (slash != std::string::npos) prefix_ = endpoint_.substr(slash);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

HttpTransport::~HttpTransport() = default;

WireResponse HttpTransport::post(const std::string& path, const std::string& body) {
  httplib::Client client(impl_->scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  for (int attempt = 0; attempt < 2; ++attempt) {
    ++attempts_;
    auto result = client.Post(prefix_ + path, body, "application/json");
    if (result) return {result->status, result->body};
    const auto err = result.error();
    if (err == httplib::Error::Connection && attempt == 0) {
      spdlog::warn("connection to {} failed, retrying once", endpoint_);
      continue;
    }
    throw Unreachable(endpoint_ + path + ": " + httplib::to_string(err));
  }
  throw Unreachable(endpoint_ + path + ": connection failed");
}

std::unique_ptr<RunningServer> serve_agent(std::shared_ptr<AgentHandler> handler, const std::string& host, int port,
                                           Clock clock) {
  auto core = std::make_shared<AgentServer>(std::move(handler), std::move(clock));
  auto server = std::make_unique<httplib::Server>();
  auto dispatch = [core](const std::string& path, const std::string& body) { return core->handle(path, body); };
  post_route(*server, "/newcall", dispatch);
  post_route(*server, "/next", dispatch);
  return std::make_unique<HttplibServer>(std::move(server), host, port);
}

std::unique_ptr<RunningServer> serve_knowledge(std::shared_ptr<const KnowledgeAgent> agent, const std::string& host,
                                               int port) {
  auto server = std::make_unique<httplib::Server>();
  post_route(*server, "/query", [agent](const std::string& path, const std::string& body) {
    return handle_knowledge_request(*agent, path, body);
  });
  return std::make_unique<HttplibServer>(std::move(server), host, port);
}

}  // namespace protocol

}  // namespace dialport
