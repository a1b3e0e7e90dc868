#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <string>

namespace dialport::protocol {

struct WireResponse {
  int status = 0;
  std::string body;
};

/// Delivers a JSON body to a path on an agent and returns the raw reply.
/// Throws Unreachable when nothing could be delivered.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual WireResponse post(const std::string& path, const std::string& body) = 0;
  virtual std::string describe() const = 0;
};

/// JSON over HTTP. One retry, and only when the connection itself failed:
/// a request that reached the agent is never sent twice.
class HttpTransport final : public Transport {
 public:
  /// `endpoint` is `http://host:port[/prefix]`.
  explicit HttpTransport(std::string endpoint,
                         std::chrono::milliseconds timeout = std::chrono::seconds(10));
  ~HttpTransport() override;

  WireResponse post(const std::string& path, const std::string& body) override;
  std::string describe() const override { return endpoint_; }

  /// Number of connection attempts made so far (for tests).
  int attempts() const { return attempts_; }

 private:
  struct Impl;
  std::string endpoint_;
  std::string prefix_;
  std::chrono::milliseconds timeout_;
  std::unique_ptr<Impl> impl_;
  std::atomic<int> attempts_{0};
};

/// In-process delivery to a dispatch function, used for `local://` endpoints
/// and tests. The full JSON encoding still happens on both sides.
class LocalTransport final : public Transport {
 public:
  using Dispatch = std::function<WireResponse(const std::string& path, const std::string& body)>;

  LocalTransport(std::string name, Dispatch dispatch)
      : name_(std::move(name)), dispatch_(std::move(dispatch)) {}

  WireResponse post(const std::string& path, const std::string& body) override;
  std::string describe() const override { return "local://" + name_; }

 private:
  std::string name_;
  Dispatch dispatch_;
};

/// Turns a non-200 reply into the matching protocol exception.
[[noreturn]] void raise_for_status(const WireResponse& response);

}  // namespace dialport::protocol
