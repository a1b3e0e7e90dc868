#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dialport/protocol.hpp"
#include "dialport/transport.hpp"

namespace dialport::protocol {

struct NextReply {
  std::string reply;
  bool ended = false;
  std::optional<DialogReport> report;
};

/// What a third party implements to expose a text remote agent. The server
/// kit serialises calls per token; different tokens may run concurrently.
class AgentHandler {
 public:
  virtual ~AgentHandler() = default;
  /// Throw AgentRefused to decline the session.
  virtual std::string on_new_call(const std::string& token, const std::string& user_id,
                                  const InitialState& s0) = 0;
  virtual NextReply on_next(const std::string& token, const std::string& utterance) = 0;
};

/// Transport-independent request handling for `/newcall` and `/next`.
class AgentServer {
 public:
  explicit AgentServer(std::shared_ptr<AgentHandler> handler, Clock clock = system_clock_ms);

  WireResponse handle(const std::string& path, const std::string& body);

  std::size_t open_sessions() const;
  /// Turns observed for a live session (empty once it is closed).
  std::vector<ReportTurn> observed_turns(const std::string& token) const;

 private:
  struct Slot {
    std::mutex mutex;
    bool closed = false;
    std::vector<ReportTurn> turns;
  };

  WireResponse new_call(const std::string& body);
  WireResponse next(const std::string& body);
  std::string fresh_token();

  std::shared_ptr<AgentHandler> handler_;
  Clock clock_;
  mutable std::mutex table_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::atomic<std::uint64_t> counter_{0};
  std::uint64_t salt_;
};

/// An HTTP server bound to a port, running on a background thread.
class RunningServer {
 public:
  virtual ~RunningServer() = default;
  virtual int port() const = 0;
  virtual void stop() = 0;
};

/// Serves `/newcall` and `/next` for `handler`. Port 0 picks a free port.
/// Throws BindFailure when the address cannot be bound.
std::unique_ptr<RunningServer> serve_agent(std::shared_ptr<AgentHandler> handler,
                                           const std::string& host, int port,
                                           Clock clock = system_clock_ms);

/// A LocalTransport that dispatches into `server`.
std::shared_ptr<Transport> local_transport(std::string name, std::shared_ptr<AgentServer> server);

}  // namespace dialport::protocol
