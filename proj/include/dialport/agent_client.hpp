#pragma once

#include <memory>
#include <string>
#include <utility>

#include "dialport/protocol.hpp"
#include "dialport/transport.hpp"

namespace dialport::protocol {

/// Portal-side stub of a text remote agent.
class AgentClient {
 public:
  AgentClient(std::string agent_name, std::string endpoint, std::shared_ptr<Transport> transport);

  /// Opens a session. Returns the handle and the agent's first response.
  std::pair<AgentSession, std::string> new_call(const std::string& user_id, const InitialState& s0);

  /// Sends one user utterance. Updates `session.ended` and `session.report`.
  /// An agent that ends without a report is passed through as-is; callers
  /// decide how to treat the missing report.
  NextResponse next(AgentSession& session, const std::string& utterance);

  const std::string& agent_name() const { return agent_name_; }
  Transport& transport() { return *transport_; }

 private:
  std::string agent_name_;
  std::string endpoint_;
  std::shared_ptr<Transport> transport_;
};

}  // namespace dialport::protocol
