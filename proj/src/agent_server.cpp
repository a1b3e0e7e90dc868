#include "dialport/agent_server.hpp"

#include <iomanip>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dialport/agent_client.hpp"

namespace dialport::protocol {

namespace {

WireResponse reply(int status, const nlohmann::json& body) { return {status, body.dump()}; }

WireResponse error_reply(int status, const std::string& code, const std::string& message) {
  return reply(status, encode(ErrorResponse{code, message}));
}

}  // namespace

WireResponse LocalTransport::post(const std::string& path, const std::string& body) {
  if (!dispatch_) throw Unreachable("local agent '" + name_ + "' has no dispatcher");
  return dispatch_(path, body);
}

void raise_for_status(const WireResponse& response) {
  std::optional<ErrorResponse> err;
  try {
    err = decode_error(parse_body(response.body));
  } catch (const Error&) {
  }
  const std::string detail = err ? err->message : response.body;
  if (err) {
    if (err->code == "SessionUnknown") throw SessionUnknown(detail);
    if (err->code == "AgentRefused") throw AgentRefused(detail);
    if (err->code == "UnknownField") throw UnknownField(detail);
    throw ProtocolError(err->code + ": " + detail);
  }
  if (response.status == 404) throw SessionUnknown(detail);
  if (response.status == 403) throw AgentRefused(detail);
  throw ProtocolError("agent replied with status " + std::to_string(response.status) + ": " + detail);
}

AgentClient::AgentClient(std::string agent_name, std::string endpoint, std::shared_ptr<Transport> transport)
    : agent_name_(std::move(agent_name)), endpoint_(std::move(endpoint)), transport_(std::move(transport)) {}

std::pair<AgentSession, std::string> AgentClient::new_call(const std::string& user_id, const InitialState& s0) {
  auto response = transport_->post("/newcall", encode(NewCallRequest{user_id, s0}).dump());
  if (response.status != 200) raise_for_status(response);
  auto decoded = decode_new_call_response(parse_body(response.body));
  if (decoded.token.empty()) throw ProtocolError("agent returned an empty session token");
  AgentSession session{agent_name_, endpoint_, decoded.token, false, std::nullopt};
  return {std::move(session), std::move(decoded.reply)};
}

NextResponse AgentClient::next(AgentSession& session, const std::string& utterance) {
  auto response = transport_->post("/next", encode(NextRequest{session.session_token, utterance}).dump());
  if (response.status != 200) raise_for_status(response);
  auto decoded = decode_next_response(parse_body(response.body));
  if (decoded.ended) {
    session.ended = true;
    session.report = decoded.report;
  }
  return decoded;
}

AgentServer::AgentServer(std::shared_ptr<AgentHandler> handler, Clock clock)
    : handler_(std::move(handler)), clock_(std::move(clock)), salt_(std::random_device{}()) {}

std::string AgentServer::fresh_token() {
  std::ostringstream out;
  out << "tok-" << std::hex << std::setw(8) << std::setfill('0') << (salt_ & 0xffffffffu) << '-' << std::dec
      << ++counter_;
  return out.str();
}

std::size_t AgentServer::open_sessions() const {
  std::lock_guard lock(table_mutex_);
  return sessions_.size();
}

std::vector<ReportTurn> AgentServer::observed_turns(const std::string& token) const {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(table_mutex_);
    auto it = sessions_.find(token);
    if (it == sessions_.end()) return {};
    slot = it->second;
  }
  std::lock_guard lock(slot->mutex);
  return slot->turns;
}

WireResponse AgentServer::handle(const std::string& path, const std::string& body) {
  try {
    if (path == "/newcall") return new_call(body);
    if (path == "/next") return next(body);
    return error_reply(404, "NotFound", "no such endpoint " + path);
  } catch (const ProtocolError& e) {
    return error_reply(400, "ProtocolError", e.what());
  } catch (const AgentRefused& e) {
    return error_reply(403, "AgentRefused", e.what());
  } catch (const std::exception& e) {
    spdlog::error("agent handler failed: {}", e.what());
    return error_reply(500, "InternalError", e.what());
  }
}

WireResponse AgentServer::new_call(const std::string& body) {
  auto request = decode_new_call_request(parse_body(body));
  auto token = fresh_token();
  auto slot = std::make_shared<Slot>();
  std::lock_guard slot_lock(slot->mutex);
  {
    std::lock_guard lock(table_mutex_);
    sessions_.emplace(token, slot);
  }
  std::string first;
  try {
    first = handler_->on_new_call(token, request.user_id, request.s0);
  } catch (...) {
    std::lock_guard lock(table_mutex_);
    sessions_.erase(token);
    throw;
  }
  slot->turns.push_back({Speaker::System, first, clock_()});
  return reply(200, encode(NewCallResponse{token, first}));
}

WireResponse AgentServer::next(const std::string& body) {
  auto request = decode_next_request(parse_body(body));
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(table_mutex_);
    auto it = sessions_.find(request.token);
    if (it != sessions_.end()) slot = it->second;
  }
  if (!slot) return error_reply(404, "SessionUnknown", "unknown or closed session '" + request.token + "'");

  std::lock_guard slot_lock(slot->mutex);
  if (slot->closed) return error_reply(404, "SessionUnknown", "session '" + request.token + "' is closed");

  slot->turns.push_back({Speaker::User, request.utt, clock_()});
  auto answer = handler_->on_next(request.token, request.utt);
  slot->turns.push_back({Speaker::System, answer.reply, clock_()});

  NextResponse response{answer.reply, answer.ended, std::nullopt};
  if (answer.ended) {
    if (answer.report) {
      response.report = std::move(answer.report);
    } else {
      spdlog::warn("agent ended session {} without a dialog report; substituting one", request.token);
      DialogReport substitute;
      substitute.session_token = request.token;
      substitute.turns = slot->turns;
      substitute.outcome = Outcome::Error;
      substitute.extras = {{"substituted", true}};
      response.report = std::move(substitute);
    }
    slot->closed = true;
    std::lock_guard lock(table_mutex_);
    sessions_.erase(request.token);
  }
  return reply(200, encode(response));
}

std::shared_ptr<Transport> local_transport(std::string name, std::shared_ptr<AgentServer> server) {
  return std::make_shared<LocalTransport>(
      std::move(name), [server = std::move(server)](const std::string& path, const std::string& body) {
        return server->handle(path, body);
      });
}

}  // namespace dialport::protocol
