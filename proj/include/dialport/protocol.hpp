#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dialport/error.hpp"

// Wire format for text remote agents (NewCall / Next) and knowledge agents.
// Every message carries "v": 1.
namespace dialport::protocol {

inline constexpr int kWireVersion = 1;

DIALPORT_DEFINE_ERROR(Unreachable);
DIALPORT_DEFINE_ERROR(ProtocolError);
DIALPORT_DEFINE_ERROR(AgentRefused);
DIALPORT_DEFINE_ERROR(SessionUnknown);
DIALPORT_DEFINE_ERROR(UnknownField);
DIALPORT_DEFINE_ERROR(BindFailure);

/// Milliseconds since the Unix epoch.
using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

struct SlotValue {
  std::string value;
  double confidence = 1.0;

  bool operator==(const SlotValue&) const = default;
};

/// s0: what the portal already knows, so the agent can skip those questions.
struct InitialState {
  std::map<std::string, SlotValue> known_slots;
  std::string user_id;
  std::optional<std::string> locale;

  bool operator==(const InitialState&) const = default;
};

enum class Speaker { User, System };
enum class Outcome { Completed, Abandoned, Error };

const char* to_string(Speaker speaker);
const char* to_string(Outcome outcome);

struct ReportTurn {
  Speaker speaker = Speaker::User;
  std::string text;
  std::int64_t timestamp_ms = 0;

  bool operator==(const ReportTurn&) const = default;
};

struct DialogReport {
  std::string session_token;
  std::vector<ReportTurn> turns;
  Outcome outcome = Outcome::Completed;
  nlohmann::json extras = nlohmann::json::object();

  std::vector<std::string> user_texts() const;
  bool operator==(const DialogReport&) const = default;
};

/// Client-side handle on one remote session.
struct AgentSession {
  std::string agent_name;
  std::string endpoint;
  std::string session_token;
  bool ended = false;
  std::optional<DialogReport> report;
};

struct NewCallRequest {
  std::string user_id;
  InitialState s0;

  bool operator==(const NewCallRequest&) const = default;
};

struct NewCallResponse {
  std::string token;
  std::string reply;

  bool operator==(const NewCallResponse&) const = default;
};

struct NextRequest {
  std::string token;
  std::string utt;

  bool operator==(const NextRequest&) const = default;
};

struct NextResponse {
  std::string reply;
  bool ended = false;
  std::optional<DialogReport> report;

  bool operator==(const NextResponse&) const = default;
};

struct ErrorResponse {
  std::string code;
  std::string message;

  bool operator==(const ErrorResponse&) const = default;
};

enum class ConstraintOp { Eq, Contains, Le, Ge };
const char* to_string(ConstraintOp op);
ConstraintOp constraint_op_from_string(const std::string& name);

struct KnowledgeConstraint {
  std::string field;
  ConstraintOp op = ConstraintOp::Eq;
  std::string value;

  bool operator==(const KnowledgeConstraint&) const = default;
};

using KnowledgeEntity = std::map<std::string, std::string>;

struct QueryRequest {
  std::vector<KnowledgeConstraint> constraints;

  bool operator==(const QueryRequest&) const = default;
};

struct QueryResponse {
  std::vector<KnowledgeEntity> entities;

  bool operator==(const QueryResponse&) const = default;
};

// Encoders always stamp "v"; decoders throw ProtocolError on a missing or
// different version, missing fields, or wrong types.
nlohmann::json encode(const InitialState& s0);
nlohmann::json encode(const DialogReport& report);
nlohmann::json encode(const NewCallRequest& m);
nlohmann::json encode(const NewCallResponse& m);
nlohmann::json encode(const NextRequest& m);
nlohmann::json encode(const NextResponse& m);
nlohmann::json encode(const ErrorResponse& m);
nlohmann::json encode(const QueryRequest& m);
nlohmann::json encode(const QueryResponse& m);

InitialState decode_initial_state(const nlohmann::json& j);
DialogReport decode_report(const nlohmann::json& j);
NewCallRequest decode_new_call_request(const nlohmann::json& j);
NewCallResponse decode_new_call_response(const nlohmann::json& j);
NextRequest decode_next_request(const nlohmann::json& j);
NextResponse decode_next_response(const nlohmann::json& j);
ErrorResponse decode_error(const nlohmann::json& j);
QueryRequest decode_query_request(const nlohmann::json& j);
QueryResponse decode_query_response(const nlohmann::json& j);

/// Parses text into JSON, mapping syntax errors to ProtocolError.
nlohmann::json parse_body(const std::string& body);

}  // namespace dialport::protocol
