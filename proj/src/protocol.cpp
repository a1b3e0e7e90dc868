#include "dialport/protocol.hpp"

#include <chrono>

namespace dialport::protocol {

using nlohmann::json;

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

const char* to_string(Speaker speaker) { return speaker == Speaker::User ? "user" : "system"; }

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Completed: return "completed";
    case Outcome::Abandoned: return "abandoned";
    case Outcome::Error: return "error";
  }
  return "?";
}

const char* to_string(ConstraintOp op) {
  switch (op) {
    case ConstraintOp::Eq: return "eq";
    case ConstraintOp::Contains: return "contains";
    case ConstraintOp::Le: return "le";
    case ConstraintOp::Ge: return "ge";
  }
  return "?";
}

ConstraintOp constraint_op_from_string(const std::string& name) {
  if (name == "eq") return ConstraintOp::Eq;
  if (name == "contains") return ConstraintOp::Contains;
  if (name == "le") return ConstraintOp::Le;
  if (name == "ge") return ConstraintOp::Ge;
  throw ProtocolError("unknown constraint op '" + name + "'");
}

std::vector<std::string> DialogReport::user_texts() const {
  std::vector<std::string> out;
  for (const auto& t : turns)
    if (t.speaker == Speaker::User) out.push_back(t.text);
  return out;
}

namespace {

const json& field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw ProtocolError(std::string("missing field '") + name + "'");
  return j.at(name);
}

std::string string_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

void check_version(const json& j) {
  const auto& v = field(j, "v");
  if (!v.is_number_integer() || v.get<int>() != kWireVersion)
    throw ProtocolError("unsupported protocol version " + v.dump());
}

json versioned(json body) {
  body["v"] = kWireVersion;
  return body;
}

}  // namespace

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
}

json encode(const InitialState& s0) {
  json slots = json::object();
  for (const auto& [name, slot] : s0.known_slots) slots[name] = {{"value", slot.value}, {"conf", slot.confidence}};
  json j = {{"known_slots", slots}};
  if (s0.locale) j["locale"] = *s0.locale;
  return j;
}

InitialState decode_initial_state(const json& j) {
  InitialState s0;
  if (!j.is_object()) throw ProtocolError("s0 must be an object");
  if (j.contains("known_slots")) {
    const auto& slots = j.at("known_slots");
    if (!slots.is_object()) throw ProtocolError("known_slots must be an object");
    for (const auto& [name, slot] : slots.items()) {
      SlotValue value{string_field(slot, "value"), 1.0};
      if (slot.contains("conf")) {
        if (!slot.at("conf").is_number()) throw ProtocolError("slot confidence must be a number");
        value.confidence = slot.at("conf").get<double>();
      }
      if (value.confidence < 0.0 || value.confidence > 1.0)
        throw ProtocolError("slot confidence out of [0, 1] for '" + name + "'");
      s0.known_slots.emplace(name, std::move(value));
    }
  }
  if (j.contains("locale")) s0.locale = string_field(j, "locale");
  return s0;
}

json encode(const DialogReport& report) {
  json turns = json::array();
  for (const auto& t : report.turns)
    turns.push_back({{"speaker", to_string(t.speaker)}, {"text", t.text}, {"timestamp", t.timestamp_ms}});
  return versioned({{"session_token", report.session_token},
                    {"turns", turns},
                    {"outcome", to_string(report.outcome)},
                    {"extras", report.extras}});
}

DialogReport decode_report(const json& j) {
  check_version(j);
  DialogReport report;
  report.session_token = string_field(j, "session_token");
  const auto& turns = field(j, "turns");
  if (!turns.is_array()) throw ProtocolError("report turns must be a list");
  for (const auto& t : turns) {
    ReportTurn turn;
    auto speaker = string_field(t, "speaker");
    if (speaker == "user") {
      turn.speaker = Speaker::User;
    } else if (speaker == "system") {
      turn.speaker = Speaker::System;
    } else {
      throw ProtocolError("unknown speaker '" + speaker + "'");
    }
    turn.text = string_field(t, "text");
    const auto& ts = field(t, "timestamp");
    if (!ts.is_number_integer()) throw ProtocolError("timestamp must be an integer");
    turn.timestamp_ms = ts.get<std::int64_t>();
    report.turns.push_back(std::move(turn));
  }
  auto outcome = string_field(j, "outcome");
  if (outcome == "completed") {
    report.outcome = Outcome::Completed;
  } else if (outcome == "abandoned") {
    report.outcome = Outcome::Abandoned;
  } else if (outcome == "error") {
    report.outcome = Outcome::Error;
  } else {
    throw ProtocolError("unknown outcome '" + outcome + "'");
  }
  report.extras = j.value("extras", json::object());
  return report;
}

json encode(const NewCallRequest& m) { return versioned({{"user_id", m.user_id}, {"s0", encode(m.s0)}}); }

NewCallRequest decode_new_call_request(const json& j) {
  check_version(j);
  NewCallRequest m;
  m.user_id = string_field(j, "user_id");
  m.s0 = j.contains("s0") ? decode_initial_state(j.at("s0")) : InitialState{};
  m.s0.user_id = m.user_id;
  return m;
}

json encode(const NewCallResponse& m) { return versioned({{"token", m.token}, {"reply", m.reply}}); }

NewCallResponse decode_new_call_response(const json& j) {
  check_version(j);
  return {string_field(j, "token"), string_field(j, "reply")};
}

json encode(const NextRequest& m) { return versioned({{"token", m.token}, {"utt", m.utt}}); }

NextRequest decode_next_request(const json& j) {
  check_version(j);
  return {string_field(j, "token"), string_field(j, "utt")};
}

json encode(const NextResponse& m) {
  return versioned({{"reply", m.reply},
                    {"ended", m.ended},
                    {"report", m.report ? encode(*m.report) : json(nullptr)}});
}

NextResponse decode_next_response(const json& j) {
  check_version(j);
  NextResponse m;
  m.reply = string_field(j, "reply");
  const auto& ended = field(j, "ended");
  if (!ended.is_boolean()) throw ProtocolError("'ended' must be a boolean");
  m.ended = ended.get<bool>();
  if (j.contains("report") && !j.at("report").is_null()) m.report = decode_report(j.at("report"));
  return m;
}

json encode(const ErrorResponse& m) { return versioned({{"error", m.code}, {"message", m.message}}); }

ErrorResponse decode_error(const json& j) {
  check_version(j);
  return {string_field(j, "error"), j.value("message", "")};
}

json encode(const QueryRequest& m) {
  json constraints = json::array();
  for (const auto& c : m.constraints)
    constraints.push_back({{"field", c.field}, {"op", to_string(c.op)}, {"value", c.value}});
  return versioned({{"constraints", constraints}});
}

QueryRequest decode_query_request(const json& j) {
  check_version(j);
  QueryRequest m;
  const auto& constraints = field(j, "constraints");
  if (!constraints.is_array()) throw ProtocolError("constraints must be a list");
  for (const auto& c : constraints)
    m.constraints.push_back({string_field(c, "field"), constraint_op_from_string(string_field(c, "op")),
                             string_field(c, "value")});
  return m;
}

json encode(const QueryResponse& m) { return versioned({{"entities", m.entities}}); }

QueryResponse decode_query_response(const json& j) {
  check_version(j);
  const auto& entities = field(j, "entities");
  if (!entities.is_array()) throw ProtocolError("entities must be a list");
  QueryResponse m;
  try {
    m.entities = entities.get<std::vector<KnowledgeEntity>>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("entities must map fields to strings: ") + e.what());
  }
  return m;
}

}  // namespace dialport::protocol
