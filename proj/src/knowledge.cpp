#include "dialport/knowledge.hpp"

#include <algorithm>
#include <charconv>

#include "dialport/text.hpp"

namespace dialport::protocol {

namespace {

std::optional<double> as_number(const std::string& s) {
  auto trimmed = text::trim(s);
  if (trimmed.empty()) return std::nullopt;
  double value = 0;
  auto [ptr, ec] = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  if (ec != std::errc() || ptr != trimmed.data() + trimmed.size()) return std::nullopt;
  return value;
}

}  // namespace

bool satisfies(const KnowledgeEntity& entity, const KnowledgeConstraint& constraint) {
  auto it = entity.find(constraint.field);
  if (it == entity.end()) return false;
  const auto& actual = it->second;
  switch (constraint.op) {
    case ConstraintOp::Eq:
      return text::iequals(actual, constraint.value);
    case ConstraintOp::Contains:
      return text::to_lower(actual).find(text::to_lower(constraint.value)) != std::string::npos;
    case ConstraintOp::Le:
    case ConstraintOp::Ge: {
      auto a = as_number(actual);
      auto b = as_number(constraint.value);
      int cmp = 0;
      if (a && b) {
        cmp = *a < *b ? -1 : (*a > *b ? 1 : 0);
      } else {
        cmp = actual.compare(constraint.value);
      }
      return constraint.op == ConstraintOp::Le ? cmp <= 0 : cmp >= 0;
    }
  }
  return false;
}

void check_fields(const std::vector<std::string>& schema, const std::vector<KnowledgeConstraint>& constraints) {
  for (const auto& c : constraints) {
    if (std::find(schema.begin(), schema.end(), c.field) == schema.end())
      throw UnknownField("field '" + c.field + "' is not in the agent schema");
  }
}

TableKnowledgeAgent::TableKnowledgeAgent(std::vector<std::string> schema, std::vector<KnowledgeEntity> rows,
                                         Order before)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
  std::stable_sort(rows_.begin(), rows_.end(), before);
}

std::vector<KnowledgeEntity> TableKnowledgeAgent::query(const std::vector<KnowledgeConstraint>& constraints) const {
  check_fields(schema_, constraints);
  std::vector<KnowledgeEntity> out;
  for (const auto& row : rows_) {
    if (std::all_of(constraints.begin(), constraints.end(),
                    [&](const KnowledgeConstraint& c) { return satisfies(row, c); }))
      out.push_back(row);
  }
  return out;
}

RemoteKnowledgeAgent::RemoteKnowledgeAgent(std::vector<std::string> schema, std::shared_ptr<Transport> transport)
    : schema_(std::move(schema)), transport_(std::move(transport)) {}

std::vector<KnowledgeEntity> RemoteKnowledgeAgent::query(const std::vector<KnowledgeConstraint>& constraints) const {
  check_fields(schema_, constraints);
  auto response = transport_->post("/query", encode(QueryRequest{constraints}).dump());
  if (response.status != 200) raise_for_status(response);
  return decode_query_response(parse_body(response.body)).entities;
}

std::vector<KnowledgeEntity> knowledge_query(const KnowledgeAgent& agent,
                                             const std::vector<KnowledgeConstraint>& constraints) {
  check_fields(agent.schema(), constraints);
  return agent.query(constraints);
}

WireResponse handle_knowledge_request(const KnowledgeAgent& agent, const std::string& path, const std::string& body) {
  auto fail = [](int status, const std::string& code, const std::string& message) {
    return WireResponse{status, encode(ErrorResponse{code, message}).dump()};
  };
  if (path != "/query") return fail(404, "NotFound", "no such endpoint " + path);
  try {
    auto request = decode_query_request(parse_body(body));
    return {200, encode(QueryResponse{knowledge_query(agent, request.constraints)}).dump()};
  } catch (const UnknownField& e) {
    return fail(400, "UnknownField", e.what());
  } catch (const ProtocolError& e) {
    return fail(400, "ProtocolError", e.what());
  }
}

}  // namespace dialport::protocol
