#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dialport/agent_server.hpp"
#include "dialport/protocol.hpp"
#include "dialport/transport.hpp"

namespace dialport::protocol {

/// Constraints in, matching entities out.
class KnowledgeAgent {
 public:
  virtual ~KnowledgeAgent() = default;
  virtual const std::vector<std::string>& schema() const = 0;
  /// Conjunctive match in the agent's deterministic order. Throws
  /// UnknownField for a constraint on a field outside the schema.
  virtual std::vector<KnowledgeEntity> query(const std::vector<KnowledgeConstraint>& constraints) const = 0;
};

/// eq and contains compare case-insensitively; le and ge compare numerically
/// when both sides parse as numbers and lexicographically otherwise.
bool satisfies(const KnowledgeEntity& entity, const KnowledgeConstraint& constraint);

void check_fields(const std::vector<std::string>& schema, const std::vector<KnowledgeConstraint>& constraints);

/// Rows held in memory, returned in the order given by `before`.
class TableKnowledgeAgent : public KnowledgeAgent {
 public:
  using Order = std::function<bool(const KnowledgeEntity&, const KnowledgeEntity&)>;

  TableKnowledgeAgent(std::vector<std::string> schema, std::vector<KnowledgeEntity> rows, Order before);

  const std::vector<std::string>& schema() const override { return schema_; }
  std::vector<KnowledgeEntity> query(const std::vector<KnowledgeConstraint>& constraints) const override;
  const std::vector<KnowledgeEntity>& rows() const { return rows_; }

 private:
  std::vector<std::string> schema_;
  std::vector<KnowledgeEntity> rows_;
};

/// A knowledge agent behind `POST /query`.
class RemoteKnowledgeAgent final : public KnowledgeAgent {
 public:
  RemoteKnowledgeAgent(std::vector<std::string> schema, std::shared_ptr<Transport> transport);

  const std::vector<std::string>& schema() const override { return schema_; }
  std::vector<KnowledgeEntity> query(const std::vector<KnowledgeConstraint>& constraints) const override;

 private:
  std::vector<std::string> schema_;
  std::shared_ptr<Transport> transport_;
};

/// Validates the fields and runs the query.
std::vector<KnowledgeEntity> knowledge_query(const KnowledgeAgent& agent,
                                             const std::vector<KnowledgeConstraint>& constraints);

/// Server side of `POST /query`.
WireResponse handle_knowledge_request(const KnowledgeAgent& agent, const std::string& path,
                                      const std::string& body);

std::unique_ptr<RunningServer> serve_knowledge(std::shared_ptr<const KnowledgeAgent> agent,
                                               const std::string& host, int port);

}  // namespace dialport::protocol
