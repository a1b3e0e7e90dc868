#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dialport/dialog_act.hpp"
#include "dialport/error.hpp"
#include "dialport/ontology.hpp"

namespace dialport::engine {

DIALPORT_DEFINE_ERROR(InvalidTree);

enum class NodeKind { Agency, ChoiceAgency, Agent };

enum class PredicateKind { AllGrounded, Informed, RemoteEnded, Always, Never };

/// `all_grounded(c)`, `informed(c)`, `remote_ended`, `always` or `never`.
struct Termination {
  PredicateKind kind = PredicateKind::Never;
  std::string concept_name;
};

enum class PrimitiveKind { Emit, Ask, InformFromKnowledge, CallRemote, Confirm };

enum class ConfirmStrategy { Auto, Implicit, Explicit };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Emit;
  // emit
  DialogAct act = DialogAct::Inform;
  std::string text;
  std::string value_class;
  // ask, inform_from_knowledge, call_remote, confirm
  std::string concept_name;
  // inform_from_knowledge: knowledge agent name and (field, concept) pairs
  std::string knowledge;
  std::vector<std::pair<std::string, std::string>> constraints;
  // confirm
  ConfirmStrategy strategy = ConfirmStrategy::Auto;
};

struct TaskNode {
  std::string id;
  NodeKind kind = NodeKind::Agent;
  std::vector<std::shared_ptr<const TaskNode>> children;
  Termination termination;
  Primitive action;  // meaningful for Agent nodes only
  /// Concept whose update makes this subtree a tree-transformation candidate
  /// (and scores it under a ChoiceAgency). Empty for ordinary nodes.
  std::string trigger;
};

/// An immutable, validated task tree. Shared subtrees are allowed.
class TaskTree {
 public:
  /// Throws InvalidTree when the structure is malformed or, given an
  /// ontology, when a node names a concept it does not define.
  /// `domains` are subtrees pushed only by tree transformation; each needs a
  /// trigger. Triggered nodes inside the root tree are registered as well.
  TaskTree(std::shared_ptr<const TaskNode> root, std::vector<std::shared_ptr<const TaskNode>> domains = {},
           const ontology::Ontology* schema = nullptr);

  const std::shared_ptr<const TaskNode>& root() const { return root_; }
  /// Triggered subtrees in registration order: depth-first through the root
  /// tree, then the domain list.
  const std::vector<std::shared_ptr<const TaskNode>>& candidates() const { return candidates_; }
  const std::vector<std::shared_ptr<const TaskNode>>& domains() const { return domains_; }
  const TaskNode* find(const std::string& id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  std::shared_ptr<const TaskNode> root_;
  std::vector<std::shared_ptr<const TaskNode>> candidates_;
  std::vector<std::shared_ptr<const TaskNode>> domains_;
  std::map<std::string, const TaskNode*> nodes_;
};

/// Validates one node against the structural invariants. Throws InvalidTree.
void validate_tree(const TaskNode& root, const ontology::Ontology* schema = nullptr);

Termination parse_termination(const std::string& text);
std::string to_string(const Termination& termination);
const char* to_string(NodeKind kind);

/// `{"root": id, "domains": [id...], "nodes": [{id, kind, children,
/// termination, action, trigger}]}` with children given as node ids.
TaskTree tree_from_json(const nlohmann::json& document, const ontology::Ontology* schema = nullptr);
TaskTree load_tree(const std::filesystem::path& path, const ontology::Ontology* schema = nullptr);

}  // namespace dialport::engine
