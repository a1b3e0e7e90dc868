#include "dialport/task_tree.hpp"

#include <fstream>
#include <functional>
#include <set>

#include "dialport/text.hpp"

namespace dialport::engine {

namespace {

void require_concept(const ontology::Ontology* schema, const TaskNode& node, const std::string& name) {
  if (name.empty()) throw InvalidTree("node '" + node.id + "' needs a concept");
  if (schema && !schema->contains(name))
    throw InvalidTree("node '" + node.id + "' refers to unknown concept '" + name + "'");
}

void check_node(const TaskNode& node, const ontology::Ontology* schema) {
  if (node.id.empty()) throw InvalidTree("node without id");
  if (node.kind == NodeKind::Agent && !node.children.empty())
    throw InvalidTree("agent node '" + node.id + "' has children");
  if (node.kind != NodeKind::Agent && node.children.empty())
    throw InvalidTree(std::string(to_string(node.kind)) + " node '" + node.id + "' has no children");
  for (const auto& child : node.children)
    if (!child) throw InvalidTree("node '" + node.id + "' has a null child");
  const auto& t = node.termination;
  if (t.kind == PredicateKind::AllGrounded || t.kind == PredicateKind::Informed)
    require_concept(schema, node, t.concept_name);
  if (!node.trigger.empty()) require_concept(schema, node, node.trigger);
  if (node.kind != NodeKind::Agent) return;
  const auto& a = node.action;
  switch (a.kind) {
    case PrimitiveKind::Emit:
      break;
    case PrimitiveKind::Ask:
    case PrimitiveKind::Confirm:
      require_concept(schema, node, a.concept_name);
      break;
    case PrimitiveKind::InformFromKnowledge:
      require_concept(schema, node, a.concept_name);
      if (a.knowledge.empty()) throw InvalidTree("node '" + node.id + "' names no knowledge agent");
      for (const auto& [field, concept_name] : a.constraints) require_concept(schema, node, concept_name);
      break;
    case PrimitiveKind::CallRemote:
      require_concept(schema, node, a.concept_name);
      if (schema && schema->concept_named(a.concept_name).pool != ontology::Pool::Remote)
        throw InvalidTree("node '" + node.id + "' calls '" + a.concept_name + "', which is not a remote concept");
      break;
  }
}

}  // namespace

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Agency: return "agency";
    case NodeKind::ChoiceAgency: return "choice_agency";
    case NodeKind::Agent: return "agent";
  }
  return "?";
}

void validate_tree(const TaskNode& root, const ontology::Ontology* schema) {
  std::set<const TaskNode*> done;
  std::set<const TaskNode*> active;
  std::function<void(const TaskNode&)> visit = [&](const TaskNode& node) {
    if (done.count(&node)) return;
    if (!active.insert(&node).second) throw InvalidTree("cycle through node '" + node.id + "'");
    check_node(node, schema);
    for (const auto& child : node.children) visit(*child);
    active.erase(&node);
    done.insert(&node);
  };
  visit(root);
}

TaskTree::TaskTree(std::shared_ptr<const TaskNode> root, std::vector<std::shared_ptr<const TaskNode>> domains,
                   const ontology::Ontology* schema)
    : root_(std::move(root)) {
  if (!root_) throw InvalidTree("tree has no root");
  validate_tree(*root_, schema);
  for (const auto& d : domains) {
    if (!d) throw InvalidTree("null domain subtree");
    if (d->trigger.empty()) throw InvalidTree("domain subtree '" + d->id + "' has no trigger");
    validate_tree(*d, schema);
  }
  std::function<void(const std::shared_ptr<const TaskNode>&)> collect = [&](const std::shared_ptr<const TaskNode>& n) {
    auto [it, fresh] = nodes_.emplace(n->id, n.get());
    if (!fresh) {
      if (it->second != n.get()) throw InvalidTree("two different nodes share the id '" + n->id + "'");
      return;
    }
    if (!n->trigger.empty()) candidates_.push_back(n);
    for (const auto& child : n->children) collect(child);
  };
  collect(root_);
  for (const auto& d : domains) collect(d);
  domains_ = std::move(domains);
}

const TaskNode* TaskTree::find(const std::string& id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : it->second;
}

Termination parse_termination(const std::string& raw) {
  auto s = text::trim(raw);
  if (s == "always") return {PredicateKind::Always, ""};
  if (s == "never" || s.empty()) return {PredicateKind::Never, ""};
  if (s == "remote_ended") return {PredicateKind::RemoteEnded, ""};
  auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')') throw InvalidTree("unknown termination predicate '" + s + "'");
  auto name = text::trim(s.substr(0, open));
  auto arg = text::trim(s.substr(open + 1, s.size() - open - 2));
  if (arg.empty()) throw InvalidTree("termination '" + s + "' needs a concept");
  if (name == "all_grounded") return {PredicateKind::AllGrounded, arg};
  if (name == "informed") return {PredicateKind::Informed, arg};
  throw InvalidTree("unknown termination predicate '" + s + "'");
}

std::string to_string(const Termination& t) {
  switch (t.kind) {
    case PredicateKind::AllGrounded: return "all_grounded(" + t.concept_name + ")";
    case PredicateKind::Informed: return "informed(" + t.concept_name + ")";
    case PredicateKind::RemoteEnded: return "remote_ended";
    case PredicateKind::Always: return "always";
    case PredicateKind::Never: return "never";
  }
  return "?";
}

namespace {

NodeKind kind_from_string(const std::string& s) {
  if (s == "agency") return NodeKind::Agency;
  if (s == "choice_agency") return NodeKind::ChoiceAgency;
  if (s == "agent") return NodeKind::Agent;
  throw InvalidTree("unknown node kind '" + s + "'");
}

Primitive primitive_from_json(const std::string& id, const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidTree("agent '" + id + "' needs an action object");
  Primitive p;
  const auto type = j.value("type", "");
  p.concept_name = j.value("concept", "");
  if (type == "emit") {
    p.kind = PrimitiveKind::Emit;
    auto act = dialog_act_from_string(j.value("act", ""));
    if (!act) throw InvalidTree("agent '" + id + "' emits unknown act '" + j.value("act", "") + "'");
    p.act = *act;
    p.text = j.value("value", "");
    p.value_class = j.value("class", "");
  } else if (type == "ask") {
    p.kind = PrimitiveKind::Ask;
  } else if (type == "inform_from_knowledge") {
    p.kind = PrimitiveKind::InformFromKnowledge;
    p.knowledge = j.value("agent", "");
    const auto constraints = j.value("constraints", nlohmann::json::object());
    for (const auto& [field, concept_name] : constraints.items())
      p.constraints.emplace_back(field, concept_name.get<std::string>());
  } else if (type == "call_remote") {
    p.kind = PrimitiveKind::CallRemote;
  } else if (type == "confirm") {
    p.kind = PrimitiveKind::Confirm;
    const auto strategy = j.value("strategy", "auto");
    if (strategy == "auto") {
      p.strategy = ConfirmStrategy::Auto;
    } else if (strategy == "implicit") {
      p.strategy = ConfirmStrategy::Implicit;
    } else if (strategy == "explicit") {
      p.strategy = ConfirmStrategy::Explicit;
    } else {
      throw InvalidTree("agent '" + id + "' has unknown confirm strategy '" + strategy + "'");
    }
  } else {
    throw InvalidTree("agent '" + id + "' has unknown primitive '" + type + "'");
  }
  return p;
}

}  // namespace

TaskTree tree_from_json(const nlohmann::json& document, const ontology::Ontology* schema) {
  if (!document.is_object() || !document.contains("nodes") || !document.at("nodes").is_array())
    throw InvalidTree("tree document needs a 'nodes' list");
  std::map<std::string, nlohmann::json> specs;
  std::vector<std::string> order;
  for (const auto& item : document.at("nodes")) {
    if (!item.is_object() || !item.contains("id") || !item.at("id").is_string())
      throw InvalidTree("every node needs a string 'id'");
    auto id = item.at("id").get<std::string>();
    if (!specs.emplace(id, item).second) throw InvalidTree("duplicate node id '" + id + "'");
    order.push_back(id);
  }
  const auto root_id = document.value("root", order.empty() ? std::string() : order.front());

  std::map<std::string, std::shared_ptr<TaskNode>> built;
  std::set<std::string> building;
  std::function<std::shared_ptr<TaskNode>(const std::string&)> build = [&](const std::string& id) {
    if (auto it = built.find(id); it != built.end()) return it->second;
    auto spec = specs.find(id);
    if (spec == specs.end()) throw InvalidTree("unknown node '" + id + "'");
    if (!building.insert(id).second) throw InvalidTree("cycle through node '" + id + "'");
    const auto& j = spec->second;
    auto node = std::make_shared<TaskNode>();
    try {
      node->id = id;
      node->kind = kind_from_string(j.value("kind", "agent"));
      node->termination = parse_termination(j.value("termination", "never"));
      node->trigger = j.value("trigger", "");
      const auto children = j.value("children", nlohmann::json::array());
      for (const auto& child : children)
        node->children.push_back(build(child.get<std::string>()));
      if (node->kind == NodeKind::Agent) node->action = primitive_from_json(id, j.value("action", nlohmann::json()));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidTree("node '" + id + "': " + e.what());
    }
    building.erase(id);
    built[id] = node;
    return node;
  };
  auto root = build(root_id);
  std::vector<std::shared_ptr<const TaskNode>> domains;
  try {
    for (const auto& id : document.value("domains", std::vector<std::string>{})) domains.push_back(build(id));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidTree(std::string("'domains' must be a list of node ids: ") + e.what());
  }
  return TaskTree(root, std::move(domains), schema);
}

TaskTree load_tree(const std::filesystem::path& path, const ontology::Ontology* schema) {
  std::ifstream in(path);
  if (!in) throw InvalidTree("cannot open tree file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidTree(path.string() + ": " + e.what());
  }
  return tree_from_json(doc, schema);
}

}  // namespace dialport::engine
