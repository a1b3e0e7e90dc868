#include "dialport/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

namespace dialport::ontology {

const char* to_string(Pool pool) {
  switch (pool) {
    case Pool::Agent: return "agent";
    case Pool::User: return "user";
    case Pool::Remote: return "remote";
  }
  return "?";
}

const char* to_string(Grounding grounding) {
  switch (grounding) {
    case Grounding::Empty: return "empty";
    case Grounding::Updated: return "updated";
    case Grounding::Grounded: return "grounded";
    case Grounding::Disconfirmed: return "disconfirmed";
  }
  return "?";
}

Pool pool_from_string(const std::string& name) {
  if (name == "agent") return Pool::Agent;
  if (name == "user") return Pool::User;
  if (name == "remote") return Pool::Remote;
  throw OntologyFormatError("unknown pool '" + name + "'");
}

Grounding Concept::grounding() const {
  if (attributes.empty()) return Grounding::Empty;
  bool all_grounded = true;
  bool any_present = false;
  for (const auto& [_, entry] : attributes) {
    if (entry.grounding != Grounding::Empty) any_present = true;
    if (entry.grounding != Grounding::Grounded) all_grounded = false;
  }
  if (all_grounded) return Grounding::Grounded;
  if (!any_present) return Grounding::Empty;
  for (const auto& [_, entry] : attributes)
    if (entry.grounding == Grounding::Disconfirmed) return Grounding::Disconfirmed;
  return Grounding::Updated;
}

void Ontology::add_concept(Concept c) {
  if (contains(c.name)) throw DuplicateName("concept '" + c.name + "' already exists");
  for (const auto& dep : c.dependencies) {
    if (dep == c.name)
      throw CycleIntroduced("concept '" + c.name + "' depends on itself");
  }
  for (const auto& dep : c.dependencies) {
    if (!contains(dep))
      throw UnknownDependency("concept '" + c.name + "' depends on unknown '" + dep + "'");
  }
  if (c.pool == Pool::Remote && c.subscriptions.empty()) {
    for (const auto& domain : c.domains) c.subscriptions.push_back({domain, "", "", kValueKey});
  }
  pools_[c.pool].insert(c.name);
  auto name = c.name;
  concepts_.emplace(std::move(name), std::move(c));
}

bool Ontology::reaches(const std::string& from, const std::string& target) const {
  std::set<std::string> seen;
  std::vector<std::string> todo{from};
  while (!todo.empty()) {
    auto current = todo.back();
    todo.pop_back();
    if (current == target) return true;
    if (!seen.insert(current).second) continue;
    for (const auto& dep : concepts_.at(current).dependencies) todo.push_back(dep);
  }
  return false;
}

void Ontology::add_dependency(const std::string& name, const std::string& dependency) {
  if (!contains(name)) throw UnknownConcept("unknown concept '" + name + "'");
  if (!contains(dependency)) throw UnknownDependency("unknown dependency '" + dependency + "'");
  if (reaches(dependency, name))
    throw CycleIntroduced("'" + name + "' -> '" + dependency + "' closes a dependency cycle");
  auto& deps = mutable_concept(name).dependencies;
  if (std::find(deps.begin(), deps.end(), dependency) == deps.end()) deps.push_back(dependency);
}

const Concept& Ontology::concept_named(const std::string& name) const {
  auto it = concepts_.find(name);
  if (it == concepts_.end()) throw UnknownConcept("unknown concept '" + name + "'");
  return it->second;
}

Concept& Ontology::mutable_concept(const std::string& name) {
  auto it = concepts_.find(name);
  if (it == concepts_.end()) throw UnknownConcept("unknown concept '" + name + "'");
  return it->second;
}

const std::set<std::string>& Ontology::pool(Pool pool) const { return pools_.at(pool); }

std::vector<std::string> Ontology::topological_order() const {
  std::map<std::string, std::size_t> pending;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& [name, c] : concepts_) {
    pending[name] = c.dependencies.size();
    for (const auto& dep : c.dependencies) dependents[dep].push_back(name);
  }
  std::set<std::string> ready;
  for (const auto& [name, n] : pending)
    if (n == 0) ready.insert(name);
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto name = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(name);
    for (const auto& d : dependents[name])
      if (--pending[d] == 0) ready.insert(d);
  }
  return order;
}

std::vector<std::string> Ontology::unmet_dependencies(const std::string& name) const {
  concept_named(name);
  std::map<std::string, int> level;
  std::function<int(const std::string&)> depth = [&](const std::string& n) -> int {
    if (auto it = level.find(n); it != level.end()) return it->second;
    int d = 0;
    for (const auto& dep : concepts_.at(n).dependencies) d = std::max(d, depth(dep) + 1);
    level[n] = d;
    return d;
  };

  std::set<std::string> closure;
  std::vector<std::string> todo(concepts_.at(name).dependencies);
  while (!todo.empty()) {
    auto n = todo.back();
    todo.pop_back();
    if (!closure.insert(n).second) continue;
    for (const auto& dep : concepts_.at(n).dependencies) todo.push_back(dep);
  }

  std::vector<std::pair<int, std::string>> unmet;
  for (const auto& n : closure) {
    if (concepts_.at(n).grounding() != Grounding::Grounded) unmet.emplace_back(depth(n), n);
  }
  std::sort(unmet.begin(), unmet.end());
  std::vector<std::string> out;
  for (auto& [_, n] : unmet) out.push_back(std::move(n));
  return out;
}

namespace {

struct Match {
  std::string value;
  double confidence;
};

std::optional<Match> match(const Subscription& sub, const nlu::SemanticFrame& frame) {
  constexpr double kLabelAcceptance = 0.5;
  std::optional<Match> result;
  if (!sub.domain.empty()) {
    auto top = frame.top_domain();
    if (!top || top->label != sub.domain || top->probability < kLabelAcceptance) return std::nullopt;
    result = Match{top->label, top->probability};
  }
  if (!sub.intent.empty()) {
    auto top = frame.top_intent();
    if (!top || top->label != sub.intent || top->probability < kLabelAcceptance) return std::nullopt;
    result = Match{top->label, top->probability};
  }
  if (!sub.entity_type.empty()) {
    const auto* entity = frame.find_entity(sub.entity_type);
    if (!entity) return std::nullopt;
    result = Match{entity->value, entity->confidence};
  }
  return result;
}

}  // namespace

std::vector<AttributeRef> Ontology::apply_frame(const nlu::SemanticFrame& frame, int turn) {
  std::vector<AttributeRef> touched;
  for (auto& [name, c] : concepts_) {
    std::set<std::string> written;
    for (const auto& sub : c.subscriptions) {
      if (written.count(sub.key)) continue;
      auto m = match(sub, frame);
      if (!m) continue;
      written.insert(sub.key);
      AttributeRef ref{name, sub.key};
      touched.push_back(ref);
      auto& entry = c.attributes[sub.key];
      if (entry.grounding == Grounding::Grounded && entry.value == m->value) continue;
      entry.value = m->value;
      entry.confidence = m->confidence;
      entry.grounding = Grounding::Updated;
      entry.turn_updated = turn;
      entry.revision = ++revision_;
    }
  }
  return touched;
}

std::vector<AttributeRef> Ontology::ungrounded_updated() const {
  std::vector<std::pair<int, AttributeRef>> found;
  for (const auto& name : pool(Pool::User)) {
    for (const auto& [key, entry] : concepts_.at(name).attributes)
      if (entry.grounding == Grounding::Updated) found.push_back({entry.turn_updated, {name, key}});
  }
  std::sort(found.begin(), found.end());
  std::vector<AttributeRef> out;
  for (auto& [_, ref] : found) out.push_back(std::move(ref));
  return out;
}

const AttributeEntry* Ontology::entry(const AttributeRef& ref) const {
  auto it = concepts_.find(ref.concept_name);
  if (it == concepts_.end()) return nullptr;
  auto at = it->second.attributes.find(ref.key);
  return at == it->second.attributes.end() ? nullptr : &at->second;
}

void Ontology::write(const AttributeRef& ref, std::string value, double confidence,
                     Grounding grounding, int turn) {
  auto& entry = mutable_concept(ref.concept_name).attributes[ref.key];
  entry.value = std::move(value);
  entry.confidence = confidence;
  entry.grounding = grounding;
  entry.turn_updated = turn;
  entry.revision = ++revision_;
}

void Ontology::ground(const AttributeRef& ref) {
  auto& attrs = mutable_concept(ref.concept_name).attributes;
  auto it = attrs.find(ref.key);
  if (it == attrs.end() || !it->second.value) return;
  it->second.grounding = Grounding::Grounded;
}

void Ontology::disconfirm(const AttributeRef& ref) {
  auto& attrs = mutable_concept(ref.concept_name).attributes;
  auto it = attrs.find(ref.key);
  if (it == attrs.end() || !it->second.value) return;
  it->second.grounding = Grounding::Disconfirmed;
  it->second.revision = ++revision_;
}

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) return {};
  if (!j.at(field).is_array()) throw OntologyFormatError(std::string("'") + field + "' must be a list");
  return j.at(field).get<std::vector<std::string>>();
}

Subscription subscription_from_json(const nlohmann::json& j) {
  Subscription sub;
  sub.domain = j.value("domain", "");
  sub.intent = j.value("intent", "");
  sub.entity_type = j.value("entity", "");
  sub.key = j.value("key", kValueKey);
  if (sub.domain.empty() && sub.intent.empty() && sub.entity_type.empty())
    throw OntologyFormatError("subscription must name a domain, intent or entity");
  return sub;
}

}  // namespace

Ontology ontology_from_json(const nlohmann::json& document) {
  if (!document.is_object() || !document.contains("concepts") || !document.at("concepts").is_array())
    throw OntologyFormatError("ontology document needs a 'concepts' list");

  std::vector<Concept> pending;
  std::set<std::string> declared;
  for (const auto& item : document.at("concepts")) {
    Concept c;
    try {
      c.name = item.at("name").get<std::string>();
      c.pool = pool_from_string(item.at("pool").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw OntologyFormatError(std::string("concept entry: ") + e.what());
    }
    c.dependencies = string_list(item, "deps");
    for (const auto& s : item.value("subs", nlohmann::json::array())) c.subscriptions.push_back(subscription_from_json(s));
    c.endpoint = item.value("endpoint", "");
    c.domains = string_list(item, "domains");
    if (c.pool == Pool::Remote && (c.endpoint.empty() || c.domains.empty()))
      throw OntologyFormatError("remote concept '" + c.name + "' needs 'endpoint' and 'domains'");
    if (!declared.insert(c.name).second) throw DuplicateName("concept '" + c.name + "' declared twice");
    pending.push_back(std::move(c));
  }

  Ontology ontology;
  while (!pending.empty()) {
    auto ready = std::stable_partition(pending.begin(), pending.end(), [&](const Concept& c) {
      return std::all_of(c.dependencies.begin(), c.dependencies.end(),
                         [&](const std::string& d) { return ontology.contains(d); });
    });
    if (ready == pending.begin()) {
      for (const auto& c : pending)
        for (const auto& d : c.dependencies)
          if (!declared.count(d))
            throw UnknownDependency("concept '" + c.name + "' depends on unknown '" + d + "'");
      throw CycleIntroduced("dependency cycle among: " + pending.front().name);
    }
    for (auto it = pending.begin(); it != ready; ++it) ontology.add_concept(std::move(*it));
    pending.erase(pending.begin(), ready);
  }
  return ontology;
}

Ontology load_ontology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw OntologyFormatError("cannot open ontology file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw OntologyFormatError(path.string() + ": " + e.what());
  }
  return ontology_from_json(doc);
}

}  // namespace dialport::ontology
