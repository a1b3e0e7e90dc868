#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "dialport/error.hpp"
#include "dialport/nlu.hpp"

namespace dialport::ontology {

DIALPORT_DEFINE_ERROR(DuplicateName);
DIALPORT_DEFINE_ERROR(UnknownDependency);
DIALPORT_DEFINE_ERROR(CycleIntroduced);
DIALPORT_DEFINE_ERROR(UnknownConcept);
DIALPORT_DEFINE_ERROR(OntologyFormatError);

enum class Pool { Agent, User, Remote };
enum class Grounding { Empty, Updated, Grounded, Disconfirmed };

const char* to_string(Pool pool);
const char* to_string(Grounding grounding);
Pool pool_from_string(const std::string& name);

inline constexpr const char* kValueKey = "value";

/// A (domain, intent, entity-type) triple; empty components are wildcards.
/// Matches write to `key`.
struct Subscription {
  std::string domain;
  std::string intent;
  std::string entity_type;
  std::string key = kValueKey;
};

struct AttributeEntry {
  std::optional<std::string> value;
  double confidence = 0.0;
  Grounding grounding = Grounding::Empty;
  int turn_updated = 0;
  /// Ontology-wide write counter at the time of the last write.
  std::uint64_t revision = 0;
};

struct Concept {
  std::string name;
  Pool pool = Pool::User;
  std::vector<std::string> dependencies;
  std::vector<Subscription> subscriptions;
  std::map<std::string, AttributeEntry> attributes;
  // RemotePool only.
  std::string endpoint;
  std::vector<std::string> domains;

  /// Empty without attributes; Grounded only when every attribute is.
  Grounding grounding() const;
};

struct AttributeRef {
  std::string concept_name;
  std::string key = kValueKey;

  auto operator<=>(const AttributeRef&) const = default;
};

/// Concepts in three disjoint pools with an acyclic dependency relation.
/// Value type: copying an Ontology gives a fully independent attribute state.
class Ontology {
 public:
  void add_concept(Concept entry);
  /// Adds `dependency` to `name`'s dependency list, refusing to close a cycle.
  void add_dependency(const std::string& name, const std::string& dependency);

  bool contains(const std::string& name) const { return concepts_.count(name) != 0; }
  const Concept& concept_named(const std::string& name) const;
  const std::map<std::string, Concept>& concepts() const { return concepts_; }
  const std::set<std::string>& pool(Pool pool) const;
  std::vector<std::string> topological_order() const;

  /// Transitive dependencies that are not Grounded, prerequisites first and
  /// lexicographic within a level.
  std::vector<std::string> unmet_dependencies(const std::string& name) const;

  /// Writes every subscription match for this frame and returns the touched
  /// attributes in (concept, key) order.
  std::vector<AttributeRef> apply_frame(const nlu::SemanticFrame& frame, int turn);

  /// UserPool entries in state Updated ordered by turn, then name.
  std::vector<AttributeRef> ungrounded_updated() const;

  const AttributeEntry* entry(const AttributeRef& ref) const;
  void write(const AttributeRef& ref, std::string value, double confidence, Grounding grounding,
             int turn);
  void ground(const AttributeRef& ref);
  void disconfirm(const AttributeRef& ref);

  std::uint64_t revision() const { return revision_; }

 private:
  Concept& mutable_concept(const std::string& name);
  bool reaches(const std::string& from, const std::string& target) const;

  std::map<std::string, Concept> concepts_;
  std::map<Pool, std::set<std::string>> pools_{
      {Pool::Agent, {}}, {Pool::User, {}}, {Pool::Remote, {}}};
  std::uint64_t revision_ = 0;
};

/// Reads the deployment document:
/// `{"concepts": [{"name", "pool", "deps", "subs", "endpoint", "domains"}]}`.
/// Concepts may appear in any order.
Ontology ontology_from_json(const nlohmann::json& document);
Ontology load_ontology(const std::filesystem::path& path);

}  // namespace dialport::ontology
