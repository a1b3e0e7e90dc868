#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dialport/dialog_act.hpp"
#include "dialport/error.hpp"

namespace dialport::nlg {

class MissingTemplate : public Error {
 public:
  MissingTemplate(DialogAct act, const std::string& value_class);
};

DIALPORT_DEFINE_ERROR(UnresolvedSlot);
DIALPORT_DEFINE_ERROR(TemplateFormatError);

/// Surface templates keyed by (act, value-class). The empty value-class is
/// the per-act fallback.
class TemplateSet {
 public:
  using Key = std::pair<DialogAct, std::string>;

  static TemplateSet parse(std::istream& in, const std::string& source = "<memory>");
  static TemplateSet parse_string(const std::string& content);

  void add(DialogAct act, const std::string& value_class, std::string surface);
  /// Exact (act, class) first, then (act, ""); nullptr if neither exists.
  const std::vector<std::string>* lookup(DialogAct act, const std::string& value_class) const;
  const std::map<Key, std::vector<std::string>>& all() const { return templates_; }

 private:
  std::map<Key, std::vector<std::string>> templates_;
};

TemplateSet load_templates(const std::filesystem::path& path);

/// Fills `{slot}` placeholders; `{value}` falls back to the act's plain text.
std::string fill(const std::string& surface, const ActValue& value);

/// Acts rendered in order and joined with single spaces. RELAY and INSTRUCT
/// payloads pass through verbatim. Alternatives are picked from a generator
/// seeded with `seed`, so equal seeds give equal text.
std::string render(const SystemAction& action, const TemplateSet& templates, std::uint64_t seed);

}  // namespace dialport::nlg
