#include "dialport/nlg.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "dialport/text.hpp"

namespace dialport::nlg {

MissingTemplate::MissingTemplate(DialogAct act, const std::string& value_class)
    : Error("MissingTemplate", std::string("no template for ") + to_string(act) +
                                   (value_class.empty() ? "" : ":" + value_class)) {}

void TemplateSet::add(DialogAct act, const std::string& value_class, std::string surface) {
  templates_[{act, value_class}].push_back(std::move(surface));
}

const std::vector<std::string>* TemplateSet::lookup(DialogAct act, const std::string& value_class) const {
  if (auto it = templates_.find({act, value_class}); it != templates_.end()) return &it->second;
  if (auto it = templates_.find({act, ""}); it != templates_.end()) return &it->second;
  return nullptr;
}

TemplateSet TemplateSet::parse(std::istream& in, const std::string& source) {
  TemplateSet set;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto arrow = line.find("=>");
    auto where = source + ":" + std::to_string(line_no) + ": ";
    if (arrow == std::string::npos) throw TemplateFormatError(where + "expected 'ACT[:CLASS] => text'");
    auto head = text::trim(line.substr(0, arrow));
    auto body = text::trim(line.substr(arrow + 2));
    std::string value_class;
    if (auto colon = head.find(':'); colon != std::string::npos) {
      value_class = text::trim(head.substr(colon + 1));
      head = text::trim(head.substr(0, colon));
    }
    auto act = dialog_act_from_string(head);
    if (!act) throw TemplateFormatError(where + "unknown dialog act '" + head + "'");
    if (body.empty()) throw TemplateFormatError(where + "empty template");
    set.add(*act, value_class, body);
  }
  return set;
}

TemplateSet TemplateSet::parse_string(const std::string& content) {
  std::istringstream in(content);
  return parse(in);
}

TemplateSet load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TemplateFormatError("cannot open template file " + path.string());
  return TemplateSet::parse(in, path.string());
}

std::string fill(const std::string& surface, const ActValue& value) {
  std::string out;
  std::size_t i = 0;
  while (i < surface.size()) {
    if (surface[i] != '{') {
      out += surface[i++];
      continue;
    }
    auto close = surface.find('}', i);
    if (close == std::string::npos) throw UnresolvedSlot("unterminated placeholder in '" + surface + "'");
    auto slot = surface.substr(i + 1, close - i - 1);
    if (auto it = value.slots.find(slot); it != value.slots.end()) {
      out += it->second;
    } else if (slot == "value") {
      out += value.text;
    } else {
      throw UnresolvedSlot("placeholder {" + slot + "} has no value in '" + surface + "'");
    }
    i = close + 1;
  }
  return out;
}

std::string render(const SystemAction& action, const TemplateSet& templates, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string out;
  for (const auto& [act, value] : action.acts) {
    const auto draw = rng();
    std::string piece;
    if (act == DialogAct::Relay || act == DialogAct::Instruct) {
      piece = value.text;
    } else {
      const auto* options = templates.lookup(act, value.value_class);
      if (!options || options->empty()) throw MissingTemplate(act, value.value_class);
      piece = fill((*options)[draw % options->size()], value);
    }
    if (piece.empty()) continue;
    if (!out.empty()) out += ' ';
    out += piece;
  }
  return out;
}

}  // namespace dialport::nlg
