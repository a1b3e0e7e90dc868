#include "dialport/nlu.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dialport/text.hpp"

namespace dialport::nlu {

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& message)
    : Error("ParseError", source + ":" + std::to_string(line) + ": " + message), line_(line) {}

InvalidWeight::InvalidWeight(const std::string& source, std::size_t line, double weight)
    : Error("InvalidWeight", source + ":" + std::to_string(line) +
                                 ": weight must be positive, got " + std::to_string(weight)),
      line_(line) {}

std::optional<Scored> argmax(const std::map<std::string, double>& distribution) {
  std::optional<Scored> best;
  // Ties go to the first label in map order.
  for (const auto& [label, p] : distribution) {
    if (!best || p > best->probability) best = Scored{label, p};
  }
  return best;
}

std::optional<Scored> SemanticFrame::top_domain() const { return argmax(domains); }
std::optional<Scored> SemanticFrame::top_intent() const { return argmax(intents); }

const Entity* SemanticFrame::find_entity(std::string_view entity_type) const {
  const Entity* found = nullptr;
  for (const auto& e : entities) {
    if (e.entity_type == entity_type && (!found || e.span_begin < found->span_begin)) found = &e;
  }
  return found;
}

void to_json(nlohmann::json& j, const Entity& e) {
  j = {{"type", e.entity_type},
       {"value", e.value},
       {"conf", e.confidence},
       {"span", {e.span_begin, e.span_end}}};
}

void from_json(const nlohmann::json& j, Entity& e) {
  e.entity_type = j.at("type").get<std::string>();
  e.value = j.at("value").get<std::string>();
  e.confidence = j.value("conf", 1.0);
  if (j.contains("span")) {
    e.span_begin = j.at("span").at(0).get<std::size_t>();
    e.span_end = j.at("span").at(1).get<std::size_t>();
  }
}

void to_json(nlohmann::json& j, const SemanticFrame& f) {
  j = {{"utterance", f.utterance},
       {"domains", f.domains},
       {"intents", f.intents},
       {"entities", f.entities}};
}

void from_json(const nlohmann::json& j, SemanticFrame& f) {
  f.utterance = j.at("utterance").get<std::string>();
  f.domains = j.value("domains", std::map<std::string, double>{});
  f.intents = j.value("intents", std::map<std::string, double>{});
  f.entities = j.value("entities", std::vector<Entity>{});
}

namespace {

double parse_number(const std::string& source, std::size_t line, const std::string& raw) {
  std::size_t consumed = 0;
  double value = 0;
  try {
    value = std::stod(raw, &consumed);
  } catch (const std::exception&) {
    throw ParseError(source, line, "expected a number, got '" + raw + "'");
  }
  if (consumed != raw.size()) throw ParseError(source, line, "trailing characters in '" + raw + "'");
  return value;
}

void remember_label(std::vector<std::string>& labels, const std::string& label) {
  for (const auto& l : labels)
    if (l == label) return;
  labels.push_back(label);
}

}  // namespace

Lexicon Lexicon::parse(std::istream& in, const std::string& source) {
  Lexicon lex;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;

    auto arrow = line.find("->");
    if (text::starts_with(line, "entity ") && arrow == std::string::npos) {
      auto colon = line.find(':');
      if (colon == std::string::npos) throw ParseError(source, line_no, "gazetteer line needs ':'");
      auto head = text::trim(std::string_view(line).substr(7, colon - 7));
      GazetteerEntry proto;
      // Optional per-line confidence: `entity TYPE@0.7: ...`
      if (auto at = head.find('@'); at != std::string::npos) {
        proto.confidence = parse_number(source, line_no, text::trim(head.substr(at + 1)));
        if (!(proto.confidence > 0.0 && proto.confidence <= 1.0))
          throw ParseError(source, line_no, "entity confidence must be in (0, 1]");
        head = text::trim(head.substr(0, at));
      }
      if (head.empty() || head.find(' ') != std::string::npos)
        throw ParseError(source, line_no, "bad entity type '" + head + "'");
      proto.entity_type = head;
      bool any = false;
      for (const auto& value : text::split(std::string_view(line).substr(colon + 1), ',')) {
        auto v = text::trim(value);
        if (v.empty()) continue;
        auto entry = proto;
        entry.tokens = text::words(v);
        if (entry.tokens.empty()) throw ParseError(source, line_no, "gazetteer value has no words");
        lex.gazetteer_.push_back(std::move(entry));
        any = true;
      }
      if (!any) throw ParseError(source, line_no, "gazetteer line lists no values");
      continue;
    }

    if (arrow == std::string::npos) throw ParseError(source, line_no, "unrecognised line");

    KeywordRule rule;
    rule.tokens = text::words(std::string_view(line).substr(0, arrow));
    if (rule.tokens.empty()) throw ParseError(source, line_no, "empty keyword");
    for (const auto& part : text::split(std::string_view(line).substr(arrow + 2), '|')) {
      auto fields = text::split(text::trim(part), ':');
      if (fields.size() != 3) throw ParseError(source, line_no, "target must be kind:LABEL:WEIGHT");
      RuleTarget target;
      auto kind = text::trim(fields[0]);
      if (kind == "domain") {
        target.kind = LabelKind::Domain;
      } else if (kind == "intent") {
        target.kind = LabelKind::Intent;
      } else {
        throw ParseError(source, line_no, "unknown target kind '" + kind + "'");
      }
      target.label = text::trim(fields[1]);
      if (target.label.empty()) throw ParseError(source, line_no, "empty label");
      target.weight = parse_number(source, line_no, text::trim(fields[2]));
      if (!(target.weight > 0.0) || !std::isfinite(target.weight))
        throw InvalidWeight(source, line_no, target.weight);
      remember_label(target.kind == LabelKind::Domain ? lex.domain_labels_ : lex.intent_labels_,
                     target.label);
      rule.targets.push_back(std::move(target));
    }
    lex.rules_.push_back(std::move(rule));
  }
  return lex;
}

Lexicon Lexicon::parse_string(std::string_view content) {
  std::istringstream in{std::string(content)};
  return parse(in);
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open lexicon file");
  return Lexicon::parse(in, path.string());
}

namespace {

bool matches_at(const std::vector<text::Token>& tokens, std::size_t pos,
                const std::vector<std::string>& phrase) {
  if (pos + phrase.size() > tokens.size()) return false;
  for (std::size_t k = 0; k < phrase.size(); ++k)
    if (tokens[pos + k].text != phrase[k]) return false;
  return true;
}

std::map<std::string, double> normalise(std::map<std::string, double> scores,
                                        const std::vector<std::string>& known) {
  if (scores.empty()) return scores;
  for (const auto& label : known) scores[label] += Lexicon::kSmoothingFloor;
  double total = 0;
  for (const auto& [_, s] : scores) total += s;
  for (auto& [_, s] : scores) s /= total;
  return scores;
}

}  // namespace

SemanticFrame parse(std::string_view utterance, const Lexicon& lexicon) {
  SemanticFrame frame;
  frame.utterance = std::string(utterance);
  const auto tokens = text::tokenize(utterance);

  std::map<std::string, double> domain_scores, intent_scores;
  for (const auto& rule : lexicon.rules()) {
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
      if (!matches_at(tokens, pos, rule.tokens)) continue;
      for (const auto& t : rule.targets)
        (t.kind == LabelKind::Domain ? domain_scores : intent_scores)[t.label] += t.weight;
    }
  }
  frame.domains = normalise(std::move(domain_scores), lexicon.labels(LabelKind::Domain));
  frame.intents = normalise(std::move(intent_scores), lexicon.labels(LabelKind::Intent));

  std::size_t pos = 0;
  while (pos < tokens.size()) {
    const GazetteerEntry* best = nullptr;
    for (const auto& entry : lexicon.gazetteer()) {
      if ((!best || entry.tokens.size() > best->tokens.size()) && matches_at(tokens, pos, entry.tokens))
        best = &entry;
    }
    if (!best) {
      ++pos;
      continue;
    }
    const auto begin = tokens[pos].begin;
    const auto end = tokens[pos + best->tokens.size() - 1].end;
    frame.entities.push_back(
        {best->entity_type, std::string(utterance.substr(begin, end - begin)), best->confidence, begin, end});
    pos += best->tokens.size();
  }
  return frame;
}

}  // namespace dialport::nlu
