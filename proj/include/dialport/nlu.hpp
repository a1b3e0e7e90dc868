#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dialport/error.hpp"

namespace dialport::nlu {

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvalidWeight : public Error {
 public:
  InvalidWeight(const std::string& source, std::size_t line, double weight);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct Entity {
  std::string entity_type;
  std::string value;
  double confidence = 1.0;
  std::size_t span_begin = 0;
  std::size_t span_end = 0;

  bool operator==(const Entity&) const = default;
};

/// A label together with its probability.
struct Scored {
  std::string label;
  double probability = 0.0;
};

struct SemanticFrame {
  std::string utterance;
  std::map<std::string, double> domains;
  std::map<std::string, double> intents;
  std::vector<Entity> entities;

  /// Highest-probability label, ties broken by label order. Empty map -> nullopt.
  std::optional<Scored> top_domain() const;
  std::optional<Scored> top_intent() const;

  /// First entity of the given type in span order.
  const Entity* find_entity(std::string_view entity_type) const;

  bool operator==(const SemanticFrame&) const = default;
};

std::optional<Scored> argmax(const std::map<std::string, double>& distribution);

void to_json(nlohmann::json& j, const Entity& e);
void from_json(const nlohmann::json& j, Entity& e);
void to_json(nlohmann::json& j, const SemanticFrame& f);
void from_json(const nlohmann::json& j, SemanticFrame& f);

enum class LabelKind { Domain, Intent };

struct RuleTarget {
  LabelKind kind;
  std::string label;
  double weight;
};

struct KeywordRule {
  std::vector<std::string> tokens;  // lowercased phrase
  std::vector<RuleTarget> targets;
};

struct GazetteerEntry {
  std::string entity_type;
  std::vector<std::string> tokens;
  double confidence = 1.0;
};

/// Keyword rules plus gazetteers. Immutable once loaded.
class Lexicon {
 public:
  /// Label floor added to every known label once a category has a hit.
  static constexpr double kSmoothingFloor = 0.05;

  static Lexicon parse(std::istream& in, const std::string& source = "<memory>");
  static Lexicon parse_string(std::string_view content);

  const std::vector<KeywordRule>& rules() const { return rules_; }
  const std::vector<GazetteerEntry>& gazetteer() const { return gazetteer_; }
  const std::vector<std::string>& labels(LabelKind kind) const {
    return kind == LabelKind::Domain ? domain_labels_ : intent_labels_;
  }

 private:
  std::vector<KeywordRule> rules_;
  std::vector<GazetteerEntry> gazetteer_;
  std::vector<std::string> domain_labels_;
  std::vector<std::string> intent_labels_;
};

/// Missing or unreadable file reports ParseError at line 0.
Lexicon load_lexicon(const std::filesystem::path& path);

/// Pure function of (utterance, lexicon). Never throws on degenerate input.
SemanticFrame parse(std::string_view utterance, const Lexicon& lexicon);

/// Seam for swapping in a statistical model.
class Understander {
 public:
  virtual ~Understander() = default;
  virtual SemanticFrame understand(std::string_view utterance) const = 0;
};

class LexiconUnderstander final : public Understander {
 public:
  explicit LexiconUnderstander(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}
  SemanticFrame understand(std::string_view utterance) const override {
    return parse(utterance, lexicon_);
  }
  const Lexicon& lexicon() const { return lexicon_; }

 private:
  Lexicon lexicon_;
};

}  // namespace dialport::nlu
