#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dialport/agent_server.hpp"
#include "dialport/error.hpp"
#include "dialport/knowledge.hpp"

// File-backed knowledge agents and the scripted reference remote agent.
//
// Fixture files are comma-separated with a header row naming the columns;
// blank lines and lines starting with '#' are ignored. Values may not contain
// commas.
//
//   weather:     location,date,condition,high_c,low_c
//   restaurants: name,location,food_type,price_range,rating
namespace dialport::agents {

DIALPORT_DEFINE_ERROR(FixtureError);

struct WeatherRecord {
  std::string location;
  std::string date;  // ISO-8601 yyyy-mm-dd
  std::string condition;
  double high_c = 0;
  double low_c = 0;

  bool operator==(const WeatherRecord&) const = default;
};

struct RestaurantRecord {
  std::string name;
  std::string location;
  std::string food_type;
  std::string price_range;  // cheap | moderate | expensive
  double rating = 0;

  bool operator==(const RestaurantRecord&) const = default;
};

/// "today", "tomorrow", "day after tomorrow", weekday names (next occurrence,
/// today included) or an ISO date, relative to `reference_iso`.
std::optional<std::string> resolve_date(std::string_view expression, const std::string& reference_iso);
bool is_iso_date(std::string_view s);

/// Formats a number without trailing zeros ("21", "12.5").
std::string format_number(double value);

class WeatherStore final : public protocol::KnowledgeAgent {
 public:
  WeatherStore(std::vector<WeatherRecord> records, std::string reference_date);
  static WeatherStore load(const std::filesystem::path& path, std::string reference_date);

  const std::vector<std::string>& schema() const override;
  /// `date eq` constraints accept the same relative expressions as lookup().
  std::vector<protocol::KnowledgeEntity> query(
      const std::vector<protocol::KnowledgeConstraint>& constraints) const override;

  const std::vector<WeatherRecord>& records() const { return records_; }
  const std::string& reference_date() const { return reference_date_; }

 private:
  std::vector<WeatherRecord> records_;
  std::string reference_date_;
};

/// Case-insensitive location match on a resolved date.
std::optional<WeatherRecord> weather_lookup(const WeatherStore& store, std::string_view location,
                                            std::string_view date);

class RestaurantStore final : public protocol::KnowledgeAgent {
 public:
  explicit RestaurantStore(std::vector<RestaurantRecord> records);
  static RestaurantStore load(const std::filesystem::path& path);

  const std::vector<std::string>& schema() const override;
  std::vector<protocol::KnowledgeEntity> query(
      const std::vector<protocol::KnowledgeConstraint>& constraints) const override;

  /// Records sorted by rating (descending), then name, then location.
  const std::vector<RestaurantRecord>& records() const { return records_; }

 private:
  std::vector<RestaurantRecord> records_;
};

protocol::KnowledgeEntity to_entity(const RestaurantRecord& r);
protocol::KnowledgeEntity to_entity(const WeatherRecord& r);

/// Conjunctive search, rating-descending. Throws protocol::UnknownField.
std::vector<RestaurantRecord> restaurant_search(const RestaurantStore& store,
                                                const std::vector<protocol::KnowledgeConstraint>& constraints);

/// Slot-filling restaurant agent over (location, food_type, price_range).
/// Asks for the first unknown slot in that order, takes s0 slots with
/// confidence >= 0.5, and ends the session with a report once it has
/// recommended something. When s0 already fills every slot the first reply
/// recommends and the next utterance either changes a slot or closes.
/// "never mind", "cancel" or "goodbye" abandons the session.
class ReferenceRestaurantAgent final : public protocol::AgentHandler {
 public:
  static constexpr double kSlotAcceptance = 0.5;

  ReferenceRestaurantAgent(std::shared_ptr<const RestaurantStore> store,
                           protocol::Clock clock = protocol::system_clock_ms);

  std::string on_new_call(const std::string& token, const std::string& user_id,
                          const protocol::InitialState& s0) override;
  protocol::NextReply on_next(const std::string& token, const std::string& utterance) override;

  static const std::vector<std::string>& slot_order();

 private:
  struct Conversation {
    std::string user_id;
    std::map<std::string, std::string> slots;
    std::vector<protocol::ReportTurn> turns;
    bool recommended = false;
  };

  std::map<std::string, std::string> extract(std::string_view utterance) const;
  std::string prompt_for_missing(const Conversation& c) const;
  std::string recommend(const Conversation& c, const std::string& closing) const;
  protocol::NextReply finish(const std::string& token, Conversation& c, std::string reply,
                             protocol::Outcome outcome);

  std::shared_ptr<const RestaurantStore> store_;
  protocol::Clock clock_;
  // slot -> (lowercased phrase tokens, canonical value)
  std::map<std::string, std::vector<std::pair<std::vector<std::string>, std::string>>> vocabulary_;
  std::mutex mutex_;
  std::map<std::string, Conversation> conversations_;
};

std::shared_ptr<protocol::AgentHandler> reference_remote_agent(std::shared_ptr<const RestaurantStore> store,
                                                               protocol::Clock clock = protocol::system_clock_ms);

}  // namespace dialport::agents
