#include "dialport/agents.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "dialport/text.hpp"

namespace dialport::agents {

namespace {

using protocol::KnowledgeConstraint;
using protocol::KnowledgeEntity;

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;  // line number, cells
};

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) throw FixtureError("cannot open fixture " + path.string());
  CsvTable table;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    auto cells = text::split(trimmed, ',');
    for (auto& c : cells) c = text::trim(c);
    if (table.header.empty()) {
      table.header = cells;
      continue;
    }
    if (cells.size() != table.header.size())
      throw FixtureError(path.string() + ":" + std::to_string(number) + ": expected " +
                         std::to_string(table.header.size()) + " columns, found " + std::to_string(cells.size()));
    table.rows.emplace_back(number, std::move(cells));
  }
  for (const auto& column : required) {
    if (std::find(table.header.begin(), table.header.end(), column) == table.header.end())
      throw FixtureError(path.string() + ": missing column '" + column + "'");
  }
  return table;
}

std::string cell(const CsvTable& t, const std::vector<std::string>& row, const std::string& column) {
  auto it = std::find(t.header.begin(), t.header.end(), column);
  return row[static_cast<std::size_t>(it - t.header.begin())];
}

double number_cell(const std::string& where, const std::string& value) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw FixtureError(where + ": '" + value + "' is not a number");
  return out;
}

std::optional<std::chrono::year_month_day> parse_iso(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  auto ok = [](auto r, const char* end) { return r.ec == std::errc() && r.ptr == end; };
  if (!ok(std::from_chars(s.data(), s.data() + 4, y), s.data() + 4)) return std::nullopt;
  if (!ok(std::from_chars(s.data() + 5, s.data() + 7, m), s.data() + 7)) return std::nullopt;
  if (!ok(std::from_chars(s.data() + 8, s.data() + 10, d), s.data() + 10)) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return ymd;
}

std::string format_iso(std::chrono::year_month_day ymd) {
  std::ostringstream out;
  out << std::setfill('0') << std::setw(4) << static_cast<int>(ymd.year()) << '-' << std::setw(2)
      << static_cast<unsigned>(ymd.month()) << '-' << std::setw(2) << static_cast<unsigned>(ymd.day());
  return out.str();
}

const std::vector<std::string>& weekday_names() {
  static const std::vector<std::string> names = {"sunday",   "monday", "tuesday", "wednesday",
                                                 "thursday", "friday", "saturday"};
  return names;
}

bool before_by_rating(const KnowledgeEntity& a, const KnowledgeEntity& b) {
  double ra = std::stod(a.at("rating"));
  double rb = std::stod(b.at("rating"));
  if (ra != rb) return ra > rb;
  if (a.at("name") != b.at("name")) return a.at("name") < b.at("name");
  return a.at("location") < b.at("location");
}

bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  return std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) != tokens.end();
}

const std::set<std::string> kPriceRanges = {"cheap", "moderate", "expensive"};

}  // namespace

bool is_iso_date(std::string_view s) { return parse_iso(s).has_value(); }

std::optional<std::string> resolve_date(std::string_view expression, const std::string& reference_iso) {
  auto reference = parse_iso(reference_iso);
  if (!reference) throw FixtureError("reference date '" + reference_iso + "' is not yyyy-mm-dd");
  auto trimmed = text::trim(expression);
  if (auto iso = parse_iso(trimmed)) return format_iso(*iso);

  const std::chrono::sys_days today{*reference};
  auto tokens = text::words(trimmed);
  if (tokens.empty()) return std::nullopt;
  auto offset = [&](int days) { return format_iso(std::chrono::year_month_day{today + std::chrono::days{days}}); };
  if (contains_phrase(tokens, {"day", "after", "tomorrow"})) return offset(2);
  if (contains_phrase(tokens, {"tomorrow"})) return offset(1);
  if (contains_phrase(tokens, {"today"}) || contains_phrase(tokens, {"tonight"})) return offset(0);
  const auto& names = weekday_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!contains_phrase(tokens, {names[i]})) continue;
    const std::chrono::weekday target{static_cast<unsigned>(i)};
    const auto delta = (target - std::chrono::weekday{today}).count();
    return offset(static_cast<int>(delta));
  }
  return std::nullopt;
}

std::string format_number(double value) {
  std::ostringstream out;
  out << std::setprecision(6) << value;
  return out.str();
}

KnowledgeEntity to_entity(const RestaurantRecord& r) {
  std::ostringstream rating;
  rating << std::fixed << std::setprecision(1) << r.rating;
  return {{"name", r.name},
          {"location", r.location},
          {"food_type", r.food_type},
          {"price_range", r.price_range},
          {"rating", rating.str()}};
}

KnowledgeEntity to_entity(const WeatherRecord& r) {
  return {{"location", r.location},
          {"date", r.date},
          {"condition", r.condition},
          {"high_c", format_number(r.high_c)},
          {"low_c", format_number(r.low_c)}};
}

WeatherStore::WeatherStore(std::vector<WeatherRecord> records, std::string reference_date)
    : records_(std::move(records)), reference_date_(std::move(reference_date)) {
  if (!is_iso_date(reference_date_)) throw FixtureError("reference date '" + reference_date_ + "' is not yyyy-mm-dd");
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : records_) {
    if (!is_iso_date(r.date)) throw FixtureError("weather date '" + r.date + "' is not yyyy-mm-dd");
    if (r.low_c > r.high_c) throw FixtureError("weather for " + r.location + " on " + r.date + ": low above high");
    if (!seen.emplace(text::to_lower(r.location), r.date).second)
      throw FixtureError("duplicate weather record for " + r.location + " on " + r.date);
  }
  std::stable_sort(records_.begin(), records_.end(), [](const WeatherRecord& a, const WeatherRecord& b) {
    return std::tie(a.location, a.date) < std::tie(b.location, b.date);
  });
}

WeatherStore WeatherStore::load(const std::filesystem::path& path, std::string reference_date) {
  auto table = read_csv(path, {"location", "date", "condition", "high_c", "low_c"});
  std::vector<WeatherRecord> records;
  for (const auto& [line, row] : table.rows) {
    const auto where = path.string() + ":" + std::to_string(line);
    records.push_back({cell(table, row, "location"), cell(table, row, "date"), cell(table, row, "condition"),
                       number_cell(where, cell(table, row, "high_c")), number_cell(where, cell(table, row, "low_c"))});
  }
  return WeatherStore(std::move(records), std::move(reference_date));
}

const std::vector<std::string>& WeatherStore::schema() const {
  static const std::vector<std::string> fields = {"location", "date", "condition", "high_c", "low_c"};
  return fields;
}

std::vector<KnowledgeEntity> WeatherStore::query(const std::vector<KnowledgeConstraint>& constraints) const {
  protocol::check_fields(schema(), constraints);
  auto resolved = constraints;
  for (auto& c : resolved) {
    if (c.field != "date" || c.op != protocol::ConstraintOp::Eq) continue;
    auto date = resolve_date(c.value, reference_date_);
    if (!date) return {};
    c.value = *date;
  }
  std::vector<KnowledgeEntity> out;
  for (const auto& r : records_) {
    auto entity = to_entity(r);
    if (std::all_of(resolved.begin(), resolved.end(),
                    [&](const KnowledgeConstraint& c) { return protocol::satisfies(entity, c); }))
      out.push_back(std::move(entity));
  }
  return out;
}

std::optional<WeatherRecord> weather_lookup(const WeatherStore& store, std::string_view location,
                                            std::string_view date) {
  auto resolved = resolve_date(date, store.reference_date());
  if (!resolved) return std::nullopt;
  for (const auto& r : store.records()) {
    if (r.date == *resolved && text::iequals(r.location, text::trim(location))) return r;
  }
  return std::nullopt;
}

RestaurantStore::RestaurantStore(std::vector<RestaurantRecord> records) : records_(std::move(records)) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : records_) {
    if (r.rating < 0 || r.rating > 5) throw FixtureError("rating of " + r.name + " is outside [0, 5]");
    if (!kPriceRanges.count(r.price_range))
      throw FixtureError("price range '" + r.price_range + "' of " + r.name + " is not cheap, moderate or expensive");
    if (!seen.emplace(text::to_lower(r.name), text::to_lower(r.location)).second)
      throw FixtureError("duplicate restaurant " + r.name + " in " + r.location);
  }
  std::stable_sort(records_.begin(), records_.end(), [](const RestaurantRecord& a, const RestaurantRecord& b) {
    if (a.rating != b.rating) return a.rating > b.rating;
    return std::tie(a.name, a.location) < std::tie(b.name, b.location);
  });
}

RestaurantStore RestaurantStore::load(const std::filesystem::path& path) {
  auto table = read_csv(path, {"name", "location", "food_type", "price_range", "rating"});
  std::vector<RestaurantRecord> records;
  for (const auto& [line, row] : table.rows) {
    const auto where = path.string() + ":" + std::to_string(line);
    records.push_back({cell(table, row, "name"), cell(table, row, "location"), cell(table, row, "food_type"),
                       text::to_lower(cell(table, row, "price_range")), number_cell(where, cell(table, row, "rating"))});
  }
  return RestaurantStore(std::move(records));
}

const std::vector<std::string>& RestaurantStore::schema() const {
  static const std::vector<std::string> fields = {"name", "location", "food_type", "price_range", "rating"};
  return fields;
}

std::vector<KnowledgeEntity> RestaurantStore::query(const std::vector<KnowledgeConstraint>& constraints) const {
  std::vector<KnowledgeEntity> out;
  for (const auto& r : restaurant_search(*this, constraints)) out.push_back(to_entity(r));
  std::stable_sort(out.begin(), out.end(), before_by_rating);
  return out;
}

std::vector<RestaurantRecord> restaurant_search(const RestaurantStore& store,
                                                const std::vector<KnowledgeConstraint>& constraints) {
  protocol::check_fields(store.schema(), constraints);
  std::vector<RestaurantRecord> out;
  for (const auto& r : store.records()) {
    auto entity = to_entity(r);
    entity["rating"] = format_number(r.rating);
    if (std::all_of(constraints.begin(), constraints.end(),
                    [&](const KnowledgeConstraint& c) { return protocol::satisfies(entity, c); }))
      out.push_back(r);
  }
  return out;
}

ReferenceRestaurantAgent::ReferenceRestaurantAgent(std::shared_ptr<const RestaurantStore> store,
                                                   protocol::Clock clock)
    : store_(std::move(store)), clock_(std::move(clock)) {
  auto add = [this](const std::string& slot, const std::string& value) {
    auto& entries = vocabulary_[slot];
    auto tokens = text::words(value);
    for (const auto& e : entries) {
      if (e.first == tokens) return;
    }
    entries.emplace_back(std::move(tokens), value);
  };
  for (const auto& r : store_->records()) {
    add("location", r.location);
    add("food_type", r.food_type);
  }
  for (const auto& p : kPriceRanges) add("price_range", p);
  // Longest phrase first so "new york" wins over "york".
  for (auto& [slot, entries] : vocabulary_) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  }
}

const std::vector<std::string>& ReferenceRestaurantAgent::slot_order() {
  static const std::vector<std::string> order = {"location", "food_type", "price_range"};
  return order;
}

std::map<std::string, std::string> ReferenceRestaurantAgent::extract(std::string_view utterance) const {
  auto tokens = text::words(utterance);
  std::map<std::string, std::string> found;
  for (const auto& [slot, entries] : vocabulary_) {
    for (const auto& [phrase, value] : entries) {
      if (contains_phrase(tokens, phrase)) {
        found[slot] = value;
        break;
      }
    }
  }
  return found;
}

namespace {

constexpr const char* kFarewell = "Enjoy your meal, goodbye!";
constexpr const char* kChangeHint = "Tell me if you want a different city, food or price range.";

}  // namespace

std::string ReferenceRestaurantAgent::prompt_for_missing(const Conversation& c) const {
  for (const auto& slot : slot_order()) {
    if (c.slots.count(slot)) continue;
    if (slot == "location") return "Which city should I search for restaurants in?";
    if (slot == "food_type") return "What kind of food would you like?";
    return "What price range are you looking for: cheap, moderate or expensive?";
  }
  return {};
}

std::string ReferenceRestaurantAgent::recommend(const Conversation& c, const std::string& closing) const {
  std::vector<KnowledgeConstraint> constraints;
  for (const auto& slot : slot_order()) constraints.push_back({slot, protocol::ConstraintOp::Eq, c.slots.at(slot)});
  auto matches = restaurant_search(*store_, constraints);
  const auto& location = c.slots.at("location");
  const auto& food = c.slots.at("food_type");
  const auto& price = c.slots.at("price_range");
  if (matches.empty())
    return "Sorry, I could not find a " + price + " " + food + " restaurant in " + location + ". " + closing;
  const auto& best = matches.front();
  std::ostringstream rating;
  rating << std::fixed << std::setprecision(1) << best.rating;
  return "How about " + best.name + "? It is a " + price + " " + food + " place in " + best.location + " rated " +
         rating.str() + ". " + closing;
}

protocol::NextReply ReferenceRestaurantAgent::finish(const std::string& token, Conversation& c, std::string reply,
                                                     protocol::Outcome outcome) {
  c.turns.push_back({protocol::Speaker::System, reply, clock_()});
  protocol::DialogReport report;
  report.session_token = token;
  report.turns = c.turns;
  report.outcome = outcome;
  report.extras = {{"user_id", c.user_id}, {"slots", c.slots}};
  conversations_.erase(token);
  return {std::move(reply), true, std::move(report)};
}

std::string ReferenceRestaurantAgent::on_new_call(const std::string& token, const std::string& user_id,
                                                  const protocol::InitialState& s0) {
  Conversation c;
  c.user_id = user_id;
  for (const auto& slot : slot_order()) {
    auto it = s0.known_slots.find(slot);
    if (it == s0.known_slots.end() || it->second.confidence < kSlotAcceptance) continue;
    auto canonical = extract(it->second.value);
    auto hit = canonical.find(slot);
    c.slots[slot] = hit != canonical.end() ? hit->second : it->second.value;
  }
  std::string reply = prompt_for_missing(c);
  if (reply.empty()) {
    reply = recommend(c, kChangeHint);
    c.recommended = true;
  } else if (!c.slots.empty()) {
    reply = "Looking for restaurants. " + reply;
  } else {
    reply = "Hi, this is the restaurant guide. " + reply;
  }
  c.turns.push_back({protocol::Speaker::System, reply, clock_()});
  std::lock_guard lock(mutex_);
  conversations_[token] = std::move(c);
  return reply;
}

protocol::NextReply ReferenceRestaurantAgent::on_next(const std::string& token, const std::string& utterance) {
  std::lock_guard lock(mutex_);
  auto it = conversations_.find(token);
  if (it == conversations_.end()) throw protocol::ProtocolError("no conversation for token '" + token + "'");
  auto& c = it->second;
  c.turns.push_back({protocol::Speaker::User, utterance, clock_()});

  auto tokens = text::words(utterance);
  if (contains_phrase(tokens, {"never", "mind"}) || contains_phrase(tokens, {"nevermind"}) ||
      contains_phrase(tokens, {"cancel"}) || contains_phrase(tokens, {"goodbye"}))
    return finish(token, c, "No problem. Goodbye!", protocol::Outcome::Abandoned);

  auto found = extract(utterance);
  if (c.recommended && found.empty()) return finish(token, c, kFarewell, protocol::Outcome::Completed);
  for (auto& [slot, value] : found) c.slots[slot] = value;
  auto prompt = prompt_for_missing(c);
  if (prompt.empty()) return finish(token, c, recommend(c, kFarewell), protocol::Outcome::Completed);
  if (found.empty()) prompt = "Sorry, I did not catch that. " + prompt;
  c.turns.push_back({protocol::Speaker::System, prompt, clock_()});
  return {std::move(prompt), false, std::nullopt};
}

std::shared_ptr<protocol::AgentHandler> reference_remote_agent(std::shared_ptr<const RestaurantStore> store,
                                                               protocol::Clock clock) {
  return std::make_shared<ReferenceRestaurantAgent>(std::move(store), std::move(clock));
}

}  // namespace dialport::agents
