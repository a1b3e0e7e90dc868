#include "dialport/portal.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "dialport/nlg.hpp"

namespace dialport::portal {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_request(Topic t) { return t == Topic::NluRequest || t == Topic::DmRequest || t == Topic::NlgRequest; }

Topic result_of(Topic t) {
  switch (t) {
    case Topic::NluRequest: return Topic::NluResult;
    case Topic::DmRequest: return Topic::DmResult;
    case Topic::NlgRequest: return Topic::NlgResult;
    default: break;
  }
  throw std::invalid_argument(std::string("not a request topic: ") + to_string(t));
}

}  // namespace

const char* to_string(Topic topic) {
  switch (topic) {
    case Topic::NluRequest: return "nlu.request";
    case Topic::NluResult: return "nlu.result";
    case Topic::DmRequest: return "dm.request";
    case Topic::DmResult: return "dm.result";
    case Topic::NlgRequest: return "nlg.request";
    case Topic::NlgResult: return "nlg.result";
  }
  return "?";
}

void MessageBus::subscribe(Topic topic, Handler handler) {
  if (!is_request(topic)) throw std::invalid_argument(std::string("cannot subscribe to ") + to_string(topic));
  handlers_[topic] = std::move(handler);
}

void MessageBus::add_tap(Tap tap) {
  std::lock_guard lock(taps_mutex_);
  taps_.push_back(std::move(tap));
}

void MessageBus::publish(const BusMessage& message) {
  std::vector<Tap> taps;
  {
    std::lock_guard lock(taps_mutex_);
    taps = taps_;
  }
  for (const auto& tap : taps) tap(message);
}

nlohmann::json MessageBus::request(Topic topic, const std::string& session_id, std::uint64_t seq,
                                   nlohmann::json payload) {
  auto handler = handlers_.find(topic);
  if (handler == handlers_.end()) throw std::logic_error(std::string("no handler for ") + to_string(topic));
  BusMessage req{topic, session_id, std::move(payload), seq};
  publish(req);
  BusMessage result{result_of(topic), session_id, handler->second(req), seq};
  publish(result);
  return std::move(result.payload);
}

nlohmann::json to_json(const TranscriptEntry& entry, const std::string& session_id) {
  nlohmann::json j = {{"session_id", session_id},   {"turn", entry.turn},   {"speaker", entry.speaker},
                      {"text", entry.text},         {"agent", entry.agent}, {"timestamp", entry.timestamp_ms},
                      {"report", nullptr}};
  if (entry.report) j["report"] = protocol::encode(*entry.report);
  return j;
}

TranscriptLog::TranscriptLog(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

std::filesystem::path TranscriptLog::file_for(std::int64_t timestamp_ms) const {
  const std::chrono::sys_days day =
      std::chrono::floor<std::chrono::days>(std::chrono::sys_time<std::chrono::milliseconds>(
          std::chrono::milliseconds(timestamp_ms)));
  const std::chrono::year_month_day ymd{day};
  char name[64];
  std::snprintf(name, sizeof name, "transcripts-%04d-%02u-%02u.ndjson", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return directory_ / name;
}

void TranscriptLog::append(const std::string& session_id, const TranscriptEntry& entry) {
  const auto line = to_json(entry, session_id).dump();
  std::lock_guard lock(mutex_);
  std::ofstream out(file_for(entry.timestamp_ms), std::ios::app);
  if (!out) {
    spdlog::error("cannot append to transcript log in {}", directory_.string());
    return;
  }
  out << line << '\n';
}

Portal::Portal(std::shared_ptr<const Deployment> deployment, PortalConfig config, protocol::Clock clock)
    : deployment_(std::move(deployment)),
      config_(std::move(config)),
      clock_(std::move(clock)),
      id_state_((static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}()) {
  if (!config_.log_dir.empty()) log_ = std::make_unique<TranscriptLog>(config_.log_dir);
  wire_bus();
}

Portal::~Portal() = default;

void Portal::wire_bus() {
  bus_.subscribe(Topic::NluRequest, [this](const BusMessage& m) {
    return nlohmann::json{{"frame", deployment_->understander->understand(m.payload.at("text").get<std::string>())}};
  });
  bus_.subscribe(Topic::DmRequest, [this](const BusMessage& m) {
    auto session = find(m.session_id);
    auto& state = session->state;
    const auto reports = state.reports.size();
    auto action = deployment_->engine->run_turn(state, m.payload.at("frame").get<nlu::SemanticFrame>());
    nlohmann::json out = {{"acts", action},
                          {"active_agent", deployment_->engine->active_agent(state)},
                          {"ended", state.ended},
                          {"report", nullptr}};
    if (state.reports.size() > reports) out["report"] = protocol::encode(state.reports.back());
    return out;
  });
  bus_.subscribe(Topic::NlgRequest, [this](const BusMessage& m) {
    auto action = m.payload.at("acts").get<SystemAction>();
    return nlohmann::json{
        {"text", nlg::render(action, deployment_->templates, m.payload.at("seed").get<std::uint64_t>())}};
  });
}

std::string Portal::fresh_id() {
  std::lock_guard lock(id_mutex_);
  return hex16(splitmix64(id_state_ + ++id_counter_));
}

std::shared_ptr<Portal::Session> Portal::find(const std::string& session_id) const {
  std::lock_guard lock(table_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw UnknownSession("unknown session '" + session_id + "'");
  return it->second;
}

void Portal::record(Session& session, TranscriptEntry entry) {
  if (log_) log_->append(session.id, entry);
  session.transcript.push_back(std::move(entry));
}

SessionCreated Portal::create_session() {
  auto session = std::make_shared<Session>();
  session->id = fresh_id();
  const auto now = clock_();
  session->created_at = now;
  session->last_active = now;
  std::lock_guard session_lock(session->mutex);
  auto [state, action] = deployment_->engine->start_session(session->id);
  session->state = std::move(state);
  auto text = bus_.request(Topic::NlgRequest, session->id, ++session->seq,
                           {{"acts", action}, {"seed", config_.nlg_seed}})
                  .at("text")
                  .get<std::string>();
  const auto agent = deployment_->engine->active_agent(session->state);
  record(*session, {0, "system", text, agent, now, std::nullopt});
  {
    std::lock_guard lock(table_mutex_);
    sessions_[session->id] = session;
  }
  return {session->id, text, agent};
}

TurnReply Portal::post_utterance(const std::string& session_id, const std::string& text) {
  auto session = find(session_id);
  std::unique_lock lock(session->mutex, std::try_to_lock);
  if (!lock.owns_lock()) throw Busy("a turn for session '" + session_id + "' is already in progress");
  if (session->state.ended) throw SessionClosed("session '" + session_id + "' has ended");

  try {
    auto& state = session->state;
    const auto now = clock_();
    session->last_active = now;
    const int turn = state.turn_count + 1;
    record(*session, {turn, "user", text, deployment_->engine->active_agent(state), now, std::nullopt});

    auto frame = bus_.request(Topic::NluRequest, session_id, ++session->seq, {{"text", text}}).at("frame");
    auto dm = bus_.request(Topic::DmRequest, session_id, ++session->seq, {{"frame", frame}});
    auto reply = bus_.request(Topic::NlgRequest, session_id, ++session->seq,
                              {{"acts", dm.at("acts")}, {"seed", config_.nlg_seed + static_cast<std::uint64_t>(turn)}})
                     .at("text")
                     .get<std::string>();

    TurnReply out{reply, dm.at("active_agent").get<std::string>(), dm.at("ended").get<bool>()};
    std::optional<protocol::DialogReport> report;
    if (!dm.at("report").is_null()) report = protocol::decode_report(dm.at("report"));
    record(*session, {turn, "system", reply, out.active_agent, clock_(), std::move(report)});
    session->last_active = clock_();
    return out;
  } catch (const std::exception& e) {
    const auto correlation = fresh_id();
    spdlog::error("session {} turn failed [{}]: {}", session_id, correlation, e.what());
    throw InternalError(correlation, std::string("internal error, correlation id ") + correlation);
  }
}

std::vector<TranscriptEntry> Portal::get_transcript(const std::string& session_id) const {
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(table_mutex_);
    if (auto it = expired_.find(session_id); it != expired_.end()) return it->second;
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw UnknownSession("unknown session '" + session_id + "'");
    session = it->second;
  }
  std::lock_guard lock(session->mutex);
  return session->transcript;
}

std::size_t Portal::live_sessions() const {
  std::lock_guard lock(table_mutex_);
  return sessions_.size();
}

std::size_t Portal::expire_sessions(std::int64_t now_ms, std::chrono::milliseconds ttl) {
  std::vector<std::shared_ptr<Session>> candidates;
  {
    std::lock_guard lock(table_mutex_);
    for (const auto& [_, s] : sessions_) candidates.push_back(s);
  }
  std::size_t expired = 0;
  for (const auto& session : candidates) {
    std::unique_lock lock(session->mutex, std::try_to_lock);
    if (!lock.owns_lock()) continue;
    if (now_ms - session->last_active < ttl.count()) continue;
    auto& state = session->state;
    if (state.active_remote) {
      const auto agent = state.active_remote->agent_name;
      const int turn = state.turn_count + 1;
      record(*session, {turn, "user", "goodbye", agent, now_ms, std::nullopt});
      state.pending_actions = {};
      const auto reports = state.reports.size();
      std::string reply;
      try {
        deployment_->engine->relay_to_remote(state, "goodbye");
        if (!state.pending_actions.acts.empty()) reply = state.pending_actions.acts.front().value.text;
      } catch (const engine::RemoteAgentFailure& e) {
        reply = std::string("[remote close failed] ") + e.what();
      }
      state.active_remote.reset();
      std::optional<protocol::DialogReport> report;
      if (state.reports.size() > reports) report = state.reports.back();
      record(*session, {turn, "system", reply, agent, now_ms, std::move(report)});
    }
    state.ended = true;
    {
      std::lock_guard table(table_mutex_);
      expired_[session->id] = session->transcript;
      sessions_.erase(session->id);
    }
    ++expired;
  }
  return expired;
}

namespace {

HttpAnswer json_answer(int status, const nlohmann::json& body) { return {status, body.dump(), "application/json"}; }

HttpAnswer error_answer(int status, const std::string& code, const std::string& message,
                        const std::string& correlation = "") {
  nlohmann::json body = {{"error", code}, {"message", message}};
  if (!correlation.empty()) body["correlation_id"] = correlation;
  return json_answer(status, body);
}

template <typename Fn>
HttpAnswer guarded(Fn fn) {
  try {
    return fn();
  } catch (const UnknownSession& e) {
    return error_answer(404, e.code(), e.what());
  } catch (const Busy& e) {
    return error_answer(409, e.code(), e.what());
  } catch (const SessionClosed& e) {
    return error_answer(410, e.code(), e.what());
  } catch (const InternalError& e) {
    return error_answer(500, e.code(), e.what(), e.correlation_id());
  } catch (const nlohmann::json::exception& e) {
    return error_answer(400, "BadRequest", e.what());
  } catch (const std::exception& e) {
    spdlog::error("portal request failed: {}", e.what());
    return error_answer(500, "InternalError", e.what());
  }
}

class PortalServer final : public protocol::RunningServer {
 public:
  PortalServer(std::shared_ptr<Portal> portal, std::unique_ptr<protocol::RunningServer> http,
               std::chrono::milliseconds interval)
      : portal_(std::move(portal)), http_(std::move(http)) {
    reaper_ = std::thread([this, interval] {
      std::unique_lock lock(mutex_);
      while (!stopping_) {
        if (cv_.wait_for(lock, interval, [this] { return stopping_; })) break;
        lock.unlock();
        if (auto n = portal_->expire_sessions()) spdlog::info("expired {} idle sessions", n);
        lock.lock();
      }
    });
  }

  ~PortalServer() override { stop(); }

  int port() const override { return http_->port(); }

  void stop() override {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (reaper_.joinable()) reaper_.join();
    http_->stop();
  }

 private:
  std::shared_ptr<Portal> portal_;
  std::unique_ptr<protocol::RunningServer> http_;
  std::thread reaper_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
};

}  // namespace

std::vector<HttpRoute> portal_routes(Portal& portal) {
  std::vector<HttpRoute> routes;
  routes.push_back({"POST", R"(/api/session/?)", [&portal](const HttpRequest&) {
                      return guarded([&] {
                        auto created = portal.create_session();
                        return json_answer(200, {{"session_id", created.session_id},
                                                 {"reply", created.reply},
                                                 {"active_agent", created.active_agent},
                                                 {"ended", false}});
                      });
                    }});
  routes.push_back({"POST", R"(/api/session/([^/]+)/utterance)", [&portal](const HttpRequest& req) {
                      return guarded([&] {
                        auto body = nlohmann::json::parse(req.body);
                        auto text = body.at("text").get<std::string>();
                        auto reply = portal.post_utterance(req.captures.at(0), text);
                        return json_answer(
                            200, {{"reply", reply.reply}, {"active_agent", reply.active_agent}, {"ended", reply.ended}});
                      });
                    }});
  routes.push_back({"GET", R"(/api/session/([^/]+)/transcript)", [&portal](const HttpRequest& req) {
                      return guarded([&] {
                        const auto& id = req.captures.at(0);
                        auto turns = nlohmann::json::array();
                        for (const auto& entry : portal.get_transcript(id)) {
                          auto j = to_json(entry, id);
                          j.erase("session_id");
                          turns.push_back(std::move(j));
                        }
                        return json_answer(200, {{"session_id", id}, {"turns", turns}});
                      });
                    }});
  return routes;
}

std::unique_ptr<protocol::RunningServer> serve_portal(std::shared_ptr<Portal> portal, const std::string& host,
                                                      int port, const std::string& cors_origin,
                                                      std::chrono::milliseconds reap_interval) {
  auto http = start_http_server(host, port, portal_routes(*portal), cors_origin);
  return std::make_unique<PortalServer>(std::move(portal), std::move(http), reap_interval);
}

}  // namespace dialport::portal
