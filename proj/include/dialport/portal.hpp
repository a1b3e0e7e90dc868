#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dialport/deployment.hpp"
#include "dialport/engine.hpp"
#include "dialport/error.hpp"
#include "dialport/http_server.hpp"
#include "dialport/protocol.hpp"

namespace dialport::portal {

DIALPORT_DEFINE_ERROR(UnknownSession);
DIALPORT_DEFINE_ERROR(Busy);
DIALPORT_DEFINE_ERROR(SessionClosed);

class InternalError : public Error {
 public:
  InternalError(std::string correlation_id, const std::string& message)
      : Error("InternalError", message), correlation_id_(std::move(correlation_id)) {}
  const std::string& correlation_id() const noexcept { return correlation_id_; }

 private:
  std::string correlation_id_;
};

enum class Topic { NluRequest, NluResult, DmRequest, DmResult, NlgRequest, NlgResult };
const char* to_string(Topic topic);

struct BusMessage {
  Topic topic = Topic::NluRequest;
  std::string session_id;
  nlohmann::json payload;
  std::uint64_t seq = 0;
};

/// In-process stand-in for a message broker. A request on a topic is
/// delivered to its single handler and answered by exactly one result
/// carrying the same seq. Delivery is synchronous, so per-session FIFO
/// follows from the portal serializing each session's turns.
class MessageBus {
 public:
  using Handler = std::function<nlohmann::json(const BusMessage&)>;
  using Tap = std::function<void(const BusMessage&)>;

  /// `topic` must be one of the request topics.
  void subscribe(Topic topic, Handler handler);
  void add_tap(Tap tap);
  nlohmann::json request(Topic topic, const std::string& session_id, std::uint64_t seq, nlohmann::json payload);

 private:
  void publish(const BusMessage& message);

  std::map<Topic, Handler> handlers_;
  std::mutex taps_mutex_;
  std::vector<Tap> taps_;
};

struct TranscriptEntry {
  int turn = 0;
  std::string speaker;  // "user" | "system"
  std::string text;
  std::string agent;
  std::int64_t timestamp_ms = 0;
  std::optional<protocol::DialogReport> report;
};

nlohmann::json to_json(const TranscriptEntry& entry, const std::string& session_id);

/// Append-only NDJSON file per UTC day, `transcripts-YYYY-MM-DD.ndjson`.
class TranscriptLog {
 public:
  explicit TranscriptLog(std::filesystem::path directory);
  void append(const std::string& session_id, const TranscriptEntry& entry);
  std::filesystem::path file_for(std::int64_t timestamp_ms) const;

 private:
  std::filesystem::path directory_;
  std::mutex mutex_;
};

struct TurnReply {
  std::string reply;
  std::string active_agent;
  bool ended = false;
};

struct SessionCreated {
  std::string session_id;
  std::string reply;
  std::string active_agent;
};

struct PortalConfig {
  std::chrono::milliseconds ttl = std::chrono::minutes(30);
  std::uint64_t nlg_seed = 0;
  /// Empty disables the transcript log file.
  std::filesystem::path log_dir;
};

class Portal {
 public:
  Portal(std::shared_ptr<const Deployment> deployment, PortalConfig config = {},
         protocol::Clock clock = protocol::system_clock_ms);
  ~Portal();

  SessionCreated create_session();
  /// Throws UnknownSession, SessionClosed, Busy or InternalError.
  TurnReply post_utterance(const std::string& session_id, const std::string& text);
  /// Also answers for sessions that have expired.
  std::vector<TranscriptEntry> get_transcript(const std::string& session_id) const;
  /// Removes sessions idle for at least `ttl`; returns how many.
  std::size_t expire_sessions(std::int64_t now_ms, std::chrono::milliseconds ttl);
  std::size_t expire_sessions() { return expire_sessions(clock_(), config_.ttl); }

  std::size_t live_sessions() const;
  MessageBus& bus() { return bus_; }
  const Deployment& deployment() const { return *deployment_; }
  const PortalConfig& config() const { return config_; }

 private:
  struct Session {
    std::mutex mutex;
    std::string id;
    engine::DialogState state;
    std::int64_t created_at = 0;
    std::int64_t last_active = 0;
    std::vector<TranscriptEntry> transcript;
    std::uint64_t seq = 0;
  };

  std::shared_ptr<Session> find(const std::string& session_id) const;
  void record(Session& session, TranscriptEntry entry);
  std::string fresh_id();
  void wire_bus();

  std::shared_ptr<const Deployment> deployment_;
  PortalConfig config_;
  protocol::Clock clock_;
  MessageBus bus_;
  std::unique_ptr<TranscriptLog> log_;

  mutable std::mutex table_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::vector<TranscriptEntry>> expired_;
  std::mutex id_mutex_;
  std::uint64_t id_state_;
  std::uint64_t id_counter_ = 0;
};

/// Routes for the portal HTTP API.
std::vector<HttpRoute> portal_routes(Portal& portal);

/// Serves the portal API; expired sessions are reaped every `reap_interval`.
std::unique_ptr<protocol::RunningServer> serve_portal(std::shared_ptr<Portal> portal, const std::string& host,
                                                      int port, const std::string& cors_origin = "*",
                                                      std::chrono::milliseconds reap_interval = std::chrono::minutes(1));

}  // namespace dialport::portal
