#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "httplib.h"

#include "dialport/cli.hpp"
#include "dialport/portal.hpp"

#include "fixtures.hpp"

using namespace dialport;

namespace {

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::shared_ptr<const Deployment> shipped() {
  static auto d = fixtures::shipped();
  return d;
}

int dead_port() {
  auto server = protocol::serve_agent(
      agents::reference_remote_agent(shipped()->restaurants), "127.0.0.1", 0);
  int port = server->port();
  server->stop();
  return port;
}

}  // namespace

TEST(Portal, GreetsAndAsksForGoal) {
  auto p = fixtures::portal(shipped());
  auto s = p->create_session();
  EXPECT_EQ(s.reply, "Hi, I am Skylar, your DialPort guide. How can I help you?");
  EXPECT_EQ(s.active_agent, "skylar");
  EXPECT_EQ(p->live_sessions(), 1u);
}

TEST(Portal, WeatherFlowConfirmsRelativeDateImplicitly) {
  auto p = fixtures::portal(shipped());
  auto id = p->create_session().session_id;
  EXPECT_EQ(p->post_utterance(id, "what is the weather in Boston").reply, "For which day?");
  auto r = p->post_utterance(id, "tomorrow");
  EXPECT_TRUE(contains(r.reply, "I believe you said tomorrow.")) << r.reply;
  EXPECT_TRUE(contains(r.reply, "The forecast for Boston on 2025-06-03")) << r.reply;
}

TEST(Portal, NonUnderstandingLadder) {
  auto p = fixtures::portal(shipped());
  auto id = p->create_session().session_id;
  auto first = p->post_utterance(id, "zorp blick");
  EXPECT_TRUE(contains(first.reply, "Could you say that another way?")) << first.reply;
  auto second = p->post_utterance(id, "zorp blick");
  EXPECT_TRUE(contains(second.reply, "Try: what is the weather in Boston tomorrow?")) << second.reply;
}

TEST(Portal, ChatbotAnswersChitChat) {
  auto p = fixtures::portal(shipped());
  auto id = p->create_session().session_id;
  auto r = p->post_utterance(id, "who founded microsoft");
  EXPECT_TRUE(contains(r.reply, "How can I help you?")) << r.reply;
  EXPECT_FALSE(contains(r.reply, "another way")) << r.reply;
}

TEST(Portal, ByeEndsSessionAndLaterTurnsAreRejected) {
  auto p = fixtures::portal(shipped());
  auto id = p->create_session().session_id;
  auto r = p->post_utterance(id, "bye");
  EXPECT_TRUE(r.ended);
  EXPECT_EQ(r.reply, "Goodbye, thanks for using DialPort!");
  EXPECT_THROW(p->post_utterance(id, "hello"), portal::SessionClosed);
  EXPECT_THROW(p->post_utterance("nope", "hello"), portal::UnknownSession);
}

TEST(Portal, UnreachableRemoteIsReportedAndDialogContinues) {
  DeploymentOptions options;
  options.config = fixtures::data_dir() / "deployment.json";
  options.remote_endpoints["cambridge"] = "http://127.0.0.1:" + std::to_string(dead_port());
  auto p = fixtures::portal(load_deployment(options));
  auto id = p->create_session().session_id;
  auto r = p->post_utterance(id, "I am looking for a restaurant");
  EXPECT_TRUE(contains(r.reply, "not available right now")) << r.reply;
  EXPECT_EQ(r.active_agent, "skylar");
  EXPECT_FALSE(r.ended);
  EXPECT_EQ(p->post_utterance(id, "what is the weather").reply, "Which city are you interested in?");
}

TEST(Portal, TranscriptRecordsBothSidesAndReport) {
  auto p = fixtures::portal(shipped());
  auto id = p->create_session().session_id;
  for (const char* u : {"I am looking for a restaurant", "Pittsburgh", "thai", "cheap"}) p->post_utterance(id, u);
  auto t = p->get_transcript(id);
  ASSERT_EQ(t.size(), 9u);
  EXPECT_EQ(t.front().speaker, "system");
  EXPECT_EQ(t[1].speaker, "user");
  EXPECT_EQ(t[2].agent, "cambridge");
  EXPECT_EQ(t.back().agent, "skylar");
  int reports = 0;
  for (const auto& e : t) reports += e.report.has_value();
  EXPECT_EQ(reports, 1);
  auto j = portal::to_json(t.back(), id);
  for (const char* key : {"session_id", "turn", "speaker", "text", "agent", "timestamp"}) EXPECT_TRUE(j.contains(key));
}

TEST(Portal, ExpiryKeepsTranscriptReadable) {
  auto p = fixtures::portal(shipped());
  auto id = p->create_session().session_id;
  p->post_utterance(id, "hello");
  EXPECT_EQ(p->expire_sessions(fixtures::kFixedMs + 1000, std::chrono::minutes(30)), 0u);
  EXPECT_EQ(p->expire_sessions(fixtures::kFixedMs + 31 * 60 * 1000, std::chrono::minutes(30)), 1u);
  EXPECT_EQ(p->live_sessions(), 0u);
  EXPECT_EQ(p->get_transcript(id).size(), 3u);
  EXPECT_THROW(p->post_utterance(id, "hi"), portal::UnknownSession);
  EXPECT_THROW(p->get_transcript("never-existed"), portal::UnknownSession);
}

TEST(Portal, TranscriptLogWritesNdjsonPerDay) {
  auto dir = std::filesystem::temp_directory_path() / ("dialport-log-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  std::filesystem::remove_all(dir);
  portal::PortalConfig config;
  config.log_dir = dir;
  portal::Portal p(shipped(), config, fixtures::fixed_clock);
  auto id = p.create_session().session_id;
  p.post_utterance(id, "hello");
  auto file = dir / "transcripts-2025-06-02.ndjson";
  ASSERT_TRUE(std::filesystem::exists(file));
  std::ifstream in(file);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("session_id"), id);
    ++lines;
  }
  EXPECT_EQ(lines, 3);
  std::filesystem::remove_all(dir);
}

TEST(PortalHttp, RoutesMapErrorsToStatusCodes) {
  auto p = fixtures::portal(shipped());
  auto server = portal::serve_portal(p, "127.0.0.1", 0);
  httplib::Client client("127.0.0.1", server->port());

  auto created = client.Post("/api/session", "", "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 200);
  auto id = nlohmann::json::parse(created->body).at("session_id").get<std::string>();

  auto turn = client.Post("/api/session/" + id + "/utterance", R"({"text": "what is the weather"})",
                          "application/json");
  ASSERT_TRUE(turn);
  EXPECT_EQ(turn->status, 200);
  EXPECT_EQ(nlohmann::json::parse(turn->body).at("reply"), "Which city are you interested in?");

  EXPECT_EQ(client.Post("/api/session/" + id + "/utterance", "{oops", "application/json")->status, 400);
  EXPECT_EQ(client.Post("/api/session/" + id + "/utterance", R"({"txt": 1})", "application/json")->status, 400);
  EXPECT_EQ(client.Post("/api/session/nope/utterance", R"({"text": "hi"})", "application/json")->status, 404);
  EXPECT_EQ(client.Get("/api/session/nope/transcript")->status, 404);

  client.Post("/api/session/" + id + "/utterance", R"({"text": "bye"})", "application/json");
  EXPECT_EQ(client.Post("/api/session/" + id + "/utterance", R"({"text": "hi"})", "application/json")->status, 410);

  auto transcript = client.Get("/api/session/" + id + "/transcript");
  ASSERT_TRUE(transcript);
  EXPECT_EQ(transcript->status, 200);
  server->stop();
}

TEST(Script, ParsesStepsAndRejectsMalformedLines) {
  std::istringstream ok("# demo\n> hello\n~ Hi\n@ skylar\n\n> bye\n");
  auto s = cli::parse_script(ok);
  ASSERT_EQ(s.steps.size(), 2u);
  EXPECT_EQ(s.steps[0].send, "hello");
  EXPECT_EQ(*s.steps[0].expect_contains, "Hi");
  EXPECT_EQ(*s.steps[0].expect_agent, "skylar");
  EXPECT_FALSE(s.steps[1].expect_contains);

  std::istringstream early("~ Hi\n");
  EXPECT_THROW(cli::parse_script(early), cli::ScriptParseError);
  std::istringstream twice("> a\n~ x\n~ y\n");
  try {
    cli::parse_script(twice);
    FAIL();
  } catch (const cli::ScriptParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(cli::parse_script(empty), cli::ScriptParseError);
}

TEST(Script, ShippedScriptReplays) {
  auto p = fixtures::portal(shipped());
  auto script = cli::load_script(fixtures::data_dir() / "scripts" / "tour.txt");
  auto report = cli::replay(script, *p);
  EXPECT_TRUE(report.passed());
  EXPECT_TRUE(report.steps.back().ended);
}
