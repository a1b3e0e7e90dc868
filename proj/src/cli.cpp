#include "dialport/cli.hpp"

#include <fstream>

#include "dialport/text.hpp"

namespace dialport::cli {

ScriptParseError::ScriptParseError(std::size_t line, const std::string& message)
    : Error("ScriptParseError", "line " + std::to_string(line) + ": " + message), line_(line) {}

Script parse_script(std::istream& in) {
  Script script;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const char marker = line[0];
    auto body = text::trim(line.substr(1));
    switch (marker) {
      case '>':
        script.steps.push_back({body, std::nullopt, std::nullopt});
        break;
      case '~':
      case '@':
        if (script.steps.empty()) throw ScriptParseError(line_no, "expectation before the first '>' line");
        if (body.empty()) throw ScriptParseError(line_no, "empty expectation");
        if (marker == '~') {
          if (script.steps.back().expect_contains) throw ScriptParseError(line_no, "second '~' for one step");
          script.steps.back().expect_contains = body;
        } else {
          if (script.steps.back().expect_agent) throw ScriptParseError(line_no, "second '@' for one step");
          script.steps.back().expect_agent = body;
        }
        break;
      default:
        throw ScriptParseError(line_no, std::string("unknown line marker '") + marker + "'");
    }
  }
  if (script.steps.empty()) throw ScriptParseError(line_no, "script has no steps");
  return script;
}

Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScriptParseError(0, "cannot open script " + path.string());
  return parse_script(in);
}

ReplayReport replay(const Script& script, portal::Portal& portal) {
  ReplayReport report;
  auto created = portal.create_session();
  report.session_id = created.session_id;
  report.greeting = created.reply;
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const auto& step = script.steps[i];
    StepResult result;
    try {
      auto reply = portal.post_utterance(created.session_id, step.send);
      result.reply = reply.reply;
      result.active_agent = reply.active_agent;
      result.ended = reply.ended;
      if (step.expect_contains && result.reply.find(*step.expect_contains) == std::string::npos)
        result.problems.push_back("reply lacks \"" + *step.expect_contains + "\"");
      if (step.expect_agent && result.active_agent != *step.expect_agent)
        result.problems.push_back("agent is " + result.active_agent + ", expected " + *step.expect_agent);
    } catch (const Error& e) {
      result.problems.push_back(e.code() + ": " + e.what());
    }
    if (!result.problems.empty()) report.failed.push_back(i);
    report.steps.push_back(std::move(result));
  }
  return report;
}

void print_replay(const ReplayReport& report, const Script& script, std::ostream& out) {
  out << "[greeting] " << report.greeting << '\n';
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const auto& r = report.steps[i];
    out << "> " << script.steps[i].send << '\n' << '[' << r.active_agent << "] " << r.reply << '\n';
    for (const auto& p : r.problems) out << "  FAIL step " << i + 1 << ": " << p << '\n';
  }
  out << (report.passed() ? "PASS" : "FAIL") << ' ' << report.steps.size() - report.failed.size() << '/'
      << report.steps.size() << " steps\n";
}

int repl(portal::Portal& portal, std::istream& in, std::ostream& out) {
  auto created = portal.create_session();
  out << '[' << created.active_agent << "] " << created.reply << std::endl;
  std::string line;
  while (std::getline(in, line)) {
    try {
      auto reply = portal.post_utterance(created.session_id, line);
      out << '[' << reply.active_agent << "] " << reply.reply << std::endl;
      if (reply.ended) break;
    } catch (const Error& e) {
      out << "[error] " << e.code() << ": " << e.what() << std::endl;
    }
  }
  return 0;
}

}  // namespace dialport::cli
