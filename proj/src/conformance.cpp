#include "dialport/conformance.hpp"

#include "dialport/agent_client.hpp"

namespace dialport::conformance {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", \"" : "\"") + items[i] + "\"";
  return out + "]";
}

/// Sends `next` on a token that should be rejected; returns a description
/// of what actually happened, empty when it was SessionUnknown.
std::string expect_session_unknown(protocol::Transport& transport, const std::string& token) {
  auto response = transport.post("/next", protocol::encode(protocol::NextRequest{token, "hello"}).dump());
  if (response.status == 200) return "token '" + token + "' was answered normally";
  try {
    protocol::raise_for_status(response);
  } catch (const protocol::SessionUnknown&) {
    return "";
  } catch (const Error& e) {
    return "token '" + token + "' gave " + e.code() + " instead of SessionUnknown";
  }
  return "unreachable";
}

}  // namespace

bool ConformanceReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return !checks.empty();
}

const CheckResult* ConformanceReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

ConformanceReport run_conformance(std::shared_ptr<protocol::Transport> transport, const ConformanceOptions& options) {
  ConformanceReport report;
  protocol::AgentClient client("agent-under-test", transport->describe(), transport);

  // Drive one full session.
  CheckResult lifecycle{kLifecycle, false, ""};
  CheckResult report_check{kReportOnEnd, false, ""};
  CheckResult closed{kClosedSession, false, ""};
  std::string plain_first;
  std::string token;
  try {
    auto [session, first] = client.new_call(options.user_id, {});
    plain_first = first;
    token = session.session_token;
    std::vector<std::string> sent;
    int ended_count = 0;
    std::optional<protocol::NextResponse> last;
    for (int turn = 0; turn < options.max_turns && ended_count == 0; ++turn) {
      const auto& utt = static_cast<std::size_t>(turn) < options.script.size() ? options.script[turn] : options.fallback;
      auto response = client.next(session, utt);
      sent.push_back(utt);
      if (response.ended) ++ended_count;
      last = std::move(response);
    }

    if (ended_count != 1) {
      lifecycle.detail = "session did not end within " + std::to_string(options.max_turns) + " turns";
    } else {
      auto after = transport->post("/next", protocol::encode(protocol::NextRequest{token, "hello again"}).dump());
      if (after.status == 200) {
        lifecycle.detail = "agent answered next after the end-of-session flag";
      } else {
        lifecycle.passed = true;
        lifecycle.detail = std::to_string(sent.size()) + " turns, ended once";
      }
    }

    if (!last || !last->ended) {
      report_check.detail = "no end-of-session reply to inspect";
    } else if (!last->report) {
      report_check.detail = "ended without a dialog report";
    } else if (last->report->extras.is_object() && last->report->extras.value("substituted", false)) {
      report_check.detail = "report was substituted by the server kit, the agent sent none";
    } else if (last->report->session_token != token) {
      report_check.detail = "report token '" + last->report->session_token + "' != session token '" + token + "'";
    } else if (last->report->user_texts() != sent) {
      report_check.detail = "report user turns " + join(last->report->user_texts()) + " != sent " + join(sent);
    } else {
      report_check.passed = true;
      report_check.detail = std::to_string(sent.size()) + " user turns match the report";
    }

    if (ended_count == 1) {
      auto problem = expect_session_unknown(*transport, token);
      if (problem.empty()) problem = expect_session_unknown(*transport, "bogus-" + token + "-never-issued");
      closed.passed = problem.empty();
      closed.detail = problem.empty() ? "closed and bogus tokens rejected" : problem;
    } else {
      closed.detail = "session never closed";
    }
  } catch (const protocol::Unreachable&) {
    throw;
  } catch (const Error& e) {
    const auto detail = std::string("protocol failure: ") + e.what();
    if (lifecycle.detail.empty()) lifecycle.detail = detail;
    if (report_check.detail.empty()) report_check.detail = detail;
    if (closed.detail.empty()) closed.detail = detail;
  }

  CheckResult skip{kS0Skip, false, ""};
  try {
    protocol::InitialState s0;
    s0.user_id = options.user_id;
    s0.known_slots[options.s0_slot] = options.s0_value;
    auto [session, first] = client.new_call(options.user_id, s0);
    if (first == plain_first) {
      skip.detail = "first reply ignores s0: \"" + first + "\"";
    } else {
      skip.passed = true;
      skip.detail = "\"" + plain_first + "\" -> \"" + first + "\"";
    }
    try {
      client.next(session, options.fallback);
    } catch (const Error&) {
    }
  } catch (const protocol::Unreachable&) {
    throw;
  } catch (const Error& e) {
    skip.detail = std::string("protocol failure: ") + e.what();
  }

  report.checks = {lifecycle, report_check, closed, skip};
  return report;
}

void print_report(const ConformanceReport& report, std::ostream& out) {
  for (const auto& c : report.checks)
    out << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << '\n';
}

}  // namespace dialport::conformance
