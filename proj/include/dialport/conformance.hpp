#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "dialport/protocol.hpp"
#include "dialport/transport.hpp"

// Black-box checks of a text remote agent against the NewCall/Next contract.
namespace dialport::conformance {

inline constexpr const char* kLifecycle = "lifecycle";
inline constexpr const char* kReportOnEnd = "report-on-end";
inline constexpr const char* kClosedSession = "closed-session-rejection";
inline constexpr const char* kS0Skip = "s0-skip";

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  const CheckResult* find(const std::string& name) const;
};

struct ConformanceOptions {
  /// Sent in order; afterwards `fallback` is repeated until the agent ends
  /// the session or `max_turns` is reached.
  std::vector<std::string> script = {"Pittsburgh", "thai", "cheap"};
  std::string fallback = "never mind";
  int max_turns = 20;
  std::string s0_slot = "location";
  protocol::SlotValue s0_value = {"Pittsburgh", 0.95};
  std::string user_id = "conformance";
};

/// Runs every check. Throws protocol::Unreachable when the agent cannot be
/// reached at all.
ConformanceReport run_conformance(std::shared_ptr<protocol::Transport> transport,
                                  const ConformanceOptions& options = {});

/// One `PASS name` / `FAIL name: detail` line per check.
void print_report(const ConformanceReport& report, std::ostream& out);

}  // namespace dialport::conformance
