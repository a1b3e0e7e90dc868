#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dialport/error.hpp"
#include "dialport/portal.hpp"

namespace dialport::cli {

class ScriptParseError : public Error {
 public:
  ScriptParseError(std::size_t line, const std::string& message);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct ScriptStep {
  std::string send;
  std::optional<std::string> expect_contains;
  std::optional<std::string> expect_agent;
};

struct Script {
  std::vector<ScriptStep> steps;
};

/// `> user text`, then optional `~ substring` and `@ agent` lines for that
/// step. Blank lines and `#` comments are ignored.
Script parse_script(std::istream& in);
Script load_script(const std::filesystem::path& path);

struct StepResult {
  std::string reply;
  std::string active_agent;
  bool ended = false;
  std::vector<std::string> problems;
};

struct ReplayReport {
  std::string session_id;
  std::string greeting;
  std::vector<StepResult> steps;
  /// Indexes of steps whose expectations failed.
  std::vector<std::size_t> failed;

  bool passed() const { return failed.empty(); }
};

/// Runs the script in a fresh session. A turn rejected by the portal counts
/// as a failed step.
ReplayReport replay(const Script& script, portal::Portal& portal);

void print_replay(const ReplayReport& report, const Script& script, std::ostream& out);

/// Reads lines until end of input, printing `[agent] reply` per turn.
int repl(portal::Portal& portal, std::istream& in, std::ostream& out);

}  // namespace dialport::cli
