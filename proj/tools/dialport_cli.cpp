#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dialport/agents.hpp"
#include "dialport/cli.hpp"
#include "dialport/conformance.hpp"
#include "dialport/deployment.hpp"
#include "dialport/portal.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
}

struct Common {
  std::string data_dir;
  std::string config;
  std::map<std::string, std::string> files;
  std::string today;
  double threshold = -1;
  std::vector<std::string> remotes;
  std::uint64_t seed = 0;
  int ttl_minutes = 30;
  std::string log_dir;
  bool verbose = false;
};

dialport::DeploymentOptions deployment_options(const Common& c) {
  dialport::DeploymentOptions o;
  const std::filesystem::path data = c.data_dir.empty() ? dialport::default_data_dir() : std::filesystem::path(c.data_dir);
  o.config = c.config.empty() ? data / "deployment.json" : std::filesystem::path(c.config);
  for (const auto& [key, path] : c.files)
    if (!path.empty()) o.files[key] = path;
  if (!c.today.empty()) o.reference_date = c.today;
  if (c.threshold >= 0) o.chatbot_threshold = c.threshold;
  for (const auto& r : c.remotes) {
    auto eq = r.find('=');
    if (eq == std::string::npos) throw dialport::ConfigError("--remote expects name=endpoint, got '" + r + "'");
    o.remote_endpoints[r.substr(0, eq)] = r.substr(eq + 1);
  }
  return o;
}

std::shared_ptr<dialport::portal::Portal> make_portal(const Common& c) {
  dialport::portal::PortalConfig config;
  config.nlg_seed = c.seed;
  config.ttl = std::chrono::minutes(c.ttl_minutes);
  config.log_dir = c.log_dir;
  return std::make_shared<dialport::portal::Portal>(dialport::load_deployment(deployment_options(c)), config);
}

void add_common(CLI::App& app, Common& c) {
  app.add_option("--data-dir", c.data_dir, "Directory holding deployment.json")->envname("DIALPORT_DATA_DIR");
  app.add_option("--config", c.config, "Deployment file (overrides --data-dir)")->envname("DIALPORT_CONFIG");
  for (const auto* key : {"ontology", "tree", "lexicon", "templates", "weather", "restaurants", "chat_pairs"}) {
    std::string flag = std::string("--") + key;
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    std::string env = std::string("DIALPORT_") + key;
    for (auto& ch : env) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    app.add_option(flag, c.files[key], std::string("Override the ") + key + " file")->envname(env);
  }
  app.add_option("--today", c.today, "Reference date for relative dates (yyyy-mm-dd)")->envname("DIALPORT_TODAY");
  app.add_option("--threshold", c.threshold, "Chatbot similarity threshold")->envname("DIALPORT_THRESHOLD");
  app.add_option("--remote", c.remotes, "Remote agent endpoint override, name=endpoint");
  app.add_option("--seed", c.seed, "NLG template seed")->envname("DIALPORT_SEED");
  app.add_option("--ttl-minutes", c.ttl_minutes, "Idle session lifetime")->envname("DIALPORT_TTL_MINUTES");
  app.add_option("--log-dir", c.log_dir, "Transcript log directory")->envname("DIALPORT_LOG_DIR");
  app.add_flag("-v,--verbose", c.verbose, "Debug logging");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialport: multi-agent dialog portal"};
  app.require_subcommand(1);
  Common common;
  add_common(app, common);

  auto* repl_cmd = app.add_subcommand("repl", "Talk to an in-process portal");

  auto* replay_cmd = app.add_subcommand("replay", "Run a scripted conversation and check expectations");
  std::string script_path;
  replay_cmd->add_option("script", script_path, "Script file")->required();

  auto* conf_cmd = app.add_subcommand("conformance", "Check a remote agent against the NewCall/Next contract");
  std::string endpoint;
  conf_cmd->add_option("endpoint", endpoint, "http://host:port or local://reference")->required();

  auto* serve_cmd = app.add_subcommand("serve", "Serve the portal HTTP API");
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string cors = "*";
  serve_cmd->add_option("--bind", bind, "Bind address")->envname("DIALPORT_BIND");
  serve_cmd->add_option("--port", port, "Port")->envname("DIALPORT_PORT");
  serve_cmd->add_option("--cors-origin", cors, "Allowed browser origin")->envname("DIALPORT_CORS_ORIGIN");

  auto* agent_cmd = app.add_subcommand("serve-agent", "Serve the reference restaurant agent over HTTP");
  int agent_port = 8090;
  agent_cmd->add_option("--bind", bind, "Bind address");
  agent_cmd->add_option("--port", agent_port, "Port");

  CLI11_PARSE(app, argc, argv);
  if (common.verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*repl_cmd) {
      auto portal = make_portal(common);
      return dialport::cli::repl(*portal, std::cin, std::cout);
    }
    if (*replay_cmd) {
      auto script = dialport::cli::load_script(script_path);
      auto portal = make_portal(common);
      auto report = dialport::cli::replay(script, *portal);
      dialport::cli::print_replay(report, script, std::cout);
      return report.passed() ? 0 : 1;
    }
    if (*conf_cmd) {
      std::shared_ptr<dialport::protocol::Transport> transport;
      if (endpoint.rfind("local://", 0) == 0) {
        auto deployment = dialport::load_deployment(deployment_options(common));
        transport = dialport::resolve_endpoint(endpoint, deployment->restaurants, dialport::protocol::system_clock_ms);
      } else {
        transport = std::make_shared<dialport::protocol::HttpTransport>(endpoint);
      }
      auto report = dialport::conformance::run_conformance(transport);
      dialport::conformance::print_report(report, std::cout);
      return report.all_passed() ? 0 : 1;
    }
    if (*serve_cmd) {
      auto portal = make_portal(common);
      auto server = dialport::portal::serve_portal(portal, bind, port, cors);
      spdlog::info("portal listening on {}:{}", bind, server->port());
      wait_for_signal();
      server->stop();
      return 0;
    }
    if (*agent_cmd) {
      auto deployment = dialport::load_deployment(deployment_options(common));
      auto server = dialport::protocol::serve_agent(dialport::agents::reference_remote_agent(deployment->restaurants),
                                                    bind, agent_port);
      spdlog::info("reference agent listening on {}:{}", bind, server->port());
      wait_for_signal();
      server->stop();
      return 0;
    }
  } catch (const dialport::ConfigError& e) {
    std::cerr << "ConfigError: " << e.what() << '\n';
    return 2;
  } catch (const dialport::cli::ScriptParseError& e) {
    std::cerr << "ScriptParseError: " << e.what() << '\n';
    return 2;
  } catch (const dialport::protocol::Unreachable& e) {
    std::cerr << "Unreachable: " << e.what() << '\n';
    return 3;
  } catch (const dialport::Error& e) {
    std::cerr << e.code() << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
