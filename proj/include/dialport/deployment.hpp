#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dialport/agent_server.hpp"
#include "dialport/agents.hpp"
#include "dialport/chatbot.hpp"
#include "dialport/engine.hpp"
#include "dialport/error.hpp"
#include "dialport/nlg.hpp"
#include "dialport/nlu.hpp"
#include "dialport/ontology.hpp"
#include "dialport/task_tree.hpp"

namespace dialport {

DIALPORT_DEFINE_ERROR(ConfigError);

/// Where the configuration comes from. Relative paths inside the deployment
/// file resolve against the file's directory.
struct DeploymentOptions {
  std::filesystem::path config = "deployment.json";
  /// Replaces a file named in the deployment file: ontology, tree, lexicon,
  /// templates, weather, restaurants, chat_pairs.
  std::map<std::string, std::filesystem::path> files;
  std::optional<std::string> reference_date;
  std::optional<double> chatbot_threshold;
  /// Replaces a RemotePool concept's endpoint.
  std::map<std::string, std::string> remote_endpoints;
  /// Clock for the in-process reference agent's report timestamps.
  protocol::Clock clock = protocol::system_clock_ms;
};

/// Everything a portal needs, loaded and cross-validated.
struct Deployment {
  std::string portal_agent;
  std::string reference_date;
  ontology::Ontology schema;
  std::shared_ptr<const engine::TaskTree> tree;
  std::shared_ptr<const nlu::LexiconUnderstander> understander;
  nlg::TemplateSet templates;
  std::shared_ptr<const chatbot::EmbeddingIndex> chatbot;
  std::shared_ptr<const agents::WeatherStore> weather;
  std::shared_ptr<const agents::RestaurantStore> restaurants;
  std::shared_ptr<const engine::DialogEngine> engine;
  /// Endpoint per remote agent, after overrides.
  std::map<std::string, std::string> remote_endpoints;
};

/// `local://reference` resolves to the built-in reference restaurant agent;
/// `http://...` to an HttpTransport.
std::shared_ptr<protocol::Transport> resolve_endpoint(const std::string& endpoint,
                                                      std::shared_ptr<const agents::RestaurantStore> restaurants,
                                                      protocol::Clock clock);

/// Throws ConfigError naming the offending file.
std::shared_ptr<const Deployment> load_deployment(const DeploymentOptions& options);

/// Directory of the shipped configuration: $DIALPORT_DATA_DIR if set,
/// otherwise the compiled-in source data directory.
std::filesystem::path default_data_dir();

/// Every (act, value-class) the shipped tree and engine can emit.
std::vector<std::pair<DialogAct, std::string>> emittable_acts(const Deployment& deployment);

}  // namespace dialport
