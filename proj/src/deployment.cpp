#include "dialport/deployment.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>

#include "json.hpp"

#include "dialport/transport.hpp"

#ifndef DIALPORT_DATA_DIR
#define DIALPORT_DATA_DIR "data"
#endif

namespace dialport {

namespace {

std::string today_iso() {
  const auto today = std::chrono::floor<std::chrono::days>(std::chrono::system_clock::now());
  const std::chrono::year_month_day ymd{today};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

template <typename Fn>
auto loading(const std::string& what, const std::filesystem::path& path, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(what + " " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("DIALPORT_DATA_DIR"); env && *env) return env;
  return DIALPORT_DATA_DIR;
}

std::shared_ptr<protocol::Transport> resolve_endpoint(const std::string& endpoint,
                                                      std::shared_ptr<const agents::RestaurantStore> restaurants,
                                                      protocol::Clock clock) {
  if (endpoint == "local://reference") {
    if (!restaurants) throw ConfigError("local://reference needs the restaurant fixture");
    auto server = std::make_shared<protocol::AgentServer>(agents::reference_remote_agent(restaurants, clock), clock);
    return protocol::local_transport("reference", std::move(server));
  }
  if (endpoint.rfind("http://", 0) == 0) return std::make_shared<protocol::HttpTransport>(endpoint);
  throw ConfigError("unsupported remote endpoint '" + endpoint + "'");
}

std::shared_ptr<const Deployment> load_deployment(const DeploymentOptions& options) {
  nlohmann::json doc;
  loading("deployment file", options.config, [&] {
    std::ifstream in(options.config);
    if (!in) throw ConfigError("cannot open deployment file " + options.config.string());
    doc = nlohmann::json::parse(in);
    if (!doc.is_object()) throw ConfigError("deployment file " + options.config.string() + " is not an object");
    return 0;
  });
  const auto base = options.config.parent_path();
  auto file = [&](const std::string& key) -> std::filesystem::path {
    if (auto it = options.files.find(key); it != options.files.end()) return it->second;
    if (!doc.contains(key) || !doc.at(key).is_string())
      throw ConfigError("deployment file " + options.config.string() + " names no '" + key + "' file");
    std::filesystem::path p = doc.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  };

  auto d = std::make_shared<Deployment>();
  d->portal_agent = doc.value("portal_agent", "skylar");
  d->reference_date = options.reference_date.value_or(doc.value("reference_date", ""));
  if (d->reference_date.empty()) d->reference_date = today_iso();
  if (!agents::is_iso_date(d->reference_date))
    throw ConfigError("reference date '" + d->reference_date + "' is not yyyy-mm-dd");

  const auto ontology_path = file("ontology");
  d->schema = loading("ontology", ontology_path, [&] { return ontology::load_ontology(ontology_path); });
  const auto tree_path = file("tree");
  d->tree = loading("task tree", tree_path,
                    [&] { return std::make_shared<const engine::TaskTree>(engine::load_tree(tree_path, &d->schema)); });
  const auto lexicon_path = file("lexicon");
  d->understander = loading("lexicon", lexicon_path, [&] {
    return std::make_shared<const nlu::LexiconUnderstander>(nlu::load_lexicon(lexicon_path));
  });
  const auto templates_path = file("templates");
  d->templates = loading("templates", templates_path, [&] { return nlg::load_templates(templates_path); });

  std::vector<chatbot::ExamplePair> pairs;
  std::vector<std::filesystem::path> pair_files;
  if (auto it = options.files.find("chat_pairs"); it != options.files.end()) {
    pair_files.push_back(it->second);
  } else {
    for (const auto& name : doc.value("chat_pairs", std::vector<std::string>{})) {
      std::filesystem::path p = name;
      pair_files.push_back(p.is_absolute() ? p : base / p);
    }
  }
  for (const auto& p : pair_files) {
    auto more = loading("chat pairs", p, [&] { return chatbot::load_pairs(p); });
    pairs.insert(pairs.end(), more.begin(), more.end());
  }
  if (!pairs.empty()) d->chatbot = std::make_shared<const chatbot::EmbeddingIndex>(chatbot::EmbeddingIndex::build(pairs));

  const auto weather_path = file("weather");
  d->weather = loading("weather fixture", weather_path, [&] {
    return std::make_shared<const agents::WeatherStore>(agents::WeatherStore::load(weather_path, d->reference_date));
  });
  const auto restaurants_path = file("restaurants");
  d->restaurants = loading("restaurant fixture", restaurants_path, [&] {
    return std::make_shared<const agents::RestaurantStore>(agents::RestaurantStore::load(restaurants_path));
  });

  engine::EngineResources resources;
  resources.knowledge["weather"] = d->weather;
  resources.knowledge["restaurants"] = d->restaurants;
  resources.chatbot = d->chatbot;
  for (const auto& name : d->schema.pool(ontology::Pool::Remote)) {
    auto endpoint = d->schema.concept_named(name).endpoint;
    if (auto it = options.remote_endpoints.find(name); it != options.remote_endpoints.end()) endpoint = it->second;
    d->remote_endpoints[name] = endpoint;
    auto transport = resolve_endpoint(endpoint, d->restaurants, options.clock);
    resources.remotes[name] = std::make_shared<protocol::AgentClient>(name, endpoint, std::move(transport));
  }
  for (const auto& [name, _] : options.remote_endpoints)
    if (!d->remote_endpoints.count(name)) throw ConfigError("endpoint given for unknown remote agent '" + name + "'");

  engine::EngineConfig config;
  config.portal_agent = d->portal_agent;
  config.capabilities = doc.value("capabilities", config.capabilities);
  config.chatbot_threshold = options.chatbot_threshold.value_or(doc.value("chatbot_threshold", config.chatbot_threshold));
  if (config.chatbot_threshold < 0 || config.chatbot_threshold > 1)
    throw ConfigError("chatbot threshold must be in [0, 1]");
  d->engine = loading("engine", options.config, [&] {
    return std::make_shared<const engine::DialogEngine>(d->tree, d->schema, resources, config);
  });

  for (const auto& [act, value_class] : emittable_acts(*d)) {
    if (act == DialogAct::Relay || act == DialogAct::Instruct) continue;
    if (!d->templates.lookup(act, value_class))
      throw ConfigError("templates " + templates_path.string() + " have no entry for " + to_string(act) +
                        (value_class.empty() ? "" : ":" + value_class));
  }
  return d;
}

std::vector<std::pair<DialogAct, std::string>> emittable_acts(const Deployment& deployment) {
  std::set<std::pair<DialogAct, std::string>> acts;
  std::set<const engine::TaskNode*> seen;
  std::function<void(const engine::TaskNode&)> walk = [&](const engine::TaskNode& node) {
    if (!seen.insert(&node).second) return;
    for (const auto& child : node.children) walk(*child);
    if (node.kind != engine::NodeKind::Agent) return;
    const auto& a = node.action;
    switch (a.kind) {
      case engine::PrimitiveKind::Emit:
        acts.insert({a.act, a.value_class});
        break;
      case engine::PrimitiveKind::Ask:
        acts.insert({DialogAct::Ask, a.concept_name});
        break;
      case engine::PrimitiveKind::InformFromKnowledge:
        acts.insert({DialogAct::Inform, a.concept_name});
        acts.insert({DialogAct::Inform, a.concept_name + "_none"});
        break;
      case engine::PrimitiveKind::CallRemote:
        acts.insert({DialogAct::Handoff, "remote"});
        acts.insert({DialogAct::Relay, "remote"});
        acts.insert({DialogAct::Inform, "remote_unavailable"});
        break;
      case engine::PrimitiveKind::Confirm:
        acts.insert({DialogAct::ConfirmImplicit, a.concept_name});
        acts.insert({DialogAct::ConfirmExplicit, a.concept_name});
        break;
    }
  };
  walk(*deployment.tree->root());
  for (const auto& d : deployment.tree->domains()) walk(*d);
  // Engine-generated acts: confirmations of entity-backed user concepts,
  // hand-back, and the non-understanding ladder.
  for (const auto& name : deployment.schema.pool(ontology::Pool::User)) {
    for (const auto& sub : deployment.schema.concept_named(name).subscriptions) {
      if (sub.entity_type.empty()) continue;
      acts.insert({DialogAct::ConfirmImplicit, name});
      acts.insert({DialogAct::ConfirmExplicit, name});
    }
  }
  if (!deployment.schema.pool(ontology::Pool::Remote).empty()) acts.insert({DialogAct::Handoff, "portal"});
  acts.insert({DialogAct::Rephrase, ""});
  acts.insert({DialogAct::Instruct, ""});
  acts.insert({DialogAct::Relay, "chatbot"});
  return {acts.begin(), acts.end()};
}

}  // namespace dialport
