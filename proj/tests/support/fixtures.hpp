#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "dialport/deployment.hpp"
#include "dialport/portal.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return DIALPORT_TEST_DATA_DIR; }

/// 2025-06-02T12:00:00Z, the shipped reference date.
inline constexpr std::int64_t kFixedMs = 1748865600000;

inline std::int64_t fixed_clock() { return kFixedMs; }

inline std::shared_ptr<const dialport::Deployment> shipped(dialport::protocol::Clock clock = fixed_clock) {
  dialport::DeploymentOptions options;
  options.config = data_dir() / "deployment.json";
  options.clock = std::move(clock);
  return dialport::load_deployment(options);
}

inline std::shared_ptr<dialport::portal::Portal> portal(std::shared_ptr<const dialport::Deployment> deployment,
                                                        std::uint64_t seed = 0) {
  dialport::portal::PortalConfig config;
  config.nlg_seed = seed;
  return std::make_shared<dialport::portal::Portal>(std::move(deployment), config, fixed_clock);
}

}  // namespace fixtures
