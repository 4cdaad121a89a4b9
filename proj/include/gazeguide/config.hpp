#ifndef GAZEGUIDE_CONFIG_HPP
#define GAZEGUIDE_CONFIG_HPP

// One JSON document with sections "engine", "agent", "experiment" and
// "net". Missing keys keep their defaults; unknown keys are an error.

#include "gazeguide/simulation.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace gazeguide {

struct NetConfig {
  std::uint16_t port = 7070;
  std::uint16_t ws_port = 8080;
  std::string address = "0.0.0.0";
  std::string log_dir = "logs";
  std::size_t max_queued = 1000;
  double max_gaze_hz = 120.0;
};

struct AppConfig {
  ExperimentConfig experiment;
  NetConfig net;

  const EngineConfig& engine() const { return experiment.engine; }
  const AgentParams& agent() const { return experiment.agent; }
};

/// Throws ConfigError.
AppConfig parse_config(std::string_view json_text);
AppConfig load_config(const std::string& path);

/// Parses `{"pairs": [[[rx,ry,rz],[wx,wy,wz]], ...]}`. Throws ConfigError.
std::vector<std::pair<Vec3d, Vec3d>> parse_pairs(std::string_view json_text);

}  // namespace gazeguide

#endif  // GAZEGUIDE_CONFIG_HPP
