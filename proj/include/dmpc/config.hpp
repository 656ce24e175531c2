#pragma once

// JSON configuration with sections {model, planner, scenario, noise,
// benchmark}. Every key is optional; missing keys keep the defaults and
// unknown keys are rejected so that typos do not pass silently.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmpc/planner.hpp"
#include "dmpc/sim.hpp"

namespace dmpc {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ScenarioConfig {
  std::string type = "random";  // random | hoop | swap | explicit
  int agents = 10;
  std::uint64_t seed = 7;
  double duration = 20.0;
  Vec3 workspace_lo = Vec3(-1.5, -1.5, 0.0);
  Vec3 workspace_hi = Vec3(1.5, 1.5, 2.0);
  double margin = 0.1;
  std::vector<Vec3> starts;  // explicit only
  std::vector<Vec3> goals;
  std::vector<Obstacle> obstacles;  // added to any scenario type
  std::vector<Disturbance> disturbances;
  SimOptions sim;
};

struct NoiseConfig {
  double sigma_p = 0.005;
  double sigma_v = 0.02;
};

struct BenchmarkSpec {
  std::vector<Method> methods{Method::bvc, Method::bvc_soft, Method::ondemand_state,
                              Method::ondemand_input};
  std::vector<int> counts{10, 20, 30};
  int trials = 20;
  std::uint64_t base_seed = 1;
  std::string output_dir = "results";
  std::vector<int> runtime_counts{10, 20, 30, 40};
  int runtime_trials = 3;

  void validate() const;
};

struct AppConfig {
  PlannerConfig planner;
  ScenarioConfig scenario;
  NoiseConfig noise;
  BenchmarkSpec benchmark;

  void validate() const;  // throws ConfigError
};

nlohmann::ordered_json to_json(const AppConfig& cfg);
AppConfig config_from_json(const nlohmann::json& j);  // throws ConfigError
AppConfig load_config(const std::string& path);       // throws ConfigError

/// Builds the scenario described by the config (noise included).
ScenarioSpec make_scenario(const AppConfig& cfg);

}  // namespace dmpc
