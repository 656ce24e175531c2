#pragma once

// Cycle-synchronous swarm simulation: planners run once per h, the world
// is propagated at Ts under the emitted references.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmpc/collision.hpp"
#include "dmpc/common.hpp"
#include "dmpc/planner.hpp"

namespace dmpc {

/// At `time` the true position of `agent` is displaced by `offset`. With
/// hold > 0 the agent is also stopped and held there for `hold` seconds,
/// like a hand grabbing and releasing a vehicle.
struct Disturbance {
  double time = 0.0;
  int agent = 0;
  Vec3 offset = Vec3::Zero();
  double hold = 0.0;
};

struct ScenarioSpec {
  std::string name = "custom";
  Vec3 workspace_lo = Vec3(-1.5, -1.5, 0.0);
  Vec3 workspace_hi = Vec3(1.5, 1.5, 2.0);
  std::vector<Vec3> starts;
  std::vector<Vec3> goals;
  std::vector<Obstacle> obstacles;
  double duration = 20.0;
  double sigma_p = 0.005;  // m
  double sigma_v = 0.02;   // m/s
  std::vector<Disturbance> disturbances;
  std::uint64_t seed = 0;
  double hoop_diameter = 0.0;  // metadata only
  std::optional<double> xi;    // overrides the planner's violation weight

  int agents() const { return static_cast<int>(starts.size()); }

  /// Throws InvalidParameter on a malformed spec: starts/goals outside the
  /// workspace or closer than r_min under `e`.
  void validate(const EllipsoidSpec& e) const;
};

struct SimOptions {
  EllipsoidSpec collision{Vec3(1.0, 1.0, 2.25), 0.2};
  // Obstacle semi-axes are shrunk by this much for the physical check;
  // the planning margin r_min - r_coll plays the same role for agents.
  double obstacle_shrink = 0.1;
  double goal_tolerance = 0.10;
  double envelope_tolerance = 0.06;
  double settle_hold = 1.0;  // stop once every agent stayed settled this long
  bool stop_on_settle = true;
  bool stop_on_collision = true;
  bool record_trajectory = false;
  int workers = 1;
};

struct TrajectoryRow {
  double t = 0.0;
  int agent = 0;
  Vec6 x = Vec6::Zero();
  Vec3 u = Vec3::Zero();
  bool reset = false;
};

struct ResetEvent {
  double t = 0.0;
  int agent = 0;
};

struct RunMetrics {
  bool success = false;
  bool collision = false;
  bool obstacle_collision = false;
  std::string failure_reason;
  std::optional<std::pair<int, int>> collision_pair;  // agent ids; obstacles offset by n
  double collision_time = 0.0;

  double transit_time = -1.0;   // all within goal_tolerance from here on; < 0: never
  double envelope_time = -1.0;  // same with envelope_tolerance
  double simulated_time = 0.0;
  double min_scaled_distance = 0.0;  // agent pairs, collision ellipsoid
  double max_continuity_gap = 0.0;   // |u jump| at cycle boundaries without reset

  int cycles = 0;
  int resets = 0;
  int qp_failures = 0;
  std::vector<ResetEvent> reset_events;
  std::vector<double> qp_ms;     // one entry per agent per cycle
  std::vector<double> cycle_ms;

  std::vector<double> times;                  // Ts samples
  std::vector<std::vector<double>> distance;  // [agent][sample] to goal
  std::vector<TrajectoryRow> trajectory;      // when recorded

  double mean_qp_ms() const;
  double p95_qp_ms() const;
  double mean_cycle_ms() const;
};

/// Scaled separation check between all agent pairs and against obstacles.
struct CollisionReport {
  int i = 0, j = 0;  // j >= n for obstacle j - n
  double distance = 0.0;
};
std::optional<CollisionReport> collision_check(const std::vector<Vec3>& positions,
                                               const std::vector<Obstacle>& obstacles,
                                               const SimOptions& options,
                                               double* min_pair_distance = nullptr);

RunMetrics run_scenario(const ScenarioSpec& spec, const PlannerConfig& cfg,
                        const SimOptions& options = {});

/// Uniform starts and goals with pairwise scaled spacing >= r_min, at least
/// `margin` inside the workspace. Deterministic per seed.
ScenarioSpec random_transition_scenario(int n_agents, std::uint64_t seed,
                                        const EllipsoidSpec& e,
                                        const Vec3& lo = Vec3(-1.5, -1.5, 0.0),
                                        const Vec3& hi = Vec3(1.5, 1.5, 2.0),
                                        double margin = 0.1);

/// Four intersecting ellipsoids in the x = 0 plane leave a 0.30 x 0.30 m
/// window for agent centres around the hoop centre (0, 0, 1). Agents
/// start at x = -1 and fly to the point mirrored through the hoop centre.
ScenarioSpec hoop_scenario(int n_agents, const EllipsoidSpec& agent);

/// Per-seed seed for (base, count, trial); shared by every method.
std::uint64_t trial_seed(std::uint64_t base, int n_agents, int trial);

void write_trajectory_csv(std::ostream& os, const RunMetrics& m);
/// t, min, mean, max distance to goal over agents, plus one column per agent.
void write_envelope_csv(std::ostream& os, const RunMetrics& m);
void write_obstacles_csv(std::ostream& os, const ScenarioSpec& spec);
void write_summary(std::ostream& os, const ScenarioSpec& spec, const PlannerConfig& cfg,
                   const RunMetrics& m);

}  // namespace dmpc
