#include <random>
#include <stdexcept>

#include "dmpc/sim.hpp"

namespace dmpc {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr int kAttempts = 20000;

}  // namespace

std::uint64_t trial_seed(std::uint64_t base, int n_agents, int trial) {
  std::uint64_t s = splitmix64(base);
  s = splitmix64(s ^ static_cast<std::uint64_t>(n_agents));
  return splitmix64(s ^ (static_cast<std::uint64_t>(trial) << 20));
}

ScenarioSpec random_transition_scenario(int n_agents, std::uint64_t seed,
                                        const EllipsoidSpec& e, const Vec3& lo,
                                        const Vec3& hi, double margin) {
  require(n_agents >= 1, "random_transition_scenario: need at least one agent");
  require(margin >= 0 && ((hi - lo).array() > 2 * margin).all(),
          "random_transition_scenario: workspace too small for the margin");
  e.validate();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Vec3 a = lo.array() + margin;
  const Vec3 span = (hi - lo).array() - 2 * margin;

  auto sample = [&](std::vector<Vec3>& pts) {
    for (int i = 0; i < n_agents; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
        const Vec3 p = a + Vec3(u01(rng), u01(rng), u01(rng)).cwiseProduct(span);
        placed = true;
        for (const auto& q : pts)
          if (scaled_distance(e, p, q) < e.r_min) {
            placed = false;
            break;
          }
        if (placed) pts.push_back(p);
      }
      if (!placed)
        throw std::runtime_error("random_transition_scenario: could not place agent " +
                                 std::to_string(i) + " of " + std::to_string(n_agents) +
                                 " (workspace too dense)");
    }
  };

  ScenarioSpec spec;
  spec.name = "random";
  spec.workspace_lo = lo;
  spec.workspace_hi = hi;
  spec.seed = seed;
  sample(spec.starts);
  sample(spec.goals);
  return spec;
}

ScenarioSpec hoop_scenario(int n_agents, const EllipsoidSpec& agent) {
  require(n_agents >= 2 && n_agents % 2 == 0 && n_agents <= 12,
          "hoop_scenario: agent count must be even, between 2 and 12");
  agent.validate();

  const Vec3 hoop(0.0, 0.0, 1.0);
  const double half_gap = 0.15;
  // Thinner walls let a crowded agent trade the soft obstacle row for
  // progress and tunnel through; 0.4 holds across the usual xi range.
  const double wall = 0.4;  // x semi-axis of every ellipsoid

  ScenarioSpec spec;
  spec.name = "hoop";
  spec.duration = 60.0;
  spec.xi = -1e3;
  spec.hoop_diameter = 0.85;

  // Obstacles carry the agent's r_min with theta = semi-axes / r_min, so
  // combining with the agent spec keeps the large axes and only inflates
  // the thin one. Inner faces sit half_gap from the hoop centre.
  auto add = [&](const Vec3& center, const Vec3& semi) {
    Obstacle o;
    o.center = center;
    o.ellipsoid.r_min = agent.r_min;
    o.ellipsoid.theta = semi / agent.r_min;
    spec.obstacles.push_back(o);
  };
  const double side = 1.2, cap = 0.6;
  add(hoop + Vec3(0, half_gap + side, 0), Vec3(wall, side, side));
  add(hoop - Vec3(0, half_gap + side, 0), Vec3(wall, side, side));
  add(hoop + Vec3(0, 0, half_gap + cap), Vec3(wall, side, cap));
  add(hoop - Vec3(0, 0, half_gap + cap), Vec3(wall, side, cap));

  // Two rows staggered in depth and laterally. Stacking the rows exactly
  // makes each column a mirror-symmetric vertical swap that the
  // linearized constraints cannot resolve.
  const int columns = n_agents / 2;
  for (int k = 0; k < columns; ++k)
    for (int row = 0; row < 2; ++row) {
      const double y = 0.5 * (k - 0.5 * (columns - 1)) + (row ? 0.25 : 0.0);
      const Vec3 start(row ? -1.0 : -1.3, y, row ? 1.5 : 0.5);
      spec.starts.push_back(start);
      spec.goals.push_back(2.0 * hoop - start);
    }
  return spec;
}

}  // namespace dmpc
