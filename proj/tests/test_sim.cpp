#include <doctest.h>

#include <set>
#include <sstream>

#include "dmpc/sim.hpp"

using namespace dmpc;

TEST_CASE("trial seeds are deterministic and distinct") {
  CHECK(trial_seed(1, 20, 3) == trial_seed(1, 20, 3));
  std::set<std::uint64_t> seen;
  for (int n : {10, 20, 30})
    for (int t = 0; t < 20; ++t) seen.insert(trial_seed(1, n, t));
  CHECK(seen.size() == 60);
  CHECK(trial_seed(2, 10, 0) != trial_seed(1, 10, 0));
}

TEST_CASE("random transitions respect spacing and margins") {
  const EllipsoidSpec e;
  const auto a = random_transition_scenario(30, 42, e);
  const auto b = random_transition_scenario(30, 42, e);
  REQUIRE(a.agents() == 30);
  for (int i = 0; i < 30; ++i) {
    CHECK(a.starts[i] == b.starts[i]);
    CHECK(a.goals[i] == b.goals[i]);
    for (const auto* pts : {&a.starts, &a.goals}) {
      const Vec3& p = (*pts)[i];
      CHECK((p.array() >= Vec3(-1.4, -1.4, 0.1).array()).all());
      CHECK((p.array() <= Vec3(1.4, 1.4, 1.9).array()).all());
      for (int j = 0; j < i; ++j) CHECK(scaled_distance(e, p, (*pts)[j]) >= e.r_min);
    }
  }
  CHECK_NOTHROW(a.validate(e));
  CHECK(random_transition_scenario(30, 43, e).starts[0] != a.starts[0]);
  CHECK_THROWS(random_transition_scenario(500, 1, e, Vec3(0, 0, 0), Vec3(1, 1, 1)));
}

TEST_CASE("scenario validation") {
  const EllipsoidSpec e;
  ScenarioSpec s;
  s.starts = {Vec3(0, 0, 1), Vec3(0.1, 0, 1)};
  s.goals = {Vec3(1, 0, 1), Vec3(-1, 0, 1)};
  CHECK_THROWS_AS(s.validate(e), InvalidParameter);
  s.starts[1] = Vec3(0, 0, 3);
  CHECK_THROWS_AS(s.validate(e), InvalidParameter);
  s.starts[1] = Vec3(0.5, 0, 1);
  CHECK_NOTHROW(s.validate(e));
  s.goals.pop_back();
  CHECK_THROWS_AS(s.validate(e), InvalidParameter);
}

TEST_CASE("collision check against agents and shrunk obstacles") {
  const SimOptions opt;  // theta (1, 1, 2.25), r 0.2
  CHECK(collision_check({Vec3(0, 0, 1), Vec3(0.1, 0, 1)}, {}, opt));
  CHECK(collision_check({Vec3(0, 0, 1), Vec3(0, 0, 1.4)}, {}, opt));  // 0.4 / 2.25 < 0.2
  double dmin = 0;
  CHECK_FALSE(collision_check({Vec3(0, 0, 1), Vec3(0, 0, 1.5)}, {}, opt, &dmin));
  CHECK(dmin == doctest::Approx(0.5 / 2.25));

  Obstacle o;  // semi-axes 0.5 before shrinking, 0.4 after
  o.center = Vec3(0, 0, 1);
  o.ellipsoid.theta = Vec3::Constant(0.5 / 0.3);
  o.ellipsoid.r_min = 0.3;
  const auto hit = collision_check({Vec3(2, 0, 1), Vec3(0.39, 0, 1)}, {o}, opt);
  REQUIRE(hit);
  CHECK(hit->i == 1);
  CHECK(hit->j == 2);
  CHECK_FALSE(collision_check({Vec3(2, 0, 1), Vec3(0.41, 0, 1)}, {o}, opt));
}

TEST_CASE("hoop leaves a 0.30 m window for agent centres") {
  const EllipsoidSpec agent;
  const auto spec = hoop_scenario(10, agent);
  REQUIRE(spec.obstacles.size() == 4);
  CHECK(spec.agents() == 10);
  CHECK_NOTHROW(spec.validate(agent));
  const Vec3 hoop(0, 0, 1);
  auto clearance = [&](const Vec3& p) {
    double d = 1e9;
    for (const auto& o : spec.obstacles)
      d = std::min(d, scaled_distance(combine(agent, o.ellipsoid), p, o.center));
    return d;
  };
  CHECK(clearance(hoop) > agent.r_min);
  for (const Vec3 edge : {Vec3(0, 0.15, 0), Vec3(0, -0.15, 0), Vec3(0, 0, 0.15), Vec3(0, 0, -0.15)})
    CHECK(clearance(hoop + edge) == doctest::Approx(agent.r_min));
  CHECK(clearance(hoop + Vec3(0, 0.2, 0)) < agent.r_min);
  for (int i = 0; i < spec.agents(); ++i) {
    CHECK(spec.starts[i].x() < -0.9);
    CHECK((spec.starts[i] + spec.goals[i] - 2 * hoop).norm() < 1e-12);
    CHECK(clearance(spec.starts[i]) > agent.r_min);
  }
  CHECK_THROWS_AS(hoop_scenario(7, agent), InvalidParameter);
}

TEST_CASE("single agent reaches its goal") {
  ScenarioSpec s;
  s.starts = {Vec3(-1, -0.5, 0.5)};
  s.goals = {Vec3(1, 0.5, 1.5)};
  s.duration = 10;
  s.seed = 3;
  SimOptions opt;
  opt.record_trajectory = true;
  const auto m = run_scenario(s, PlannerConfig{}, opt);
  CHECK(m.success);
  CHECK(m.transit_time > 0);
  CHECK(m.transit_time < 6);
  CHECK(m.resets == 0);
  CHECK(m.qp_failures == 0);
  CHECK(m.max_continuity_gap < 1e-6);
  CHECK(m.trajectory.size() == m.times.size());

  std::ostringstream env;
  write_envelope_csv(env, m);
  CHECK(env.str().rfind("t,min_dist_m,mean_dist_m,max_dist_m,agent_0\n", 0) == 0);
}

TEST_CASE("hovering under noise never resets") {
  ScenarioSpec s;
  s.starts = {Vec3(0, 0, 1)};
  s.goals = s.starts;
  s.duration = 20;  // 100 cycles
  s.seed = 11;
  SimOptions opt;
  opt.stop_on_settle = false;
  const auto m = run_scenario(s, PlannerConfig{}, opt);
  CHECK(m.cycles == 100);
  CHECK(m.resets == 0);
}

TEST_CASE("a push triggers a reset and the agent recovers") {
  ScenarioSpec s;
  s.starts = {Vec3(-1, 0, 1)};
  s.goals = {Vec3(1, 0, 1)};
  s.duration = 15;
  s.seed = 5;
  s.disturbances = {{1.0, 0, Vec3(0, 0.3, 0), 0.2}};
  const auto m = run_scenario(s, PlannerConfig{}, SimOptions{});
  REQUIRE_FALSE(m.reset_events.empty());
  CHECK(m.reset_events.front().t >= 1.0);
  CHECK(m.reset_events.front().t <= 1.0 + 2 * 0.2 + 1e-9);
  CHECK(m.success);
}
