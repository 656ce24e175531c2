#include "dmpc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "dmpc/parallel.hpp"

namespace dmpc {

namespace {

constexpr double kTimeEps = 1e-9;

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool inside_box(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

}  // namespace

void ScenarioSpec::validate(const EllipsoidSpec& e) const {
  e.validate();
  require((workspace_lo.array() < workspace_hi.array()).all(),
          "scenario: workspace lower corner must be below the upper corner");
  require(!starts.empty(), "scenario: at least one agent required");
  require(starts.size() == goals.size(), "scenario: one goal per start required");
  require(duration > 0, "scenario: duration must be positive");
  require(sigma_p >= 0 && sigma_v >= 0, "scenario: noise levels must be non-negative");
  const int n = agents();
  for (int i = 0; i < n; ++i) {
    require(inside_box(starts[i], workspace_lo, workspace_hi),
            "scenario: start " + std::to_string(i) + " outside the workspace");
    require(inside_box(goals[i], workspace_lo, workspace_hi),
            "scenario: goal " + std::to_string(i) + " outside the workspace");
    for (int j = 0; j < i; ++j) {
      require(scaled_distance(e, starts[i], starts[j]) >= e.r_min,
              "scenario: starts " + std::to_string(j) + " and " + std::to_string(i) +
                  " closer than r_min");
      require(scaled_distance(e, goals[i], goals[j]) >= e.r_min,
              "scenario: goals " + std::to_string(j) + " and " + std::to_string(i) +
                  " closer than r_min");
    }
  }
  for (const auto& o : obstacles) o.ellipsoid.validate();
  for (const auto& d : disturbances) {
    require(d.agent >= 0 && d.agent < n, "scenario: disturbance names an unknown agent");
    require(d.time >= 0 && d.hold >= 0, "scenario: disturbance time and hold must be >= 0");
  }
}

double RunMetrics::mean_qp_ms() const { return mean(qp_ms); }
double RunMetrics::mean_cycle_ms() const { return mean(cycle_ms); }

double RunMetrics::p95_qp_ms() const {
  if (qp_ms.empty()) return 0.0;
  std::vector<double> v = qp_ms;
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(v.size())));
  const std::size_t k = std::clamp<std::size_t>(rank, 1, v.size()) - 1;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

std::optional<CollisionReport> collision_check(const std::vector<Vec3>& positions,
                                               const std::vector<Obstacle>& obstacles,
                                               const SimOptions& options,
                                               double* min_pair_distance) {
  const int n = static_cast<int>(positions.size());
  std::optional<CollisionReport> first;
  double dmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = scaled_distance(options.collision, positions[i], positions[j]);
      dmin = std::min(dmin, d);
      if (!first && d < options.collision.r_min) first = CollisionReport{i, j, d};
    }
  if (min_pair_distance) *min_pair_distance = dmin;
  if (first) return first;
  for (std::size_t o = 0; o < obstacles.size(); ++o) {
    const Vec3 semi = (obstacles[o].ellipsoid.theta * obstacles[o].ellipsoid.r_min)
                          .array()
                          .operator-(options.obstacle_shrink)
                          .max(0.01)
                          .matrix();
    for (int i = 0; i < n; ++i) {
      const double d = (positions[i] - obstacles[o].center).cwiseQuotient(semi).norm();
      if (d < 1.0) return CollisionReport{i, n + static_cast<int>(o), d};
    }
  }
  return std::nullopt;
}

RunMetrics run_scenario(const ScenarioSpec& spec, const PlannerConfig& cfg,
                        const SimOptions& options) {
  spec.validate(cfg.ellipsoid);
  PlannerConfig pc = cfg;
  if (spec.xi) pc.xi = *spec.xi;
  pc.workspace_lo = spec.workspace_lo;
  pc.workspace_hi = spec.workspace_hi;
  const Planner planner(pc);
  const LinearAgentModel world = make_second_order_model(pc.omega_n, pc.damping, pc.Ts);

  const int n = spec.agents();
  const int n_fine = pc.fine_per_cycle();
  const long n_cycles = static_cast<long>(std::ceil(spec.duration / pc.h - kTimeEps));

  std::vector<AgentRuntime> runtime;
  std::vector<HorizonPrediction> predictions;
  std::vector<Vec6> x(n);
  for (int i = 0; i < n; ++i) {
    runtime.push_back(planner.make_runtime(i, spec.starts[i], spec.goals[i], -1));
    predictions.push_back(runtime.back().prediction);
    x[i] << spec.starts[i], Vec3::Zero();
  }
  std::vector<QpSolver> solvers(n);
  std::vector<PlanOutput> outputs(n);
  std::vector<Vec6> measured(n);
  std::vector<double> held_until(n, -1.0);
  std::vector<Vec3> held_at(n, Vec3::Zero());
  std::vector<Disturbance> pending = spec.disturbances;
  std::stable_sort(pending.begin(), pending.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  std::size_t next_disturbance = 0;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  RunMetrics m;
  m.min_scaled_distance = std::numeric_limits<double>::infinity();
  m.distance.assign(n, {});
  double goal_since = -1.0, envelope_since = -1.0;
  bool done = false;
  std::vector<Vec3> positions(n);

  for (long c = 0; c < n_cycles && !done; ++c) {
    for (int i = 0; i < n; ++i) {
      measured[i] = x[i];
      for (int a = 0; a < 3; ++a) measured[i](a) += spec.sigma_p * gauss(rng);
      for (int a = 3; a < 6; ++a) measured[i](a) += spec.sigma_v * gauss(rng);
    }

    parallel_for(n, options.workers, [&](int i, int) {
      outputs[i] = planner.update_agent(runtime[i], measured, predictions, spec.obstacles,
                                        c, solvers[i]);
    });

    for (int i = 0; i < n; ++i) {
      const PlanOutput& out = outputs[i];
      if (!out.reset && c > 0)
        m.max_continuity_gap = std::max(
            m.max_continuity_gap, (out.plan.eval(0.0) - runtime[i].plan.eval(pc.h)).norm());
      if (out.reset) {
        ++m.resets;
        m.reset_events.push_back({c * pc.h, i});
      }
      if (out.status != QpStatus::optimal) ++m.qp_failures;
      m.qp_ms.push_back(out.qp_ms);
      m.cycle_ms.push_back(out.cycle_ms);
      runtime[i].plan = out.plan;
      runtime[i].prediction = out.prediction;
      predictions[i] = out.prediction;
    }
    ++m.cycles;

    for (int j = 0; j < n_fine && !done; ++j) {
      const double t = c * pc.h + j * pc.Ts;
      while (next_disturbance < pending.size() &&
             pending[next_disturbance].time <= t + kTimeEps) {
        const Disturbance& d = pending[next_disturbance++];
        x[d.agent].head<3>() += d.offset;
        if (d.hold > 0) {
          x[d.agent].tail<3>().setZero();
          held_until[d.agent] = d.time + d.hold;
          held_at[d.agent] = x[d.agent].head<3>();
        }
      }

      bool all_goal = true, all_envelope = true;
      for (int i = 0; i < n; ++i) {
        positions[i] = x[i].head<3>();
        const double dist = (positions[i] - spec.goals[i]).norm();
        m.distance[i].push_back(dist);
        all_goal = all_goal && dist <= options.goal_tolerance;
        all_envelope = all_envelope && dist <= options.envelope_tolerance;
        if (options.record_trajectory)
          m.trajectory.push_back({t, i, x[i], outputs[i].fine[j], outputs[i].reset});
      }
      m.times.push_back(t);
      m.simulated_time = t;

      double dmin = 0.0;
      const auto hit = collision_check(positions, spec.obstacles, options, &dmin);
      m.min_scaled_distance = std::min(m.min_scaled_distance, dmin);
      if (hit && !m.collision) {
        m.collision = true;
        m.obstacle_collision = hit->j >= n;
        m.collision_pair = std::make_pair(hit->i, hit->j);
        m.collision_time = t;
        if (options.stop_on_collision) done = true;
      }

      goal_since = all_goal ? (goal_since < 0 ? t : goal_since) : -1.0;
      envelope_since = all_envelope ? (envelope_since < 0 ? t : envelope_since) : -1.0;
      if (options.stop_on_settle && goal_since >= 0 && envelope_since >= 0 &&
          t - envelope_since >= options.settle_hold - kTimeEps)
        done = true;

      for (int i = 0; i < n; ++i) {
        if (t + pc.Ts <= held_until[i] + kTimeEps) {
          x[i] << held_at[i], Vec3::Zero();
          continue;
        }
        x[i] = world.A * x[i] + world.B * outputs[i].fine[j];
      }
    }
  }

  m.transit_time = goal_since;
  m.envelope_time = envelope_since;
  if (m.collision) {
    m.failure_reason = m.obstacle_collision ? "obstacle collision" : "agent collision";
  } else if (m.transit_time < 0) {
    m.failure_reason = "goals not reached";
  }
  m.success = !m.collision && m.transit_time >= 0 && m.transit_time <= spec.duration;
  return m;
}

void write_trajectory_csv(std::ostream& os, const RunMetrics& m) {
  os << "t,agent_id,px,py,pz,vx,vy,vz,ux,uy,uz,reset_flag\n";
  os << std::setprecision(10);
  for (const auto& r : m.trajectory) {
    os << r.t << ',' << r.agent;
    for (int k = 0; k < 6; ++k) os << ',' << r.x(k);
    for (int k = 0; k < 3; ++k) os << ',' << r.u(k);
    os << ',' << (r.reset ? 1 : 0) << '\n';
  }
}

void write_envelope_csv(std::ostream& os, const RunMetrics& m) {
  const std::size_t n = m.distance.size();
  os << "t,min_dist_m,mean_dist_m,max_dist_m";
  for (std::size_t i = 0; i < n; ++i) os << ",agent_" << i;
  os << '\n' << std::setprecision(8);
  for (std::size_t s = 0; s < m.times.size(); ++s) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = m.distance[i][s];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      sum += d;
    }
    os << m.times[s] << ',' << lo << ',' << sum / static_cast<double>(n) << ',' << hi;
    for (std::size_t i = 0; i < n; ++i) os << ',' << m.distance[i][s];
    os << '\n';
  }
}

void write_obstacles_csv(std::ostream& os, const ScenarioSpec& spec) {
  os << "id,cx,cy,cz,theta_x,theta_y,theta_z,r_min,semi_x,semi_y,semi_z\n";
  os << std::setprecision(10);
  for (std::size_t o = 0; o < spec.obstacles.size(); ++o) {
    const auto& ob = spec.obstacles[o];
    const Vec3 semi = ob.ellipsoid.theta * ob.ellipsoid.r_min;
    os << o << ',' << ob.center(0) << ',' << ob.center(1) << ',' << ob.center(2) << ','
       << ob.ellipsoid.theta(0) << ',' << ob.ellipsoid.theta(1) << ','
       << ob.ellipsoid.theta(2) << ',' << ob.ellipsoid.r_min << ',' << semi(0) << ','
       << semi(1) << ',' << semi(2) << '\n';
  }
}

void write_summary(std::ostream& os, const ScenarioSpec& spec, const PlannerConfig& cfg,
                   const RunMetrics& m) {
  os << "scenario:            " << spec.name << " (" << spec.agents() << " agents, seed "
     << spec.seed << ")\n";
  os << "method:              " << to_string(cfg.method) << '\n';
  os << "success:             " << (m.success ? "yes" : "no");
  if (!m.success) os << " (" << m.failure_reason << ')';
  os << '\n';
  if (m.collision && m.collision_pair)
    os << "collision:           agents " << m.collision_pair->first << " / "
       << m.collision_pair->second << " at t = " << m.collision_time << " s\n";
  os << "transit time:        " << m.transit_time << " s (0.10 m)\n";
  os << "envelope time:       " << m.envelope_time << " s (0.06 m)\n";
  os << "simulated time:      " << m.simulated_time << " s, " << m.cycles << " cycles\n";
  os << "min scaled distance: " << m.min_scaled_distance << " m\n";
  os << "resets:              " << m.resets << '\n';
  os << "qp failures:         " << m.qp_failures << '\n';
  os << "qp time:             mean " << m.mean_qp_ms() << " ms, p95 " << m.p95_qp_ms()
     << " ms\n";
  os << "cycle time:          mean " << m.mean_cycle_ms() << " ms\n";
}

}  // namespace dmpc
