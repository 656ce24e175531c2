#include "dmpc/planner.hpp"

#include <chrono>
#include <cmath>

namespace dmpc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::bvc: return "bvc";
    case Method::bvc_soft: return "bvc-soft";
    case Method::ondemand_state: return "ondemand-state";
    case Method::ondemand_input: return "ondemand-input";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::bvc, Method::bvc_soft, Method::ondemand_state,
                   Method::ondemand_input})
    if (name == to_string(m)) return m;
  throw InvalidParameter("unknown method '" + name +
                         "' (expected bvc, bvc-soft, ondemand-state or ondemand-input)");
}

std::vector<double> PlannerConfig::durations() const {
  return std::vector<double>(segments, (K - 1) * h / segments);
}

int PlannerConfig::fine_per_cycle() const {
  return static_cast<int>(std::lround(h / Ts));
}

void PlannerConfig::validate() const {
  require(omega_n > 0 && damping > 0, "planner: omega_n and damping must be positive");
  require(h > 0 && Ts > 0 && Ts <= h, "planner: need 0 < Ts <= h");
  require(std::abs(h / Ts - std::round(h / Ts)) < 1e-9, "planner: Ts must divide h");
  require(K >= 2, "planner: K must be at least 2");
  require(segments >= 1 && degree >= 1, "planner: invalid spline shape");
  require(continuity >= 0 && continuity <= 2 && continuity < degree,
          "planner: continuity order must be in 0..2 and below the degree");
  require(degree >= 3, "planner: degree must allow pinning value, velocity and acceleration");
  require(kappa >= 0 && kappa < K, "planner: kappa must be < K");
  require(qk > 0, "planner: qk must be positive");
  require(static_cast<int>(alphas.size()) <= degree + 1, "planner: too many energy weights");
  for (double a : alphas) require(a >= 0, "planner: energy weights must be non-negative");
  require(zeta > 0, "planner: zeta must be positive");
  require(acc_limit > 0, "planner: acc_limit must be positive");
  require((workspace_lo.array() < workspace_hi.array()).all(),
          "planner: workspace lower corner must be below the upper corner");
  require(f_min < f_max, "planner: f_min must be below f_max");
  require(eps_act > 0, "planner: eps_act must be positive");
  require(bvc_radius > 0, "planner: bvc_radius must be positive");
  require(ondemand_shift == 0 || ondemand_shift == 1, "planner: ondemand_shift must be 0 or 1");
  ellipsoid.validate();
}

Vec3 PlannedReference::eval(double t, int c) const {
  const double tau = t + offset;
  const double end = spline.total_duration();
  if (tau > end) return c == 0 ? spline.eval(end, 0) : Vec3::Zero();
  return spline.eval(tau, c);
}

Vec3 activation(const Vec6& measured, const Vec3& u_now, double eps_act) {
  require(eps_act > 0, "activation: eps_act must be positive");
  Vec3 f;
  for (int n = 0; n < 3; ++n) {
    const double e = measured(n) - u_now(n);
    const double v = measured(3 + n);
    const double sgn = v >= 0.0 ? 1.0 : -1.0;
    f(n) = std::pow(e, 5) / -(v + sgn * eps_act);
  }
  return f;
}

bool within_activation_bounds(const Vec3& f, double f_min, double f_max) {
  return (f.array() > f_min).all() && (f.array() < f_max).all();
}

InitialReference choose_initial_reference(const Vec6& measured,
                                          const PlannedReference& previous,
                                          const Vec3& f, double h, double f_min,
                                          double f_max) {
  InitialReference init;
  if (within_activation_bounds(f, f_min, f_max)) {
    for (int c = 0; c < 3; ++c) init.derivatives[c] = previous.eval(h, c);
    return init;
  }
  init.reset = true;
  init.derivatives = {measured.head<3>(), measured.tail<3>(), Vec3::Zero()};
  return init;
}

Planner::Planner(PlannerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  model_ = make_second_order_model(cfg_.omega_n, cfg_.damping, cfg_.h);
  const auto durations = cfg_.durations();
  basis_ = build_basis(cfg_.segments, cfg_.degree, durations, cfg_.h, cfg_.K, 2);
  sp_ = build_stacked(model_, cfg_.K);
  const MatX& Phi = basis_.sample[0];
  positions_ = sp_.Psel * (sp_.Lambda * Phi);
  const int rows = 3 * (cfg_.kappa + 1);
  error_rows_ = positions_.bottomRows(rows);

  const QuadraticCost err = error_cost(sp_, Vec6::Zero(), Vec3::Zero(), cfg_.kappa, cfg_.qk, Phi);
  const QuadraticCost energy = energy_cost(basis_, cfg_.alphas);
  H_control_ = err.H + energy.H;

  continuity_ = continuity_constraints(cfg_.segments, cfg_.degree, durations, cfg_.continuity);
  // Sample 0 is pinned by the initial reference; bounding it as well could
  // make a reset from a fast measured state infeasible.
  const Vec3 a(cfg_.acc_limit, cfg_.acc_limit, cfg_.acc_limit);
  limits_.push_back(limit_constraints(basis_, 2, Vec3(-a), a, 1));
  if (cfg_.limit_workspace)
    limits_.push_back(limit_constraints(basis_, 0, cfg_.workspace_lo, cfg_.workspace_hi, 1));
}

HorizonPrediction Planner::static_prediction(int id, const Vec3& p, long stamp) const {
  HorizonPrediction pred;
  pred.agent_id = id;
  pred.stamp = stamp;
  pred.positions.assign(cfg_.K, p);
  pred.inputs.assign(cfg_.K, p);
  pred.ellipsoid = cfg_.ellipsoid;
  return pred;
}

AgentRuntime Planner::make_runtime(int id, const Vec3& start, const Vec3& goal,
                                   long stamp) const {
  AgentRuntime rt;
  rt.id = id;
  rt.goal = goal;
  rt.plan.spline = BezierSpline::constant(cfg_.segments, cfg_.degree, cfg_.durations(), start);
  rt.prediction = static_prediction(id, start, stamp);
  return rt;
}

HorizonPrediction Planner::predict(int id, const Vec6& x0, const PlannedReference& ref,
                                   long stamp) const {
  const int K = cfg_.K;
  VecX U(3 * K);
  for (int k = 0; k < K; ++k) U.segment<3>(3 * k) = ref.eval(k * cfg_.h);
  const VecX X = predict_states(sp_, x0, U);

  HorizonPrediction pred;
  pred.agent_id = id;
  pred.stamp = stamp;
  pred.ellipsoid = cfg_.ellipsoid;
  pred.positions.resize(K);
  pred.inputs.resize(K);
  pred.positions[0] = x0.head<3>();
  for (int k = 0; k < K; ++k) {
    pred.inputs[k] = U.segment<3>(3 * k);
    if (k > 0) pred.positions[k] = X.segment<3>(6 * (k - 1));
  }
  return pred;
}

std::vector<HalfspaceConstraint> Planner::collision_constraints(
    const AgentRuntime& rt, std::span<const Vec6> measured,
    std::span<const HorizonPrediction> predictions,
    std::span<const Obstacle> obstacles) const {
  const EllipsoidSpec& e = cfg_.ellipsoid;
  const Vec3 pi = measured[rt.id].head<3>();
  const int n_agents = static_cast<int>(measured.size());
  std::vector<HalfspaceConstraint> out;

  if (cfg_.method == Method::bvc || cfg_.method == Method::bvc_soft) {
    const bool soft = cfg_.method == Method::bvc_soft;
    for (int j = 0; j < n_agents; ++j) {
      if (j == rt.id) continue;
      const Vec3 pj = measured[j].head<3>();
      if ((pi - pj).norm() > cfg_.bvc_radius) continue;
      try {
        out.push_back(bvc_constraint(pi, pj, e, false, soft));
        out.back().neighbor_id = j;
      } catch (const DegenerateGeometry&) {
        // Coincident measurements carry no separating direction.
      }
    }
    for (std::size_t o = 0; o < obstacles.size(); ++o) {
      out.push_back(bvc_constraint(pi, obstacles[o].center,
                                   combine(e, obstacles[o].ellipsoid), true, soft));
      out.back().neighbor_id = n_agents + static_cast<int>(o);
    }
    return out;
  }

  const AvoidanceSpace space = cfg_.method == Method::ondemand_state
                                   ? AvoidanceSpace::state
                                   : AvoidanceSpace::input;
  const ConstraintTarget target = space == AvoidanceSpace::state
                                      ? ConstraintTarget::state_sample
                                      : ConstraintTarget::input_sample;
  std::vector<HorizonPrediction> all(predictions.begin(), predictions.end());
  for (std::size_t o = 0; o < obstacles.size(); ++o)
    all.push_back(obstacle_as_neighbor(obstacles[o].center, obstacles[o].ellipsoid,
                                       cfg_.K, n_agents + static_cast<int>(o),
                                       rt.prediction.stamp));

  const auto& mine = rt.prediction;
  const auto& mine_arr = space == AvoidanceSpace::state ? mine.positions : mine.inputs;
  for (int j : neighbor_set(mine, all, e, space)) {
    const auto& other = all[j];
    const EllipsoidSpec pair = other.is_static ? combine(e, other.ellipsoid) : e;
    const auto kc = detect_first_collision(mine, other, pair, space);
    const int idx = kc ? *kc : closest_approach(mine, other, pair, space).index;
    const auto& other_arr = space == AvoidanceSpace::state ? other.positions : other.inputs;
    const Vec3 pj_now = other.is_static ? other.positions[0]
                                        : Vec3(measured[other.agent_id].head<3>());
    // Two agents closing head-on can cover more than 2 r_min in one step,
    // so the first sampled collision may come after they have already
    // crossed. Linearizing there would ask each to finish passing through
    // the other; keep the side of the last sample before the crossing.
    // A single agent is too slow to jump an obstacle this way.
    Vec3 p0 = mine_arr[idx];
    if (!other.is_static) {
      const Vec3 rel = (mine_arr[idx] - other_arr[idx]).cwiseQuotient(pair.theta);
      const Vec3 before = (mine_arr[idx - 1] - other_arr[idx - 1]).cwiseQuotient(pair.theta);
      if (rel.dot(before) < 0.0) p0 = other_arr[idx] + (mine_arr[idx - 1] - other_arr[idx - 1]);
    }
    HalfspaceConstraint hs = ondemand_constraint(p0, other_arr[idx], pair, Vec3(pi - pj_now));
    hs.target = target;
    hs.sample_index = std::max(idx - cfg_.ondemand_shift, 1);
    hs.neighbor_id = other.agent_id;
    out.push_back(hs);
  }
  return out;
}

PlanOutput Planner::update_agent(const AgentRuntime& rt, std::span<const Vec6> measured,
                                 std::span<const HorizonPrediction> predictions,
                                 std::span<const Obstacle> obstacles, long cycle,
                                 QpSolver& solver) const {
  const auto start = Clock::now();
  require(rt.id >= 0 && rt.id < static_cast<int>(measured.size()),
          "update_agent: agent id outside the measured states");
  const Vec6& xbar = measured[rt.id];
  PlanOutput out;

  const Vec3 f = activation(xbar, rt.plan.eval(cfg_.h), cfg_.eps_act);
  InitialReference init =
      cfg_.replanning
          ? choose_initial_reference(xbar, rt.plan, f, cfg_.h, cfg_.f_min, cfg_.f_max)
          : choose_initial_reference(xbar, rt.plan, Vec3::Zero(), cfg_.h, -1.0, 1.0);
  const auto collisions = collision_constraints(rt, measured, predictions, obstacles);

  const VecX offsets = sp_.Psel * (sp_.A0 * xbar);
  const int rows = static_cast<int>(error_rows_.rows());
  const VecX err = offsets.tail(rows) - rt.goal.replicate(cfg_.kappa + 1, 1);
  QuadraticCost cost;
  cost.H = H_control_;
  cost.f = 2.0 * cfg_.qk * (error_rows_.transpose() * err);

  ConstraintMap map;
  map.input_samples = &basis_.sample[0];
  map.state_positions = positions_;
  map.state_offset = offsets;
  map.points_per_segment = cfg_.degree + 1;

  auto attempt = [&](const InitialReference& ir, QpProblem& qp) {
    const std::array<LinearRows, 2> eqs{
        initial_condition_constraints<double>(cfg_.segments, cfg_.degree,
                                              basis_.durations[0], ir.derivatives),
        continuity_};
    qp = assemble(cost, eqs, limits_, collisions, map, cfg_.zeta, cfg_.xi);
    const auto qp_start = Clock::now();
    QpSolution sol = solver.solve(qp, cfg_.qp);
    out.qp_ms += ms_since(qp_start);
    return sol;
  };

  QpProblem qp;
  QpSolution sol = attempt(init, qp);
  // The pinned continuation can sit outside this cycle's feasible set (a
  // shrinking Voronoi cell, mostly). Restart from the measured state first.
  if (!sol.ok() && !init.reset && cfg_.reset_on_failure) {
    init.reset = true;
    init.derivatives = {xbar.head<3>(), xbar.tail<3>(), Vec3::Zero()};
    sol = attempt(init, qp);
  }
  out.reset = init.reset;
  out.collision_rows = qp.collision_rows;
  out.status = sol.status;

  if (sol.ok()) {
    out.plan.spline.segments = cfg_.segments;
    out.plan.spline.degree = cfg_.degree;
    out.plan.spline.durations = basis_.durations;
    out.plan.spline.points = sol.z.head(qp.n_control);
    if (qp.n_slack > 0)
      out.max_violation = std::max(0.0, -sol.z.tail(qp.n_slack).minCoeff());
  } else {
    out.plan = rt.plan.shifted(cfg_.h);
  }

  out.prediction = predict(rt.id, xbar, out.plan, cycle);
  const int n_fine = cfg_.fine_per_cycle();
  out.fine.reserve(n_fine);
  for (int j = 0; j < n_fine; ++j) out.fine.push_back(out.plan.eval(j * cfg_.Ts));
  out.cycle_ms = ms_since(start);
  return out;
}

}  // namespace dmpc
