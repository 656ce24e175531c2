#include <doctest.h>

#include "checks.hpp"
#include "dmpc/planner.hpp"

using namespace dmpc;

TEST_CASE("random strictly convex QPs satisfy KKT") {
  const auto sweep = checks::random_qp_sweep(1000);
  CHECK(sweep.not_optimal == 0);
  CHECK(sweep.worst_kkt < 1e-6);
}

TEST_CASE("small QP with a known optimum") {
  // min 1/2 |z|^2  s.t.  z1 + z2 >= 2
  QpProblem qp;
  qp.H = MatX::Identity(2, 2);
  qp.f = VecX::Zero(2);
  qp.Ain = (MatX(1, 2) << -1, -1).finished();
  qp.bin = VecX::Constant(1, -2.0);
  qp.n_control = 2;
  const auto s = solve(qp);
  REQUIRE(s.ok());
  CHECK(s.z(0) == doctest::Approx(1.0));
  CHECK(s.z(1) == doctest::Approx(1.0));
  CHECK(s.lambda_in(0) == doctest::Approx(1.0));
  CHECK(s.objective == doctest::Approx(1.0));

  // Same problem with an equality z1 = 0.5 forcing z2 = 1.5.
  qp.Aeq = (MatX(1, 2) << 1, 0).finished();
  qp.beq = VecX::Constant(1, 0.5);
  const auto e = solve(qp);
  REQUIRE(e.ok());
  CHECK(e.z(1) == doctest::Approx(1.5));
  CHECK(checks::kkt_error(qp, e) < 1e-9);
}

TEST_CASE("contradictory inequalities are reported infeasible") {
  QpProblem qp;
  qp.H = MatX::Identity(1, 1);
  qp.f = VecX::Zero(1);
  qp.Ain = (MatX(2, 1) << 1, -1).finished();
  qp.bin = (VecX(2) << -1, -1).finished();  // z <= -1 and z >= 1
  qp.n_control = 1;
  CHECK(solve(qp).status == QpStatus::infeasible);
}

TEST_CASE("cached solver agrees with the one-shot solve") {
  std::mt19937_64 rng(77);
  QpSolver solver;
  for (int i = 0; i < 20; ++i) {
    const auto qp = checks::random_qp(rng);
    const auto a = solver.solve(qp), b = solve(qp);
    REQUIRE(a.ok());
    CHECK((a.z - b.z).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("violation cost by hand") {
  const auto v = violation_cost(1, 1.0, -1e3);
  CHECK(v.value(VecX::Constant(1, -0.01)) == doctest::Approx(10.0001).epsilon(1e-12));
  const auto w = violation_cost(3, 2.0, 5.0);
  const VecX e = (VecX(3) << 0.1, -0.2, 0.3).finished();
  CHECK(w.value(e) == doctest::Approx(2.0 * 0.14 + 5.0 * 0.2));
}

TEST_CASE("error cost equals the tracking error of the predicted positions") {
  const Planner planner{PlannerConfig{}};
  const auto& sp = planner.stacked();
  const MatX& Phi = planner.basis().sample[0];
  std::mt19937_64 rng(9);
  std::normal_distribution<double> N(0.0, 1.0);
  const Vec6 x0 = Vec6::NullaryExpr([&] { return N(rng); });
  const Vec3 goal(0.3, -0.7, 1.1);
  const VecX z = VecX::NullaryExpr(Phi.cols(), [&] { return N(rng); });
  const std::vector<double> q{1.0, 2.0, 3.0, 4.0};
  const auto cost = error_cost(sp, x0, goal, 3, q, Phi);

  // Simulate the model directly on the sampled inputs.
  const auto model = planner.model();
  const VecX U = Phi * z;
  Vec6 x = x0;
  double direct = 0.0;
  for (int k = 1; k <= sp.K; ++k) {
    x = model.A * x + model.B * U.segment<3>(3 * (k - 1));
    if (k >= sp.K - 3) direct += q[k - (sp.K - 3)] * (x.head<3>() - goal).squaredNorm();
  }
  CHECK(cost.value(z) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("energy cost of a constant spline is zero") {
  const Planner planner{PlannerConfig{}};
  const std::vector<double> alphas{0.0, 1.0, 1.0};
  const auto cost = energy_cost(planner.basis(), alphas);
  const auto s = BezierSpline::constant(3, 5, planner.config().durations(), Vec3(1, 2, 3));
  CHECK(std::abs(cost.value(s.points)) < 1e-10);
}

TEST_CASE("assembled QP layout") {
  const Planner planner{PlannerConfig{}};
  const Vec6 x0 = Vec6::Zero();
  const auto map = make_constraint_map(planner.basis(), planner.stacked(), x0);
  const int nc = planner.basis().variable_count();
  QuadraticCost cost{MatX::Identity(nc, nc), VecX::Zero(nc), 0.0};

  HalfspaceConstraint soft_input;
  soft_input.normal = Vec3(1, 0, 0);
  soft_input.offset = 0.5;
  soft_input.sample_index = 4;
  soft_input.soft = true;
  HalfspaceConstraint hard_cell;
  hard_cell.normal = Vec3(0, 1, 0);
  hard_cell.offset = -0.2;
  hard_cell.target = ConstraintTarget::first_segment_points;
  const std::vector<HalfspaceConstraint> coll{soft_input, hard_cell};
  const std::vector<LinearRows> none;
  const auto qp = assemble(cost, none, none, coll, map, 1.0, -1e3);

  CHECK(qp.n_control == nc);
  CHECK(qp.n_slack == 1);
  CHECK(qp.variables() == nc + 1);
  CHECK(qp.collision_rows == 1 + 6);
  CHECK(qp.Ain.rows() == 1 + 6 + 1);
  // Slack enters its own row with +1 and is bounded above by zero.
  CHECK(qp.Ain(qp.collision_row_begin, nc) == 1.0);
  CHECK(qp.Ain.row(qp.Ain.rows() - 1).tail(1)(0) == 1.0);
  CHECK(qp.bin(qp.Ain.rows() - 1) == 0.0);
  CHECK(qp.f(nc) == -1e3);

  // Each cell row bounds one first-segment control point (y axis).
  for (int m = 0; m < 6; ++m) {
    const auto r = qp.Ain.row(qp.collision_row_begin + 1 + m);
    CHECK(r(3 * m + 1) == -1.0);
    CHECK(r.head(nc).cwiseAbs().sum() == 1.0);
    CHECK(qp.bin(qp.collision_row_begin + 1 + m) == doctest::Approx(0.2));
  }
}
