#pragma once

// Per-agent receding-horizon update: replanning choice, collision
// constraints, QP and broadcast of the new horizon prediction.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dmpc/bezier.hpp"
#include "dmpc/collision.hpp"
#include "dmpc/common.hpp"
#include "dmpc/dynamics.hpp"
#include "dmpc/qp.hpp"

namespace dmpc {

enum class Method { bvc, bvc_soft, ondemand_state, ondemand_input };

const char* to_string(Method m);
Method parse_method(const std::string& name);  // throws InvalidParameter

struct Obstacle {
  Vec3 center = Vec3::Zero();
  EllipsoidSpec ellipsoid;
};

struct PlannerConfig {
  // agent model
  double omega_n = 8.0;
  double damping = 0.7;

  double h = 0.2;
  double Ts = 0.05;
  int K = 16;
  int segments = 3;
  int degree = 5;
  int continuity = 2;  // C^r continuity of the input
  int kappa = 3;
  double qk = 100.0;
  std::vector<double> alphas{0.0, 0.0, 0.008};
  double zeta = 1.0;
  double xi = -5e4;
  double acc_limit = 1.0;  // |d^2u/dt^2| per axis
  bool limit_workspace = true;
  Vec3 workspace_lo = Vec3(-1.5, -1.5, 0.0);
  Vec3 workspace_hi = Vec3(1.5, 1.5, 2.0);
  EllipsoidSpec ellipsoid;

  double f_min = -0.01;
  double f_max = 0.8;
  double eps_act = 0.01;
  bool replanning = true;  // false: always continue the previous plan

  Method method = Method::ondemand_input;
  double bvc_radius = 2.0;  // neighbours farther than this (m) are ignored
  // On-demand rows bind the new plan at sample k_c - ondemand_shift (prior
  // prediction index k_c). 1 is the time-aligned sample, 0 binds one step later.
  int ondemand_shift = 0;
  bool reset_on_failure = true;  // retry a failed QP from the measured state
  QpOptions qp;

  std::vector<double> durations() const;
  int fine_per_cycle() const;
  void validate() const;  // throws InvalidParameter
};

/// Reference actually flown: the solved spline read from `offset` seconds
/// on. Past its end the final point is held with zero derivatives.
struct PlannedReference {
  BezierSpline spline;
  double offset = 0.0;

  Vec3 eval(double t, int c = 0) const;
  PlannedReference shifted(double dt) const { return {spline, offset + dt}; }
};

struct AgentRuntime {
  int id = 0;
  Vec3 goal = Vec3::Zero();
  PlannedReference plan;          // started at the previous cycle
  HorizonPrediction prediction;   // stamp = last completed cycle
};

/// f_n = (p_n - u_n)^5 / -(v_n + sgn(v_n) eps), sgn(0) = +1.
Vec3 activation(const Vec6& measured, const Vec3& u_now, double eps_act);

bool within_activation_bounds(const Vec3& f, double f_min, double f_max);

struct InitialReference {
  std::array<Vec3, 3> derivatives;  // value, velocity, acceleration at t = 0
  bool reset = false;
};

/// Continuation pins the previous plan at t = h; a reset pins the measured
/// position and velocity with zero acceleration.
InitialReference choose_initial_reference(const Vec6& measured,
                                          const PlannedReference& previous,
                                          const Vec3& f, double h, double f_min,
                                          double f_max);

struct PlanOutput {
  std::vector<Vec3> fine;  // references at t0 + j Ts, j = 0..h/Ts-1
  PlannedReference plan;
  HorizonPrediction prediction;
  bool reset = false;
  QpStatus status = QpStatus::optimal;
  int collision_rows = 0;
  double max_violation = 0.0;  // most negative slack, as a positive number
  double qp_ms = 0.0;
  double cycle_ms = 0.0;
};

class Planner {
 public:
  explicit Planner(PlannerConfig cfg);

  const PlannerConfig& config() const { return cfg_; }
  const SplineBasis& basis() const { return basis_; }
  const StackedPrediction& stacked() const { return sp_; }
  const LinearAgentModel& model() const { return model_; }

  /// Runtime at rest at `start`, bootstrapped with a static prediction.
  AgentRuntime make_runtime(int id, const Vec3& start, const Vec3& goal,
                            long stamp = -1) const;

  /// Everything stays at p for the whole horizon.
  HorizonPrediction static_prediction(int id, const Vec3& p, long stamp) const;

  /// One cycle of the per-agent update. `measured` is indexed by agent id,
  /// `predictions` holds every agent's broadcast from cycle - 1.
  PlanOutput update_agent(const AgentRuntime& rt, std::span<const Vec6> measured,
                          std::span<const HorizonPrediction> predictions,
                          std::span<const Obstacle> obstacles, long cycle,
                          QpSolver& solver) const;

  /// Prediction implied by a reference through the stacked model.
  HorizonPrediction predict(int id, const Vec6& x0, const PlannedReference& ref,
                            long stamp) const;

  std::vector<HalfspaceConstraint> collision_constraints(
      const AgentRuntime& rt, std::span<const Vec6> measured,
      std::span<const HorizonPrediction> predictions,
      std::span<const Obstacle> obstacles) const;

 private:
  PlannerConfig cfg_;
  LinearAgentModel model_;
  SplineBasis basis_;
  StackedPrediction sp_;
  MatX positions_;    // Psel Lambda Phi
  MatX error_rows_;   // rows of positions_ entering the error cost
  MatX H_control_;    // error + energy Hessian
  LinearRows continuity_;
  std::vector<LinearRows> limits_;
};

}  // namespace dmpc
