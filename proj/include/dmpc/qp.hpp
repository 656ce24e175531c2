#pragma once

// Per-agent quadratic program
//   min 1/2 z^T H z + f^T z   s.t.  Aeq z = beq,  Ain z <= bin
// over z = (control points, slacks).

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dmpc/bezier.hpp"
#include "dmpc/collision.hpp"
#include "dmpc/common.hpp"
#include "dmpc/dynamics.hpp"

namespace dmpc {

struct QuadraticCost {
  MatX H;
  VecX f;
  double constant = 0.0;  // dropped from the QP, kept for evaluation

  double value(const VecX& z) const {
    return 0.5 * z.dot(H * z) + f.dot(z) + constant;
  }
};

struct QpProblem {
  MatX H;
  VecX f;
  MatX Aeq;
  VecX beq;
  MatX Ain;
  VecX bin;
  int n_control = 0;
  int n_slack = 0;
  int collision_row_begin = 0;  // first collision row in Ain
  int collision_rows = 0;

  int variables() const { return static_cast<int>(H.rows()); }
  int slack_begin() const { return n_control; }
};

enum class QpStatus { optimal, infeasible, iteration_limit };

const char* to_string(QpStatus status);

struct QpSolution {
  VecX z;
  QpStatus status = QpStatus::infeasible;
  double objective = 0.0;
  double kkt_residual = 0.0;
  VecX lambda_eq;  // Aeq^T lambda_eq + Ain^T lambda_in + H z + f = 0
  VecX lambda_in;  // >= 0
  int iterations = 0;

  bool ok() const { return status == QpStatus::optimal; }
};

struct QpOptions {
  double tol = 1e-6;
  int max_iter = 0;  // 0: automatic, proportional to problem size
  double regularization = 1e-9;
};

/// sum_{k=K-kappa}^{K} q_k ||p[k] - goal||^2 with p[k] taken from
/// X = A0 x0 + Lambda Phi z, as a quadratic in the control points z.
QuadraticCost error_cost(const StackedPrediction& sp, const Vec6& x0,
                         const Vec3& goal, int kappa,
                         std::span<const double> qk, const MatX& Phi);

/// Uniform-weight convenience overload.
QuadraticCost error_cost(const StackedPrediction& sp, const Vec6& x0,
                         const Vec3& goal, int kappa, double qk,
                         const MatX& Phi);

/// sum_c alphas[c] * integral ||d^c u / dt^c||^2 over the whole spline.
QuadraticCost energy_cost(const SplineBasis& basis, std::span<const double> alphas);

/// zeta ||eps||^2 + xi sum(eps) over a slack block.
QuadraticCost violation_cost(int n_slack, double zeta, double xi);

/// Maps halfspace targets onto control-point columns.
struct ConstraintMap {
  const MatX* input_samples = nullptr;  // Phi, 3K x n_control
  MatX state_positions;  // Psel Lambda Phi, rows for p[1..K]
  VecX state_offset;     // Psel A0 x0
  int points_per_segment = 0;
};

ConstraintMap make_constraint_map(const SplineBasis& basis,
                                  const StackedPrediction& sp, const Vec6& x0);

/// Builds the full QP. Each soft collision row (every control point of a
/// soft first-segment constraint counts separately) gets its own slack
/// with a +1 coefficient in A z <= b form and a bound eps <= 0; the
/// violation penalty is added on the slack block.
QpProblem assemble(const QuadraticCost& control_cost,
                   std::span<const LinearRows> equalities,
                   std::span<const LinearRows> inequalities,
                   std::span<const HalfspaceConstraint> collisions,
                   const ConstraintMap& map, double zeta, double xi);

/// Dense dual active-set (Goldfarb-Idnani) solver. Equalities are
/// eliminated by a null-space projection; the equality factorization is
/// cached across calls with identical Aeq.
class QpSolver {
 public:
  QpSolver();
  ~QpSolver();
  QpSolver(QpSolver&&) noexcept;
  QpSolver& operator=(QpSolver&&) noexcept;

  QpSolution solve(const QpProblem& qp, const QpOptions& options = {});

 private:
  struct Cache;
  std::unique_ptr<Cache> cache_;
};

QpSolution solve(const QpProblem& qp, const QpOptions& options = {});

/// Scaled KKT residual: max of primal infeasibility, dual infeasibility,
/// stationarity and complementarity, each relative to the magnitude of the
/// terms it balances.
double kkt_residual(const QpProblem& qp, const VecX& z, const VecX& lambda_eq,
                    const VecX& lambda_in);

/// Plain-text matrix dump of (H, f, Aeq, beq, Ain, bin).
void write_qp(std::ostream& os, const QpProblem& qp);

}  // namespace dmpc
