#include "dmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace dmpc {

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

QuadraticCost error_cost(const StackedPrediction& sp, const Vec6& x0,
                         const Vec3& goal, int kappa, std::span<const double> qk,
                         const MatX& Phi) {
  require(kappa >= 0 && kappa < sp.K, "error_cost: kappa must be < K");
  require(qk.size() == 1 || static_cast<int>(qk.size()) == kappa + 1,
          "error_cost: need one weight or kappa + 1 weights");
  require(Phi.rows() == 3 * sp.K, "error_cost: sample matrix does not match horizon");

  const MatX M = sp.Psel * (sp.Lambda * Phi);
  const VecX c = sp.Psel * (sp.A0 * x0);
  const int n = static_cast<int>(Phi.cols());

  QuadraticCost cost;
  cost.H = MatX::Zero(n, n);
  cost.f = VecX::Zero(n);
  for (int i = 0; i <= kappa; ++i) {
    const int k = sp.K - kappa + i;  // horizon step, 1-based in X
    const double q = qk.size() == 1 ? qk[0] : qk[i];
    const auto Mk = M.middleRows(3 * (k - 1), 3);
    const Vec3 ck = c.segment<3>(3 * (k - 1)) - goal;
    cost.H.noalias() += 2.0 * q * Mk.transpose() * Mk;
    cost.f.noalias() += 2.0 * q * Mk.transpose() * ck;
    cost.constant += q * ck.squaredNorm();
  }
  return cost;
}

QuadraticCost error_cost(const StackedPrediction& sp, const Vec6& x0,
                         const Vec3& goal, int kappa, double qk, const MatX& Phi) {
  const double w[1] = {qk};
  return error_cost(sp, x0, goal, kappa, std::span<const double>(w, 1), Phi);
}

QuadraticCost energy_cost(const SplineBasis& basis, std::span<const double> alphas) {
  const int n_seg = basis.degree + 1;
  const int n = basis.variable_count();
  MatX scalar = MatX::Zero(basis.segments * n_seg, basis.segments * n_seg);
  for (std::size_t c = 0; c < alphas.size(); ++c) {
    require(alphas[c] >= 0, "energy_cost: weights must be non-negative");
    if (alphas[c] == 0.0) continue;
    require(static_cast<int>(c) <= basis.degree,
            "energy_cost: derivative order exceeds degree");
    for (int s = 0; s < basis.segments; ++s)
      scalar.block(s * n_seg, s * n_seg, n_seg, n_seg) +=
          2.0 * alphas[c] * basis.energy[s][c];
  }
  QuadraticCost cost;
  cost.H = expand_axes(scalar);
  cost.f = VecX::Zero(n);
  return cost;
}

QuadraticCost violation_cost(int n_slack, double zeta, double xi) {
  require(zeta > 0, "violation_cost: zeta must be positive");
  QuadraticCost cost;
  cost.H = 2.0 * zeta * MatX::Identity(n_slack, n_slack);
  cost.f = VecX::Constant(n_slack, xi);
  return cost;
}

ConstraintMap make_constraint_map(const SplineBasis& basis,
                                  const StackedPrediction& sp, const Vec6& x0) {
  ConstraintMap map;
  map.input_samples = &basis.sample[0];
  map.state_positions = sp.Psel * (sp.Lambda * basis.sample[0]);
  map.state_offset = sp.Psel * (sp.A0 * x0);
  map.points_per_segment = basis.degree + 1;
  return map;
}

namespace {

int expanded_rows(const HalfspaceConstraint& hs, int points_per_segment) {
  return hs.target == ConstraintTarget::first_segment_points ? points_per_segment : 1;
}

}  // namespace

QpProblem assemble(const QuadraticCost& control_cost,
                   std::span<const LinearRows> equalities,
                   std::span<const LinearRows> inequalities,
                   std::span<const HalfspaceConstraint> collisions,
                   const ConstraintMap& map, double zeta, double xi) {
  const int nc = static_cast<int>(control_cost.H.rows());
  require(control_cost.H.cols() == nc && control_cost.f.size() == nc,
          "assemble: cost dimensions mismatch");

  int n_slack = 0;
  int n_coll = 0;
  for (const auto& hs : collisions) {
    const int r = expanded_rows(hs, map.points_per_segment);
    n_coll += r;
    if (hs.soft) n_slack += r;
  }
  const int n = nc + n_slack;

  QpProblem qp;
  qp.n_control = nc;
  qp.n_slack = n_slack;
  qp.H = MatX::Zero(n, n);
  qp.f = VecX::Zero(n);
  qp.H.topLeftCorner(nc, nc) = control_cost.H;
  qp.f.head(nc) = control_cost.f;
  if (n_slack > 0) {
    const QuadraticCost v = violation_cost(n_slack, zeta, xi);
    qp.H.bottomRightCorner(n_slack, n_slack) = v.H;
    qp.f.tail(n_slack) = v.f;
  }

  int n_eq = 0;
  for (const auto& e : equalities) {
    require(e.A.cols() == nc && e.b.size() == e.A.rows(),
            "assemble: equality block dimension mismatch");
    n_eq += static_cast<int>(e.rows());
  }
  qp.Aeq = MatX::Zero(n_eq, n);
  qp.beq = VecX::Zero(n_eq);
  int row = 0;
  for (const auto& e : equalities) {
    qp.Aeq.block(row, 0, e.rows(), nc) = e.A;
    qp.beq.segment(row, e.rows()) = e.b;
    row += static_cast<int>(e.rows());
  }

  int n_lim = 0;
  for (const auto& in : inequalities) {
    require(in.A.cols() == nc && in.b.size() == in.A.rows(),
            "assemble: inequality block dimension mismatch");
    n_lim += static_cast<int>(in.rows());
  }
  const int n_in = n_lim + n_coll + n_slack;
  qp.Ain = MatX::Zero(n_in, n);
  qp.bin = VecX::Zero(n_in);
  row = 0;
  for (const auto& in : inequalities) {
    qp.Ain.block(row, 0, in.rows(), nc) = in.A;
    qp.bin.segment(row, in.rows()) = in.b;
    row += static_cast<int>(in.rows());
  }

  // normal^T q >= offset + eps   <=>   -normal^T q + eps <= -offset
  qp.collision_row_begin = row;
  qp.collision_rows = n_coll;
  int slack = nc;
  for (const auto& hs : collisions) {
    const int reps = expanded_rows(hs, map.points_per_segment);
    for (int r = 0; r < reps; ++r, ++row) {
      switch (hs.target) {
        case ConstraintTarget::input_sample: {
          require(map.input_samples != nullptr &&
                      3 * hs.sample_index + 3 <= map.input_samples->rows(),
                  "assemble: input sample index out of range");
          qp.Ain.row(row).head(nc) =
              -hs.normal.transpose() * map.input_samples->middleRows(3 * hs.sample_index, 3);
          qp.bin(row) = -hs.offset;
          break;
        }
        case ConstraintTarget::state_sample: {
          require(hs.sample_index >= 1 &&
                      3 * hs.sample_index <= map.state_positions.rows(),
                  "assemble: state sample index out of range");
          const int base = 3 * (hs.sample_index - 1);
          qp.Ain.row(row).head(nc) =
              -hs.normal.transpose() * map.state_positions.middleRows(base, 3);
          qp.bin(row) = -hs.offset + hs.normal.dot(map.state_offset.segment<3>(base));
          break;
        }
        case ConstraintTarget::first_segment_points: {
          require(3 * (r + 1) <= nc, "assemble: control point out of range");
          qp.Ain.block(row, 3 * r, 1, 3) = -hs.normal.transpose();
          qp.bin(row) = -hs.offset;
          break;
        }
      }
      if (hs.soft) qp.Ain(row, slack++) = 1.0;
    }
  }
  for (int s = 0; s < n_slack; ++s, ++row) {
    qp.Ain(row, nc + s) = 1.0;
    qp.bin(row) = 0.0;
  }
  return qp;
}

double kkt_residual(const QpProblem& qp, const VecX& z, const VecX& lambda_eq,
                    const VecX& lambda_in) {
  const VecX Hz = qp.H * z;
  VecX grad = Hz + qp.f;
  double scale = std::max({1.0, Hz.lpNorm<Eigen::Infinity>(),
                           qp.f.lpNorm<Eigen::Infinity>()});
  if (qp.Aeq.rows() > 0) {
    const VecX t = qp.Aeq.transpose() * lambda_eq;
    grad += t;
    scale = std::max(scale, t.lpNorm<Eigen::Infinity>());
  }
  double primal = 0.0, dual = 0.0, comp = 0.0;
  if (qp.Ain.rows() > 0) {
    const VecX t = qp.Ain.transpose() * lambda_in;
    grad += t;
    scale = std::max(scale, t.lpNorm<Eigen::Infinity>());
    const VecX s = qp.Ain * z - qp.bin;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double row_scale = std::max(1.0, qp.Ain.row(i).lpNorm<Eigen::Infinity>());
      primal = std::max(primal, s(i) / row_scale);
      dual = std::max(dual, -lambda_in(i));
      comp = std::max(comp, std::abs(lambda_in(i) * s(i)) /
                                std::max(1.0, std::abs(lambda_in(i)) * row_scale));
    }
  }
  if (qp.Aeq.rows() > 0) {
    const VecX r = qp.Aeq * z - qp.beq;
    for (Eigen::Index i = 0; i < r.size(); ++i)
      primal = std::max(primal, std::abs(r(i)) /
                                    std::max(1.0, qp.Aeq.row(i).lpNorm<Eigen::Infinity>()));
  }
  const double stationarity = grad.lpNorm<Eigen::Infinity>() / scale;
  return std::max({primal, dual, comp, stationarity});
}

void write_qp(std::ostream& os, const QpProblem& qp) {
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
  auto block = [&](const char* name, const auto& m) {
    os << "# " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    if (m.size() > 0) os << m.format(fmt) << '\n';
  };
  block("H", qp.H);
  block("f", qp.f);
  block("Aeq", qp.Aeq);
  block("beq", qp.beq);
  block("Ain", qp.Ain);
  block("bin", qp.bin);
}

}  // namespace dmpc
