#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the library routine it checks.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dmpc/bezier.hpp"
#include "dmpc/collision.hpp"
#include "dmpc/dynamics.hpp"
#include "dmpc/qp.hpp"

namespace checks {

using namespace dmpc;

inline double choose(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0));
}

// B_m^p(tau) straight from the definition; zero outside 0..p.
inline double bernstein_ref(int p, int m, double tau) {
  if (m < 0 || m > p) return 0.0;
  return choose(p, m) * std::pow(tau, m) * std::pow(1.0 - tau, p - m);
}

// c-th time derivative of B_m^p(t / T) as a c-th forward difference of
// degree p - c basis functions.
inline double bernstein_deriv_ref(int p, int m, int c, double T, double t) {
  if (c > p) return 0.0;
  double sum = 0.0;
  for (int i = 0; i <= c; ++i)
    sum += ((c - i) % 2 ? -1.0 : 1.0) * choose(c, i) * bernstein_ref(p - c, m - i, t / T);
  return sum * std::tgamma(p + 1.0) / std::tgamma(p - c + 1.0) / std::pow(T, c);
}

// Gauss-Legendre nodes and weights on [0, 1] (Golub-Welsch).
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = 0.5 * (es.eigenvalues()(i) + 1.0);
    w[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);  // sums to 1 on [0, 1]
  }
}

inline double partition_of_unity_error() {
  double worst = 0.0;
  for (int p = 0; p <= 9; ++p)
    for (int s = 0; s <= 200; ++s) {
      const double T = 0.7 + 0.01 * p;
      const double t = T * s / 200.0;
      double sum = 0.0;
      for (int m = 0; m <= p; ++m) sum += bernstein(p, m, T, t);
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  return worst;
}

inline BezierSpline random_spline(std::mt19937_64& rng, int segments, int degree) {
  std::uniform_real_distribution<double> U(-1.0, 1.0), D(0.5, 1.5);
  BezierSpline s;
  s.segments = segments;
  s.degree = degree;
  for (int k = 0; k < segments; ++k) s.durations.push_back(D(rng));
  s.points = VecX::NullaryExpr(s.variable_count(), [&] { return U(rng); });
  return s;
}

// Central differences of derivative c-1 against derivative c, away from
// segment junctions.
inline double derivative_fd_error() {
  std::mt19937_64 rng(11);
  const double step = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const BezierSpline s = random_spline(rng, 3, 5);
    double start = 0.0;
    for (int seg = 0; seg < s.segments; ++seg) {
      const double T = s.durations[seg];
      for (int q = 1; q < 10; ++q) {
        const double t = start + T * q / 10.0;
        for (int c = 1; c <= 3; ++c) {
          const Vec3 fd = (s.eval(t + step, c - 1) - s.eval(t - step, c - 1)) / (2 * step);
          worst = std::max(worst, (fd - s.eval(t, c)).cwiseAbs().maxCoeff());
        }
      }
      start += T;
    }
  }
  return worst;
}

inline double gram_quadrature_error() {
  std::vector<double> x, w;
  gauss_legendre(16, x, w);
  double worst = 0.0;
  for (int p = 2; p <= 7; ++p)
    for (int c = 0; c <= std::min(p, 4); ++c)
      for (double T : {0.5, 1.0, 2.3}) {
        const MatX G = energy_gram(p, T, c);
        MatX Q = MatX::Zero(p + 1, p + 1);
        for (int a = 0; a <= p; ++a)
          for (int b = 0; b <= p; ++b)
            for (std::size_t k = 0; k < x.size(); ++k)
              Q(a, b) += T * w[k] * bernstein_deriv_ref(p, a, c, T, T * x[k]) *
                         bernstein_deriv_ref(p, b, c, T, T * x[k]);
        worst = std::max(worst, (G - Q).cwiseAbs().maxCoeff() / Q.cwiseAbs().maxCoeff());
      }
  return worst;
}

inline double stacked_prediction_error() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  const auto model = make_second_order_model(8.0, 0.7, 0.2);
  const int K = 16;
  const auto sp = build_stacked(model, K);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Vec6 x0 = Vec6::NullaryExpr([&] { return N(rng); });
    const VecX U = VecX::NullaryExpr(3 * K, [&] { return N(rng); });
    const VecX X = predict_states(sp, x0, U);
    Vec6 x = x0;
    for (int k = 0; k < K; ++k) {
      x = model.A * x + model.B * U.segment<3>(3 * k);
      worst = std::max(worst, (X.segment<6>(6 * k) - x).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

// KKT conditions evaluated from scratch. Each term is scaled by the size of
// the quantities it balances so that badly scaled instances are comparable.
inline double kkt_error(const QpProblem& qp, const QpSolution& s) {
  const VecX& z = s.z;
  VecX grad = qp.H * z + qp.f;
  double scale = 1.0 + (qp.H * z).cwiseAbs().maxCoeff() + qp.f.cwiseAbs().maxCoeff();
  if (qp.Aeq.rows() > 0) {
    const VecX t = qp.Aeq.transpose() * s.lambda_eq;
    grad += t;
    scale += t.cwiseAbs().maxCoeff();
  }
  if (qp.Ain.rows() > 0) {
    const VecX t = qp.Ain.transpose() * s.lambda_in;
    grad += t;
    scale += t.cwiseAbs().maxCoeff();
  }
  double err = grad.cwiseAbs().maxCoeff() / scale;
  const double zs = 1.0 + z.cwiseAbs().maxCoeff();
  if (qp.Aeq.rows() > 0) {
    const double bs = zs * qp.Aeq.cwiseAbs().maxCoeff() + qp.beq.cwiseAbs().maxCoeff();
    err = std::max(err, (qp.Aeq * z - qp.beq).cwiseAbs().maxCoeff() / (1.0 + bs));
  }
  if (qp.Ain.rows() > 0) {
    const VecX r = qp.Ain * z - qp.bin;  // <= 0 when feasible
    const double bs = zs * qp.Ain.cwiseAbs().maxCoeff() + qp.bin.cwiseAbs().maxCoeff();
    err = std::max(err, r.maxCoeff() / (1.0 + bs));
    err = std::max(err, -s.lambda_in.minCoeff());
    const double ls = 1.0 + s.lambda_in.cwiseAbs().maxCoeff();
    err = std::max(err, (s.lambda_in.array() * r.array()).abs().maxCoeff() / (ls * (1.0 + bs)));
  }
  return err;
}

// Strictly convex QP with a known feasible point.
inline QpProblem random_qp(std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  const int n = 2 + static_cast<int>(rng() % 30);
  const int me = static_cast<int>(rng() % (n / 2 + 1));
  const int mi = static_cast<int>(rng() % (3 * n + 1));
  QpProblem qp;
  const MatX M = MatX::NullaryExpr(n, n, [&] { return N(rng); });
  qp.H = M * M.transpose() + 0.1 * MatX::Identity(n, n);
  qp.f = VecX::NullaryExpr(n, [&] { return 10.0 * N(rng); });
  const VecX x = VecX::NullaryExpr(n, [&] { return N(rng); });
  qp.Aeq = MatX::NullaryExpr(me, n, [&] { return N(rng); });
  qp.beq = qp.Aeq * x;
  qp.Ain = MatX::NullaryExpr(mi, n, [&] { return N(rng); });
  qp.bin = qp.Ain * x + VecX::NullaryExpr(mi, [&] { return std::abs(N(rng)); });
  qp.n_control = n;
  return qp;
}

struct QpSweep {
  int instances = 0;
  int not_optimal = 0;
  double worst_kkt = 0.0;
};

inline QpSweep random_qp_sweep(int instances) {
  std::mt19937_64 rng(2024);
  QpSweep out;
  for (int i = 0; i < instances; ++i) {
    const QpProblem qp = random_qp(rng);
    const QpSolution s = solve(qp);
    ++out.instances;
    if (!s.ok()) {
      ++out.not_optimal;
      continue;
    }
    out.worst_kkt = std::max(out.worst_kkt, kkt_error(qp, s));
  }
  return out;
}

// Halfspace normal^T q >= offset rescaled to a unit normal.
inline std::pair<Vec3, double> unit_halfspace(const HalfspaceConstraint& h) {
  const double n = h.normal.norm();
  return {h.normal / n, h.offset / n};
}

// Hand-derived separating planes; returns the largest deviation.
inline double hyperplane_hand_error() {
  const EllipsoidSpec unit{Vec3::Ones(), 0.3};
  double worst = 0.0;
  auto track = [&](double v) { worst = std::max(worst, std::abs(v)); };

  // x <= -0.15 between (-0.5, 0, 0) and (0.5, 0, 0).
  {
    const auto [n, b] =
        unit_halfspace(bvc_constraint(Vec3(-0.5, 0, 0), Vec3(0.5, 0, 0), unit, false, false));
    track((n - Vec3(-1, 0, 0)).norm());
    track(b - 0.15);
  }
  // A far neighbour leaves p_i inside with margin (d - r_min) / 2.
  {
    const Vec3 pi(0.2, -0.1, 0.4), pj(2.2, 1.9, 1.4);
    const auto h = bvc_constraint(pi, pj, unit, false, false);
    const auto [n, b] = unit_halfspace(h);
    track(n.dot(pi) - b - 0.5 * ((pi - pj).norm() - 0.3));
  }
  // Linearization about (0.25, 0, 0) away from the origin: x >= 0.3.
  {
    const auto h = ondemand_constraint(Vec3(0.25, 0, 0), Vec3::Zero(), unit);
    track((h.normal - Vec3(1, 0, 0)).norm());
    track(h.offset - 0.3);
    track(h.residual(Vec3(0.25, 0, 0)) + (0.3 - 0.25));
  }
  // Scaled axes: theta = (1, 1, 2), pair stacked in z 0.4 m apart. The
  // plane sits halfway minus the buffer in scaled units: z <= 2 (0.2 - 0.15).
  {
    const EllipsoidSpec e{Vec3(1, 1, 2), 0.3};
    const auto [n, b] =
        unit_halfspace(bvc_constraint(Vec3(0, 0, 0), Vec3(0, 0, 0.8), e, false, false));
    track((n - Vec3(0, 0, -1)).norm());
    track(b + 0.1);
  }
  return worst;
}

}  // namespace checks
