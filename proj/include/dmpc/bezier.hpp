#pragma once

// Bernstein-basis spline machinery. Control points of a 3-D spline are
// stored as one flat vector, point-major with the three axes adjacent:
//   z[3 * (s * (p + 1) + m) + axis]   for segment s, point m.
// Input samples are stacked the same way: U[3 * k + axis].

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dmpc/common.hpp"

namespace dmpc {

template <typename Scalar>
Scalar binomial(int n, int k) {
  if (k < 0 || k > n) return Scalar(0);
  Scalar r(1);
  for (int i = 1; i <= k; ++i) r = r * Scalar(n - k + i) / Scalar(i);
  return r;
}

template <typename Scalar>
Scalar falling_factorial(int n, int c) {
  Scalar r(1);
  for (int i = 0; i < c; ++i) r *= Scalar(n - i);
  return r;
}

template <typename Scalar>
Scalar bernstein(int p, int m, Scalar T, Scalar t) {
  require(p >= 0 && m >= 0 && m <= p, "bernstein: index outside [0, p]");
  require(T > 0 && t >= 0 && t <= T, "bernstein: t outside [0, T]");
  const Scalar tau = t / T;
  return binomial<Scalar>(p, m) * std::pow(Scalar(1) - tau, p - m) *
         std::pow(tau, m);
}

/// Row-linear map D with derivative_points = D * points for the c-th
/// hodograph of a degree-p segment of duration T.
template <typename Scalar>
MatrixX<Scalar> hodograph_operator(int p, Scalar T, int c) {
  require(c >= 0 && c <= p, "hodograph_operator: derivative order exceeds degree");
  require(T > 0, "hodograph_operator: duration must be positive");
  MatrixX<Scalar> D = MatrixX<Scalar>::Identity(p + 1, p + 1);
  for (int order = 0; order < c; ++order) {
    const int q = p - order;  // degree before this differentiation
    MatrixX<Scalar> step = MatrixX<Scalar>::Zero(q, q + 1);
    for (int m = 0; m < q; ++m) {
      step(m, m) = -Scalar(q) / T;
      step(m, m + 1) = Scalar(q) / T;
    }
    D = (step * D).eval();
  }
  return D;
}

/// Control points of the c-th derivative, one point per row.
template <typename Derived>
MatrixX<typename Derived::Scalar> derivative_control_points(
    const Eigen::MatrixBase<Derived>& points, typename Derived::Scalar T,
    int c) {
  const int p = static_cast<int>(points.rows()) - 1;
  require(p >= 0, "derivative_control_points: empty segment");
  require(c >= 0 && c <= p,
          "derivative_control_points: derivative order exceeds degree");
  return hodograph_operator<typename Derived::Scalar>(p, T, c) * points;
}

/// De Casteljau evaluation at normalized time tau in [0, 1].
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic> de_casteljau(
    const Eigen::MatrixBase<Derived>& points, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> work = points;
  for (Eigen::Index level = work.rows() - 1; level > 0; --level)
    for (Eigen::Index i = 0; i < level; ++i)
      work.row(i) = (Scalar(1) - tau) * work.row(i) + tau * work.row(i + 1);
  return work.row(0);
}

/// Bernstein -> power basis in local time: coefficients of t^j equal
/// power_transform(p, T) * points.
template <typename Scalar>
MatrixX<Scalar> power_transform(int p, Scalar T) {
  require(T > 0, "power_transform: duration must be positive");
  MatrixX<Scalar> M = MatrixX<Scalar>::Zero(p + 1, p + 1);
  for (int m = 0; m <= p; ++m)
    for (int j = m; j <= p; ++j) {
      const Scalar sign = ((j - m) % 2 == 0) ? Scalar(1) : Scalar(-1);
      M(j, m) = binomial<Scalar>(p, m) * binomial<Scalar>(p - m, j - m) *
                sign / std::pow(T, j);
    }
  return M;
}

/// Row vector r with r * coeffs = c-th derivative at local time t of the
/// power-basis polynomial sum_j coeffs_j t^j.
template <typename Scalar>
Eigen::Matrix<Scalar, 1, Eigen::Dynamic> monomial_derivative_row(int p, int c,
                                                                 Scalar t) {
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> row =
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(p + 1);
  for (int j = c; j <= p; ++j)
    row(j) = falling_factorial<Scalar>(j, c) * std::pow(t, j - c);
  return row;
}

/// Gram matrix G with points^T G points = integral over [0, T] of the
/// squared c-th derivative (one axis).
template <typename Scalar>
MatrixX<Scalar> energy_gram(int p, Scalar T, int c) {
  require(c >= 0 && c <= p, "energy_gram: derivative order exceeds degree");
  const int q = p - c;
  MatrixX<Scalar> product(q + 1, q + 1);
  for (int m = 0; m <= q; ++m)
    for (int n = 0; n <= q; ++n)
      product(m, n) = T * binomial<Scalar>(q, m) * binomial<Scalar>(q, n) /
                      (Scalar(2 * q + 1) * binomial<Scalar>(2 * q, m + n));
  const MatrixX<Scalar> D = hodograph_operator<Scalar>(p, T, c);
  return D.transpose() * product * D;
}

/// kron(M, I3): lifts a per-axis operator onto the interleaved 3-D layout.
template <typename Derived>
MatrixX<typename Derived::Scalar> expand_axes(
    const Eigen::MatrixBase<Derived>& M) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(3 * M.rows(), 3 * M.cols());
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      if (M(r, c) != Scalar(0))
        for (int a = 0; a < 3; ++a) out(3 * r + a, 3 * c + a) = M(r, c);
  return out;
}

template <typename Scalar>
struct BezierSplineT {
  int segments = 0;
  int degree = 0;
  std::vector<Scalar> durations;
  VectorX<Scalar> points;  // 3 * segments * (degree + 1)

  int points_per_segment() const { return degree + 1; }
  int variable_count() const { return 3 * segments * (degree + 1); }

  Scalar total_duration() const {
    return std::accumulate(durations.begin(), durations.end(), Scalar(0));
  }

  /// Segment control points as a (p+1) x 3 matrix.
  MatrixX<Scalar> segment_points(int s) const {
    MatrixX<Scalar> P(degree + 1, 3);
    for (int m = 0; m <= degree; ++m)
      for (int a = 0; a < 3; ++a)
        P(m, a) = points(3 * (s * (degree + 1) + m) + a);
    return P;
  }

  /// c-th derivative at spline time t (clamped to the spline's span);
  /// junction times belong to the left segment.
  Vector3<Scalar> eval(Scalar t, int c = 0) const {
    int s = 0;
    Scalar start(0);
    while (s + 1 < segments && t > start + durations[s]) {
      start += durations[s];
      ++s;
    }
    const Scalar T = durations[s];
    Scalar tau = (t - start) / T;
    tau = std::clamp(tau, Scalar(0), Scalar(1));
    if (c > degree) return Vector3<Scalar>::Zero();
    const MatrixX<Scalar> D = derivative_control_points(segment_points(s), T, c);
    return de_casteljau(D, tau).transpose();
  }

  static BezierSplineT constant(int segments, int degree,
                                std::vector<Scalar> durations,
                                const Vector3<Scalar>& value) {
    BezierSplineT spline;
    spline.segments = segments;
    spline.degree = degree;
    spline.durations = std::move(durations);
    spline.points = value.replicate(segments * (degree + 1), 1);
    return spline;
  }
};

using BezierSpline = BezierSplineT<double>;

template <typename Scalar>
struct SplineBasisT {
  int segments = 0;
  int degree = 0;
  int K = 0;
  Scalar h = 0;
  std::vector<Scalar> durations;
  std::vector<int> sample_segment;    // segment owning sample k
  std::vector<Scalar> sample_local;   // local time of sample k
  // sample[c]: 3K x 3l(p+1), c-th derivative at t = 0, h, ..., (K-1)h.
  std::vector<MatrixX<Scalar>> sample;
  std::vector<MatrixX<Scalar>> power;  // per segment, (p+1) x (p+1)
  // energy[s][c]: per-axis (p+1) x (p+1) Gram matrix.
  std::vector<std::vector<MatrixX<Scalar>>> energy;

  int variable_count() const { return 3 * segments * (degree + 1); }
};

using SplineBasis = SplineBasisT<double>;

template <typename Scalar>
SplineBasisT<Scalar> build_basis(int l, int p, const std::vector<Scalar>& durations,
                                 Scalar h, int K, int max_deriv) {
  require(l >= 1 && p >= 1, "build_basis: need at least one segment of degree >= 1");
  require(static_cast<int>(durations.size()) == l,
          "build_basis: one duration per segment required");
  require(K >= 2 && h > 0, "build_basis: invalid horizon");
  require(max_deriv >= 0 && max_deriv <= p, "build_basis: invalid derivative order");
  Scalar total(0);
  for (Scalar d : durations) {
    require(d > 0, "build_basis: segment durations must be positive");
    total += d;
  }
  require(std::abs(total - Scalar(K - 1) * h) <= Scalar(1e-9),
          "build_basis: segment durations must sum to (K-1) h");

  SplineBasisT<Scalar> basis;
  basis.segments = l;
  basis.degree = p;
  basis.K = K;
  basis.h = h;
  basis.durations = durations;
  for (int s = 0; s < l; ++s) basis.power.push_back(power_transform<Scalar>(p, durations[s]));

  std::vector<Scalar> ends(l);
  std::partial_sum(durations.begin(), durations.end(), ends.begin());
  for (int k = 0; k < K; ++k) {
    const Scalar t = Scalar(k) * h;
    int s = 0;
    while (s + 1 < l && t > ends[s] + Scalar(1e-9)) ++s;
    const Scalar start = ends[s] - durations[s];
    basis.sample_segment.push_back(s);
    basis.sample_local.push_back(std::clamp(t - start, Scalar(0), durations[s]));
  }

  const int n_seg = p + 1;
  for (int c = 0; c <= max_deriv; ++c) {
    MatrixX<Scalar> scalar = MatrixX<Scalar>::Zero(K, l * n_seg);
    for (int k = 0; k < K; ++k) {
      const int s = basis.sample_segment[k];
      scalar.block(k, s * n_seg, 1, n_seg) =
          monomial_derivative_row<Scalar>(p, c, basis.sample_local[k]) *
          basis.power[s];
    }
    basis.sample.push_back(expand_axes(scalar));
  }

  basis.energy.resize(l);
  for (int s = 0; s < l; ++s)
    for (int c = 0; c <= p; ++c)
      basis.energy[s].push_back(energy_gram<Scalar>(p, durations[s], c));
  return basis;
}

/// Junction equalities: c-th derivative at the end of segment s equals the
/// c-th derivative at the start of segment s+1, for c = 0..cont_order.
template <typename Scalar>
LinearRows continuity_constraints(int l, int p, const std::vector<Scalar>& durations,
                                  int cont_order) {
  require(cont_order >= 0 && cont_order <= p,
          "continuity_constraints: continuity order exceeds degree");
  require(static_cast<int>(durations.size()) == l,
          "continuity_constraints: one duration per segment required");
  const int n_seg = p + 1;
  const int rows = (l - 1) * (cont_order + 1);
  MatX scalar = MatX::Zero(rows, l * n_seg);
  int r = 0;
  for (int s = 0; s + 1 < l; ++s)
    for (int c = 0; c <= cont_order; ++c, ++r) {
      const MatrixX<Scalar> left = hodograph_operator<Scalar>(p, durations[s], c);
      const MatrixX<Scalar> right = hodograph_operator<Scalar>(p, durations[s + 1], c);
      scalar.block(r, s * n_seg, 1, n_seg) = left.row(p - c).template cast<double>();
      scalar.block(r, (s + 1) * n_seg, 1, n_seg) -= right.row(0).template cast<double>();
    }
  LinearRows out;
  out.A = expand_axes(scalar);
  out.b = VecX::Zero(out.A.rows());
  return out;
}

/// Pins S(0) and its first derivatives: derivatives[c] is the c-th
/// derivative value at t = 0.
template <typename Scalar>
LinearRows initial_condition_constraints(int l, int p, Scalar first_duration,
                                         std::span<const Vector3<Scalar>> derivatives) {
  const int orders = static_cast<int>(derivatives.size());
  require(orders >= 1 && orders <= p + 1,
          "initial_condition_constraints: derivative orders must not exceed degree");
  const int n_seg = p + 1;
  MatX scalar = MatX::Zero(orders, l * n_seg);
  VecX b(3 * orders);
  for (int c = 0; c < orders; ++c) {
    const MatrixX<Scalar> D = hodograph_operator<Scalar>(p, first_duration, c);
    scalar.block(c, 0, 1, n_seg) = D.row(0).template cast<double>();
    b.segment<3>(3 * c) = derivatives[c].template cast<double>();
  }
  LinearRows out;
  out.A = expand_axes(scalar);
  out.b = b;
  return out;
}

/// lo <= Phi^(c)_k z <= hi for samples k >= first_sample, as A z <= b.
template <typename Scalar>
LinearRows limit_constraints(const SplineBasisT<Scalar>& basis, int c,
                             const Vector3<Scalar>& lo, const Vector3<Scalar>& hi,
                             int first_sample = 0) {
  require(c >= 0 && c < static_cast<int>(basis.sample.size()),
          "limit_constraints: derivative order not sampled by basis");
  require((lo.array() < hi.array()).all(), "limit_constraints: lo must be < hi");
  require(first_sample >= 0 && first_sample < basis.K,
          "limit_constraints: invalid first sample");
  const int samples = basis.K - first_sample;
  const int n = basis.variable_count();
  LinearRows out;
  out.A.resize(6 * samples, n);
  out.b.resize(6 * samples);
  const auto& Phi = basis.sample[c];
  for (int k = 0; k < samples; ++k) {
    const int row = 3 * (first_sample + k);
    out.A.block(6 * k, 0, 3, n) = Phi.block(row, 0, 3, n).template cast<double>();
    out.A.block(6 * k + 3, 0, 3, n) = -Phi.block(row, 0, 3, n).template cast<double>();
    out.b.template segment<3>(6 * k) = hi.template cast<double>();
    out.b.template segment<3>(6 * k + 3) = -lo.template cast<double>();
  }
  return out;
}

}  // namespace dmpc
