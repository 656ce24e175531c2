#pragma once

// Discrete trajectory-tracking models x[k+1] = A x[k] + B u[k] with
// x = (p, v) and u a position reference, plus the stacked horizon form
// X = A0 x0 + Lambda U.

#include <cmath>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "dmpc/common.hpp"

namespace dmpc {

template <typename Scalar>
struct LinearAgentModelT {
  Eigen::Matrix<Scalar, 6, 6> A;
  Eigen::Matrix<Scalar, 6, 3> B;
  Scalar h;  // seconds
};

using LinearAgentModel = LinearAgentModelT<double>;

/// Zero-order-hold discretization of the per-axis tracking loop
///   p'' = omega_n^2 (u - p) - 2 damping omega_n p'
/// with identical decoupled axes.
template <typename Scalar>
LinearAgentModelT<Scalar> make_second_order_model(Scalar omega_n,
                                                  Scalar damping, Scalar h) {
  require(omega_n > 0 && damping > 0 && h > 0,
          "make_second_order_model: omega_n, damping and h must be positive");

  using Mat9 = Eigen::Matrix<Scalar, 9, 9>;
  const auto I3 = Eigen::Matrix<Scalar, 3, 3>::Identity();
  Mat9 augmented = Mat9::Zero();
  augmented.template block<3, 3>(0, 3) = I3;
  augmented.template block<3, 3>(3, 0) = -omega_n * omega_n * I3;
  augmented.template block<3, 3>(3, 3) = -2 * damping * omega_n * I3;
  augmented.template block<3, 3>(3, 6) = omega_n * omega_n * I3;

  const Mat9 phi = (augmented * h).exp();
  LinearAgentModelT<Scalar> model;
  model.A = phi.template block<6, 6>(0, 0);
  model.B = phi.template block<6, 3>(0, 6);
  model.h = h;
  return model;
}

template <typename Scalar>
struct StackedPredictionT {
  int K = 0;
  int state_dim = 0;
  int input_dim = 0;
  int position_dim = 0;
  MatrixX<Scalar> A0;      // (nx K) x nx, block k = A^(k+1)
  MatrixX<Scalar> Lambda;  // (nx K) x (nu K), block (r, c) = A^(r-c) B
  MatrixX<Scalar> Psel;    // (np K) x (nx K)
};

using StackedPrediction = StackedPredictionT<double>;

/// Stacked prediction for a generic (A, B); the first `position_dim`
/// state components are treated as positions.
template <typename DerivedA, typename DerivedB>
StackedPredictionT<typename DerivedA::Scalar> build_stacked(
    const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B,
    int K, int position_dim) {
  using Scalar = typename DerivedA::Scalar;
  require(K >= 2, "build_stacked: horizon K must be at least 2");
  require(A.rows() == A.cols() && B.rows() == A.rows(),
          "build_stacked: A must be square and match B");
  const int nx = static_cast<int>(A.rows());
  const int nu = static_cast<int>(B.cols());
  require(position_dim > 0 && position_dim <= nx,
          "build_stacked: invalid position dimension");

  StackedPredictionT<Scalar> sp;
  sp.K = K;
  sp.state_dim = nx;
  sp.input_dim = nu;
  sp.position_dim = position_dim;
  sp.A0 = MatrixX<Scalar>::Zero(nx * K, nx);
  sp.Lambda = MatrixX<Scalar>::Zero(nx * K, nu * K);
  sp.Psel = MatrixX<Scalar>::Zero(position_dim * K, nx * K);

  // powers[k] = A^k
  std::vector<MatrixX<Scalar>> powers(K + 1);
  powers[0] = MatrixX<Scalar>::Identity(nx, nx);
  for (int k = 1; k <= K; ++k) powers[k] = A * powers[k - 1];

  for (int r = 0; r < K; ++r) {
    sp.A0.block(r * nx, 0, nx, nx) = powers[r + 1];
    for (int c = 0; c <= r; ++c)
      sp.Lambda.block(r * nx, c * nu, nx, nu) = powers[r - c] * B;
    sp.Psel.block(r * position_dim, r * nx, position_dim, position_dim)
        .setIdentity();
  }
  return sp;
}

template <typename Scalar>
StackedPredictionT<Scalar> build_stacked(const LinearAgentModelT<Scalar>& m,
                                         int K) {
  return build_stacked(m.A, m.B, K, 3);
}

/// X = A0 x0 + Lambda U, holding x[1..K] for inputs u[0..K-1].
template <typename Scalar, typename DerivedX, typename DerivedU>
VectorX<Scalar> predict_states(const StackedPredictionT<Scalar>& sp,
                               const Eigen::MatrixBase<DerivedX>& x0,
                               const Eigen::MatrixBase<DerivedU>& U) {
  require(x0.size() == sp.state_dim && U.size() == sp.input_dim * sp.K,
          "predict_states: dimension mismatch");
  return sp.A0 * x0 + sp.Lambda * U;
}

template <typename Scalar, typename DerivedX>
VectorX<Scalar> predicted_positions(const StackedPredictionT<Scalar>& sp,
                                    const Eigen::MatrixBase<DerivedX>& X) {
  require(X.size() == sp.state_dim * sp.K,
          "predicted_positions: dimension mismatch");
  return sp.Psel * X;
}

}  // namespace dmpc
