#include "dmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dual active-set method for  min 1/2 y^T G y + g^T y  s.t.  n_i^T y >= b_i
// (columns of N). Follows Goldfarb and Idnani: J = L^-T is rotated as
// constraints enter or leave so that J^T n spans [R; 0] for the active set.
struct DualActiveSet {
  const MatX& G;
  const VecX& g;
  const MatX& N;  // n x m
  const VecX& b;
  double tol;
  int max_iter;
  // The last n_diag coordinates are uncoupled in G (diagonal block). Each
  // entry of `initial` is (constraint, coordinate) for a bound on one of
  // them that starts active with the coordinate at zero.
  int n_diag = 0;
  std::vector<std::pair<int, int>> initial;

  VecX y;
  VecX u;                 // multipliers, indexed by constraint
  std::vector<int> active;
  int iterations = 0;
  QpStatus status = QpStatus::optimal;

  MatX J, R;
  int q = 0;

  static void rotate(double& a, double& b, double& c, double& s) {
    const double h = std::hypot(a, b);
    c = a / h;
    s = b / h;
    a = h;
    b = 0.0;
  }

  bool add(const VecX& d_full) {
    const int n = static_cast<int>(J.rows());
    VecX d = d_full;
    for (int j = n - 1; j > q; --j) {
      if (d(j) == 0.0) continue;
      double c, s;
      rotate(d(j - 1), d(j), c, s);
      for (int k = 0; k < n; ++k) {
        const double t1 = J(k, j - 1), t2 = J(k, j);
        J(k, j - 1) = c * t1 + s * t2;
        J(k, j) = -s * t1 + c * t2;
      }
    }
    if (std::abs(d(q)) <= 1e-12 * std::max(1.0, d.norm())) return false;
    R.col(q).head(q + 1) = d.head(q + 1);
    ++q;
    return true;
  }

  void drop(int pos) {
    const int n = static_cast<int>(J.rows());
    for (int j = pos; j < q - 1; ++j) R.col(j) = R.col(j + 1);
    R.col(q - 1).setZero();
    active.erase(active.begin() + pos);
    for (int j = pos; j < q - 1; ++j) {
      double c, s;
      double a = R(j, j), bb = R(j + 1, j);
      if (bb == 0.0) continue;
      rotate(a, bb, c, s);
      for (int k = j; k < q - 1; ++k) {
        const double t1 = R(j, k), t2 = R(j + 1, k);
        R(j, k) = c * t1 + s * t2;
        R(j + 1, k) = -s * t1 + c * t2;
      }
      for (int k = 0; k < n; ++k) {
        const double t1 = J(k, j), t2 = J(k, j + 1);
        J(k, j) = c * t1 + s * t2;
        J(k, j + 1) = -s * t1 + c * t2;
      }
    }
    --q;
  }

  void run() {
    const int n = static_cast<int>(G.rows());
    const int m = static_cast<int>(N.cols());
    u = VecX::Zero(m);

    const int n_o = n - n_diag;
    const MatX Go = G.topLeftCorner(n_o, n_o);
    Eigen::LLT<MatX> llt(Go);
    double reg = 1e-12 * std::max(1.0, n_o > 0 ? Go.diagonal().cwiseAbs().maxCoeff() : 0.0);
    while (llt.info() != Eigen::Success) {
      llt.compute(Go + reg * MatX::Identity(n_o, n_o));
      reg *= 10;
      if (reg > 1e6) {
        status = QpStatus::infeasible;
        return;
      }
    }
    J = MatX::Zero(n, n);
    J.topLeftCorner(n_o, n_o) = llt.matrixL().solve(MatX::Identity(n_o, n_o)).transpose();
    y.resize(n);
    y.head(n_o) = -llt.solve(g.head(n_o));
    for (int k = n_o; k < n; ++k) {
      if (!(G(k, k) > 0.0)) {
        status = QpStatus::infeasible;
        return;
      }
      J(k, k) = 1.0 / std::sqrt(G(k, k));
      y(k) = -g(k) / G(k, k);
    }
    R = MatX::Zero(n, n);
    if (m == 0) return;

    std::vector<char> is_active(m, 0);

    // Bounds on diagonal coordinates enter the active set directly: with the
    // coordinate at zero the point is optimal for the working set, and the
    // multiplier is read off the gradient.
    if (!initial.empty()) {
      std::vector<int> order;
      std::vector<char> used(n, 0);
      for (const auto& [p, j] : initial) {
        const double a = N(j, p);
        const double mult = g(j) / a;
        if (j < n_o || used[j] || is_active[p] || a >= 0.0 || mult < 0.0 || b(p) != 0.0)
          continue;
        used[j] = 1;
        order.push_back(j);
        y(j) = 0.0;
        u(p) = mult;
        active.push_back(p);
        is_active[p] = 1;
      }
      q = static_cast<int>(order.size());
      for (int j = 0; j < n; ++j)
        if (!used[j]) order.push_back(j);
      J = J(Eigen::all, order).eval();
      for (int k = 0; k < q; ++k) R(k, k) = J(order[k], k) * N(order[k], active[k]);
    }

    VecX norms = N.colwise().norm().transpose();

    for (;;) {
      // Most violated (normalized) constraint.
      int p = -1;
      double worst = -tol;
      const VecX s = N.transpose() * y - b;
      for (int i = 0; i < m; ++i) {
        if (is_active[i]) continue;
        if (norms(i) < 1e-14) {
          if (b(i) > tol) {
            status = QpStatus::infeasible;
            return;
          }
          continue;
        }
        const double v = s(i) / norms(i);
        if (v < worst) {
          worst = v;
          p = i;
        }
      }
      if (p < 0) return;

      double up = 0.0;
      for (;;) {
        if (++iterations > max_iter) {
          status = QpStatus::iteration_limit;
          return;
        }
        const VecX d = J.transpose() * N.col(p);
        const VecX z = J.rightCols(n - q) * d.tail(n - q);
        VecX r(q);
        if (q > 0)
          r = R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

        double t1 = kInf;
        int drop_pos = -1;
        for (int j = 0; j < q; ++j) {
          if (r(j) > 0.0) {
            const double t = u(active[j]) / r(j);
            if (t < t1) {
              t1 = t;
              drop_pos = j;
            }
          }
        }
        double t2 = kInf;
        const double zn = z.dot(N.col(p));
        if (z.norm() > 1e-12 * std::max(1.0, d.norm()) && std::abs(zn) > 1e-300)
          t2 = -(N.col(p).dot(y) - b(p)) / zn;

        if (t1 == kInf && t2 == kInf) {
          status = QpStatus::infeasible;
          return;
        }
        if (t2 == kInf) {
          for (int j = 0; j < q; ++j) u(active[j]) -= t1 * r(j);
          up += t1;
          is_active[active[drop_pos]] = 0;
          u(active[drop_pos]) = 0.0;
          drop(drop_pos);
          continue;
        }
        const double t = std::min(t1, t2);
        y += t * z;
        for (int j = 0; j < q; ++j) u(active[j]) -= t * r(j);
        up += t;
        if (t2 <= t1) {
          u(p) = up;
          if (!add(J.transpose() * N.col(p))) {
            // Numerically dependent on the active set; treat as satisfied.
            u(p) = 0.0;
            norms(p) = 0.0;
            break;
          }
          active.push_back(p);
          is_active[p] = 1;
          break;
        }
        is_active[active[drop_pos]] = 0;
        u(active[drop_pos]) = 0.0;
        drop(drop_pos);
      }
    }
  }
};

bool same_matrix(const MatX& a, const MatX& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

struct QpSolver::Cache {
  bool valid = false;
  MatX Aeq;
  std::vector<int> eq_cols;    // columns touched by Aeq
  std::vector<int> free_cols;  // everything else (e.g. slacks)
  MatX Nc;                     // null space of Aeq restricted to eq_cols
  Eigen::CompleteOrthogonalDecomposition<MatX> cod;   // for z0
  Eigen::ColPivHouseholderQR<MatX> qr_t;              // of Aeq_c^T, multipliers

  void build(const MatX& A) {
    Aeq = A;
    eq_cols.clear();
    free_cols.clear();
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      (A.rows() > 0 && A.col(j).cwiseAbs().maxCoeff() > 0.0 ? eq_cols : free_cols)
          .push_back(static_cast<int>(j));
    const int nA = static_cast<int>(eq_cols.size());
    Nc.resize(nA, 0);
    if (nA > 0) {
      const MatX Ac = A(Eigen::all, eq_cols);
      cod.compute(Ac);
      qr_t.compute(Ac.transpose());
      const int rank = static_cast<int>(qr_t.rank());
      const MatX Q = qr_t.householderQ();
      Nc = Q.rightCols(nA - rank);
    }
    valid = true;
  }
};

QpSolver::QpSolver() : cache_(std::make_unique<Cache>()) {}
QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

QpSolution QpSolver::solve(const QpProblem& qp, const QpOptions& options) {
  const int n = qp.variables();
  require(qp.H.cols() == n && qp.f.size() == n, "solve: H/f dimension mismatch");
  require(qp.Aeq.cols() == n || qp.Aeq.rows() == 0, "solve: Aeq dimension mismatch");
  require(qp.Ain.cols() == n || qp.Ain.rows() == 0, "solve: Ain dimension mismatch");
  require(qp.beq.size() == qp.Aeq.rows() && qp.bin.size() == qp.Ain.rows(),
          "solve: right-hand side dimension mismatch");

  const MatX Aeq = qp.Aeq.rows() > 0 ? qp.Aeq : MatX::Zero(0, n);
  const MatX Ain = qp.Ain.rows() > 0 ? qp.Ain : MatX::Zero(0, n);
  const int m_eq = static_cast<int>(Aeq.rows());
  const int m_in = static_cast<int>(Ain.rows());

  Cache& c = *cache_;
  if (!c.valid || !same_matrix(c.Aeq, Aeq)) c.build(Aeq);

  QpSolution sol;
  sol.lambda_eq = VecX::Zero(m_eq);
  sol.lambda_in = VecX::Zero(m_in);

  // Particular solution of the equalities.
  VecX z0 = VecX::Zero(n);
  if (m_eq > 0 && !c.eq_cols.empty()) {
    const VecX zc = c.cod.solve(qp.beq);
    z0(c.eq_cols) = zc;
  }
  if (m_eq > 0) {
    const double res = (Aeq * z0 - qp.beq).lpNorm<Eigen::Infinity>();
    if (res > options.tol * std::max(1.0, qp.beq.lpNorm<Eigen::Infinity>())) {
      sol.z = z0;
      sol.status = QpStatus::infeasible;
      return sol;
    }
  }

  // Reduced problem in y = (y_c, z_free), z = z0 + N y. Free columns with
  // no off-diagonal Hessian coupling (slacks) go last.
  const auto& ec = c.eq_cols;
  std::vector<int> fc, diag_cols;
  for (int j : c.free_cols) {
    bool coupled = false;
    for (int k = 0; k < n && !coupled; ++k) coupled = k != j && qp.H(k, j) != 0.0;
    (coupled ? fc : diag_cols).push_back(j);
  }
  const int n_diag = static_cast<int>(diag_cols.size());
  fc.insert(fc.end(), diag_cols.begin(), diag_cols.end());
  const int nc = static_cast<int>(c.Nc.cols());
  const int nf = static_cast<int>(fc.size());
  const int nr = nc + nf;

  const VecX g_full = qp.H * z0 + qp.f;
  MatX Hr(nr, nr);
  VecX gr(nr);
  MatX Cr(m_in, nr);
  {
    const MatX Hcc = qp.H(ec, ec);
    const MatX Hcf = qp.H(ec, fc);
    const MatX HccN = Hcc * c.Nc;
    Hr.topLeftCorner(nc, nc).noalias() = c.Nc.transpose() * HccN;
    Hr.topRightCorner(nc, nf).noalias() = c.Nc.transpose() * Hcf;
    Hr.bottomLeftCorner(nf, nc) = Hr.topRightCorner(nc, nf).transpose();
    Hr.bottomRightCorner(nf, nf) = qp.H(fc, fc);
    Hr = 0.5 * (Hr + Hr.transpose()).eval();
    Hr.diagonal().array() +=
        options.regularization *
        std::max(1.0, nr > 0 ? Hr.diagonal().cwiseAbs().maxCoeff() : 0.0);
    gr.head(nc).noalias() = c.Nc.transpose() * g_full(ec);
    gr.tail(nf) = g_full(fc);
    if (m_in > 0) {
      Cr.leftCols(nc).noalias() = Ain(Eigen::all, ec) * c.Nc;
      Cr.rightCols(nf) = Ain(Eigen::all, fc);
    }
  }
  const VecX dr = m_in > 0 ? VecX(qp.bin - Ain * z0) : VecX(VecX::Zero(0));

  // C y <= d  <=>  (-C) y >= -d
  const MatX Nmat = -Cr.transpose();
  const VecX bvec = -dr;
  const int max_iter = options.max_iter > 0 ? options.max_iter : 10 * (nr + m_in) + 100;
  DualActiveSet gi{Hr, gr, Nmat, bvec, options.tol, max_iter, n_diag, {}, {}, {}, {}, 0,
                   QpStatus::optimal, {}, {}, 0};
  if (n_diag > 0) {
    std::vector<int> coord_of(n, -1);
    for (int k = 0; k < n_diag; ++k) coord_of[diag_cols[k]] = nr - n_diag + k;
    for (int i = 0; i < m_in; ++i) {
      int col = -1, nnz = 0;
      for (int j = 0; j < n && nnz < 2; ++j)
        if (Ain(i, j) != 0.0) {
          col = j;
          ++nnz;
        }
      if (nnz == 1 && coord_of[col] >= 0 && Ain(i, col) > 0.0)
        gi.initial.emplace_back(i, coord_of[col]);
    }
  }
  gi.run();

  VecX z = z0;
  if (gi.y.size() == nr) {
    z(ec) += c.Nc * gi.y.head(nc);
    z(fc) = z0(fc) + gi.y.tail(nf);
  }
  sol.z = z;
  sol.status = gi.status;
  sol.iterations = gi.iterations;
  if (gi.u.size() == m_in) sol.lambda_in = gi.u;

  if (m_eq > 0 && !ec.empty()) {
    VecX rhs = -(qp.H * z + qp.f);
    if (m_in > 0) rhs.noalias() -= Ain.transpose() * sol.lambda_in;
    sol.lambda_eq = c.qr_t.solve(VecX(rhs(ec)));
  }
  sol.objective = 0.5 * z.dot(qp.H * z) + qp.f.dot(z);
  sol.kkt_residual = kkt_residual(qp, z, sol.lambda_eq, sol.lambda_in);
  return sol;
}

QpSolution solve(const QpProblem& qp, const QpOptions& options) {
  QpSolver solver;
  return solver.solve(qp, options);
}

}  // namespace dmpc
