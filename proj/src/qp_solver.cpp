#include "schwarzqp/qp_solver.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace swz {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kMaxIter: return "max-iter";
  }
  return "unknown";
}

namespace {

struct DenseQP {
  MatrixXd Q, AE, AI;
  VectorXd f, gE, gI;
  int n() const { return static_cast<int>(Q.rows()); }
};

// Thrown inside the active-set loop when a reduced-Hessian
// factorization fails; the driver retries once with a ridge on Q.
struct NeedRidge {};

MatrixXd stack_rows(const MatrixXd& AE, const MatrixXd& AI,
                    const std::vector<int>& W) {
  MatrixXd A(AE.rows() + static_cast<long>(W.size()), AE.cols());
  A.topRows(AE.rows()) = AE;
  for (size_t k = 0; k < W.size(); ++k) A.row(AE.rows() + k) = AI.row(W[k]);
  return A;
}

// Equality-constrained step: minimize the quadratic model subject to
// A p = b, via a null-space factorization.  Throws NeedRidge when the
// reduced Hessian is not numerically positive definite.
VectorXd eqp_step(const MatrixXd& Q, const VectorXd& grad, const MatrixXd& A,
                  const VectorXd& b) {
  const int n = static_cast<int>(Q.rows());
  VectorXd p0 = VectorXd::Zero(n);
  MatrixXd Z;
  if (A.rows() > 0) {
    if (b.cwiseAbs().maxCoeff() > 0) {
      Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
      p0 = cod.solve(b);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(A.transpose());
    const int rank = static_cast<int>(qr.rank());
    if (rank >= n) {
      return p0;  // no null space; the step is fully determined
    }
    MatrixXd Qfull = qr.householderQ();
    Z = Qfull.rightCols(n - rank);
  } else {
    Z = MatrixXd::Identity(n, n);
  }
  MatrixXd Hz = Z.transpose() * Q * Z;
  VectorXd rhs = -Z.transpose() * (grad + Q * p0);
  Eigen::LLT<MatrixXd> llt(Hz);
  if (llt.info() != Eigen::Success) throw NeedRidge{};
  VectorXd pz = llt.solve(rhs);
  double scale = 1.0 + rhs.cwiseAbs().maxCoeff() + pz.cwiseAbs().maxCoeff();
  if (!pz.allFinite() || (Hz * pz - rhs).cwiseAbs().maxCoeff() > 1e-7 * scale) {
    throw NeedRidge{};
  }
  return p0 + Z * pz;
}

struct Multipliers {
  VectorXd lamE;
  VectorXd lamW;  // aligned with W, >= 0 at optimality
};

Multipliers compute_multipliers(const DenseQP& qp, const VectorXd& x,
                                const std::vector<int>& W) {
  const int mE = static_cast<int>(qp.AE.rows());
  const int w = static_cast<int>(W.size());
  MatrixXd M(qp.n(), mE + w);
  if (mE > 0) M.leftCols(mE) = qp.AE.transpose();
  for (int k = 0; k < w; ++k) M.col(mE + k) = -qp.AI.row(W[k]).transpose();
  VectorXd rhs = qp.f - qp.Q * x;
  VectorXd lam;
  if (mE + w > 0) {
    lam = M.colPivHouseholderQr().solve(rhs);
  } else {
    lam.resize(0);
  }
  return {lam.head(mE), lam.tail(w)};
}

struct LoopResult {
  bool optimal = false;  // false: iteration cap hit
  Multipliers mult;
  int iterations = 0;
};

// Primal active-set iteration from a feasible x.  W holds the active
// inequality rows (sorted); equality rows are always active.
LoopResult active_set_loop(const DenseQP& qp, VectorXd& x,
                           std::vector<int>& W, int max_iter) {
  const int mI = static_cast<int>(qp.AI.rows());
  std::vector<char> in_w(mI, 0);
  for (int i : W) in_w[i] = 1;

  LoopResult res;
  while (res.iterations < max_iter) {
    ++res.iterations;
    VectorXd grad = qp.Q * x - qp.f;
    MatrixXd A = stack_rows(qp.AE, qp.AI, W);
    VectorXd b(A.rows());
    if (qp.AE.rows() > 0) b.head(qp.AE.rows()) = qp.gE - qp.AE * x;
    for (size_t k = 0; k < W.size(); ++k) {
      b(qp.AE.rows() + k) = qp.gI(W[k]) - qp.AI.row(W[k]).dot(x);
    }
    VectorXd p = eqp_step(qp.Q, grad, A, b);

    const double step_tol = 1e-11 * (1.0 + x.cwiseAbs().maxCoeff());
    if (p.cwiseAbs().maxCoeff() <= step_tol) {
      res.mult = compute_multipliers(qp, x, W);
      const double mult_tol =
          1e-9 * (1.0 + (res.mult.lamW.size()
                             ? res.mult.lamW.cwiseAbs().maxCoeff()
                             : 0.0));
      int drop = -1;
      double most_negative = -mult_tol;
      for (size_t k = 0; k < W.size(); ++k) {
        if (res.mult.lamW(k) < most_negative) {
          most_negative = res.mult.lamW(k);
          drop = static_cast<int>(k);
        }
      }
      if (drop < 0) {
        res.optimal = true;
        return res;
      }
      in_w[W[drop]] = 0;
      W.erase(W.begin() + drop);
      continue;
    }

    // Ratio test over inactive inequality rows; ties keep the lowest
    // row index (ascending scan with strict improvement).
    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < mI; ++i) {
      if (in_w[i]) continue;
      double d = qp.AI.row(i).dot(p);
      double row_scale = 1.0 + qp.AI.row(i).cwiseAbs().maxCoeff();
      if (d >= -1e-12 * row_scale * (1.0 + p.cwiseAbs().maxCoeff())) continue;
      double slack = qp.AI.row(i).dot(x) - qp.gI(i);
      double ratio = std::max(0.0, slack) / (-d);
      if (ratio < alpha) {
        alpha = ratio;
        blocking = i;
      }
    }
    x += alpha * p;
    if (blocking >= 0) {
      auto it = std::lower_bound(W.begin(), W.end(), blocking);
      W.insert(it, blocking);
      in_w[blocking] = 1;
    }
  }
  res.mult = compute_multipliers(qp, x, W);
  return res;
}

// Minimum-norm correction of `anchor` onto {AE x = gE, A_extra x = b_extra}.
VectorXd project_equalities(const MatrixXd& A, const VectorXd& rhs,
                            const VectorXd& anchor) {
  if (A.rows() == 0) return anchor;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
  return anchor + cod.solve(rhs - A * anchor);
}

struct Phase1Result {
  bool feasible = false;
  VectorXd x;
  int iterations = 0;
};

// Feasible-point computation: equality projection first, then an
// l-infinity slack QP  min t + (delta/2)(|x - anchor|^2 + t^2)
// s.t. AE x = gE, AI x + t >= gI, t >= -1.  The t >= -1 floor keeps
// the margin search bounded.
Phase1Result phase1(const DenseQP& qp, const VectorXd& anchor) {
  Phase1Result out;
  const int n = qp.n();
  const double g_scale =
      1.0 + std::max(qp.gE.size() ? qp.gE.cwiseAbs().maxCoeff() : 0.0,
                     qp.gI.size() ? qp.gI.cwiseAbs().maxCoeff() : 0.0);

  VectorXd x = project_equalities(qp.AE, qp.gE, anchor);
  if (qp.AE.rows() > 0 &&
      (qp.AE * x - qp.gE).cwiseAbs().maxCoeff() > 1e-7 * g_scale) {
    return out;  // inconsistent equalities
  }
  double viol = 0.0;
  if (qp.AI.rows() > 0) {
    viol = (qp.gI - qp.AI * x).maxCoeff();
  }
  if (viol <= 1e-9 * g_scale) {
    out.feasible = true;
    out.x = x;
    return out;
  }

  const double delta = 1e-10;
  const int mI = static_cast<int>(qp.AI.rows());
  DenseQP aux;
  aux.Q = delta * MatrixXd::Identity(n + 1, n + 1);
  aux.f.resize(n + 1);
  aux.f << delta * x, -1.0;
  aux.AE.resize(qp.AE.rows(), n + 1);
  if (qp.AE.rows() > 0) {
    aux.AE << qp.AE, VectorXd::Zero(qp.AE.rows());
  }
  aux.gE = qp.gE;
  aux.AI = MatrixXd::Zero(mI + 1, n + 1);
  aux.AI.topLeftCorner(mI, n) = qp.AI;
  aux.AI.col(n).head(mI).setOnes();
  aux.AI(mI, n) = 1.0;
  aux.gI.resize(mI + 1);
  aux.gI << qp.gI, -1.0;

  VectorXd y(n + 1);
  y << x, viol + 1.0;
  std::vector<int> W;
  LoopResult lr = active_set_loop(aux, y, W, std::max(200, 4 * mI + 50));
  out.iterations = lr.iterations;
  double t = y(n);
  if (t > 1e-6 * g_scale) return out;  // no feasible point to tolerance
  out.feasible = true;
  out.x = y.head(n);
  return out;
}

KktResidual dense_kkt(const DenseQP& qp, const VectorXd& x,
                      const VectorXd& lamE, const VectorXd& lamI) {
  KktResidual r;
  VectorXd stat = qp.Q * x - qp.f;
  if (qp.AE.rows() > 0) stat += qp.AE.transpose() * lamE;
  if (qp.AI.rows() > 0) stat -= qp.AI.transpose() * lamI;
  if (stat.size()) r.stationarity = stat.cwiseAbs().maxCoeff();
  if (qp.AE.rows() > 0) {
    r.primal_eq = (qp.AE * x - qp.gE).cwiseAbs().maxCoeff();
  }
  if (qp.AI.rows() > 0) {
    VectorXd slack = qp.AI * x - qp.gI;
    r.primal_ineq = (-slack).cwiseMax(0.0).maxCoeff();
    r.dual_sign = (-lamI).cwiseMax(0.0).maxCoeff();
    r.complementarity = lamI.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  return r;
}

bool within_tolerance(const KktResidual& r, const DenseQP& qp,
                      const VectorXd& x, const VectorXd& lamE,
                      const VectorXd& lamI, double tol) {
  double fs = 1.0 + qp.f.cwiseAbs().maxCoeff() +
              (qp.Q * x).cwiseAbs().maxCoeff();
  double es = 1.0 + (qp.gE.size() ? qp.gE.cwiseAbs().maxCoeff() : 0.0);
  double is = 1.0 + (qp.gI.size() ? qp.gI.cwiseAbs().maxCoeff() : 0.0);
  double ls = 1.0 + (lamI.size() ? lamI.cwiseAbs().maxCoeff() : 0.0) +
              (lamE.size() ? lamE.cwiseAbs().maxCoeff() : 0.0);
  return r.stationarity <= tol * fs && r.primal_eq <= tol * es &&
         r.primal_ineq <= tol * is && r.dual_sign <= tol * ls &&
         r.complementarity <= tol * ls * is;
}

// Re-solve the saddle system on the final active set; crisp zeros for
// inactive multipliers and exactly-satisfied active rows.
bool polish(const DenseQP& qp, const std::vector<int>& W, VectorXd& x,
            VectorXd& lamE, VectorXd& lamW) {
  MatrixXd A = stack_rows(qp.AE, qp.AI, W);
  VectorXd g(A.rows());
  if (qp.AE.rows() > 0) g.head(qp.AE.rows()) = qp.gE;
  for (size_t k = 0; k < W.size(); ++k) g(qp.AE.rows() + k) = qp.gI(W[k]);

  const int n = qp.n();
  const int m = static_cast<int>(A.rows());
  MatrixXd K = MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = qp.Q;
  if (m > 0) {
    K.topRightCorner(n, m) = A.transpose();
    K.bottomLeftCorner(m, n) = A;
  }
  VectorXd rhs(n + m);
  rhs << qp.f, g;
  Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible()) return false;
  VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;
  x = sol.head(n);
  VectorXd mu = sol.tail(m);
  lamE = mu.head(qp.AE.rows());
  lamW = -mu.tail(W.size());  // saddle multipliers carry the opposite sign
  return true;
}

}  // namespace

SolveReport solve(const CompactQP& cqp, const SolverConfig& cfg,
                  const PrimalDualPoint* warm_start) {
  const auto t_start = std::chrono::steady_clock::now();
  DenseQP qp{cqp.Q_dense(),  cqp.AE_dense(), cqp.AI_dense(),
             cqp.f,          cqp.gE,         cqp.gI};
  const int n = qp.n();
  const int mI = static_cast<int>(qp.AI.rows());

  SolveReport rep;
  auto finish = [&](SolveStatus st, const VectorXd& x, const VectorXd& lamE,
                    const VectorXd& lamI, const std::vector<int>& W) {
    rep.status = st;
    rep.point = cqp.unstack(x, lamE, lamI);
    rep.kkt = dense_kkt(qp, x, lamE, lamI);
    rep.active_ineq = W;
    rep.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t_start)
                        .count();
    return rep;
  };

  if (n == 0) {
    return finish(SolveStatus::kOptimal, VectorXd(), VectorXd::Zero(qp.AE.rows()),
                  VectorXd::Zero(mI), {});
  }

  VectorXd anchor = VectorXd::Zero(n);
  std::vector<int> warm_active;
  if (warm_start) {
    VectorXd wx, wlE, wlI;
    cqp.stack(*warm_start, wx, wlE, wlI);
    anchor = wx;
    for (int i = 0; i < mI; ++i) {
      if (wlI(i) > 1e-8 * (1.0 + wlI.cwiseAbs().maxCoeff())) {
        warm_active.push_back(i);
      }
    }
  }

  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) {
      qp.Q += cfg.regularization_floor * MatrixXd::Identity(n, n);
      rep.regularized = true;
    }
    try {
      VectorXd x;
      std::vector<int> W;
      int used_iters = 0;

      // Warm path: project onto equalities plus the warm active rows;
      // fall back to phase 1 when that point is not feasible.
      bool started = false;
      if (!warm_active.empty()) {
        MatrixXd A = stack_rows(qp.AE, qp.AI, warm_active);
        Eigen::ColPivHouseholderQR<MatrixXd> qr(A.transpose());
        if (qr.rank() == A.rows()) {
          VectorXd rhs(A.rows());
          if (qp.AE.rows() > 0) rhs.head(qp.AE.rows()) = qp.gE;
          for (size_t k = 0; k < warm_active.size(); ++k) {
            rhs(qp.AE.rows() + k) = qp.gI(warm_active[k]);
          }
          VectorXd cand = project_equalities(A, rhs, anchor);
          double g_scale =
              1.0 + (qp.gI.size() ? qp.gI.cwiseAbs().maxCoeff() : 0.0);
          bool ok = (qp.AE.rows() == 0 ||
                     (qp.AE * cand - qp.gE).cwiseAbs().maxCoeff() <
                         1e-7 * g_scale) &&
                    (mI == 0 ||
                     (qp.AI * cand - qp.gI).minCoeff() > -1e-9 * g_scale);
          if (ok) {
            x = cand;
            W = warm_active;
            started = true;
          }
        }
      }
      if (!started) {
        Phase1Result p1 = phase1(qp, anchor);
        used_iters += p1.iterations;
        if (!p1.feasible) {
          return finish(SolveStatus::kInfeasible, anchor,
                        VectorXd::Zero(qp.AE.rows()), VectorXd::Zero(mI), {});
        }
        x = p1.x;
        W.clear();
      }

      LoopResult lr = active_set_loop(qp, x, W, cfg.max_iter);
      rep.iterations = used_iters + lr.iterations;

      VectorXd lamE = lr.mult.lamE.size() ? lr.mult.lamE
                                          : VectorXd::Zero(qp.AE.rows());
      VectorXd lamI = VectorXd::Zero(mI);
      for (size_t k = 0; k < W.size(); ++k) {
        if (lr.mult.lamW.size()) lamI(W[k]) = lr.mult.lamW(k);
      }

      if (lr.optimal) {
        VectorXd px = x, plE = lamE, plW(W.size());
        for (size_t k = 0; k < W.size(); ++k) plW(k) = lamI(W[k]);
        if (polish(qp, W, px, plE, plW)) {
          VectorXd plI = VectorXd::Zero(mI);
          for (size_t k = 0; k < W.size(); ++k) plI(W[k]) = plW(k);
          KktResidual cur = dense_kkt(qp, x, lamE, lamI);
          KktResidual pol = dense_kkt(qp, px, plE, plI);
          if (pol.max() <= cur.max()) {
            x = px;
            lamE = plE;
            lamI = plI;
          }
        }
      }

      KktResidual r = dense_kkt(qp, x, lamE, lamI);
      SolveStatus st;
      if (lr.optimal && within_tolerance(r, qp, x, lamE, lamI, cfg.tol_kkt)) {
        st = SolveStatus::kOptimal;
      } else {
        st = SolveStatus::kMaxIter;
      }
      // A regularized solve that runs off to a huge point signals an
      // objective unbounded below on the feasible set.
      if (rep.regularized &&
          x.cwiseAbs().maxCoeff() >
              1e-3 / std::max(cfg.regularization_floor, 1e-300)) {
        st = SolveStatus::kUnbounded;
      }
      return finish(st, x, lamE, lamI, W);
    } catch (const NeedRidge&) {
      if (attempt == 1) {
        throw SingularSystemError(
            "reduced Hessian not positive definite even with ridge "
            "regularization");
      }
    }
  }
  throw SingularSystemError("unreachable");
}

EqualityKkt solve_equality_kkt(const MatrixXd& Q, const MatrixXd& A,
                               const VectorXd& f, const VectorXd& g) {
  const int n = static_cast<int>(Q.rows());
  const int m = static_cast<int>(A.rows());
  if (Q.cols() != n || A.cols() != n || f.size() != n || g.size() != m) {
    throw std::invalid_argument("solve_equality_kkt: dimension mismatch");
  }
  MatrixXd K = MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = Q;
  if (m > 0) {
    K.topRightCorner(n, m) = A.transpose();
    K.bottomLeftCorner(m, n) = A;
  }
  VectorXd rhs(n + m);
  rhs << f, g;
  Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible()) {
    throw SingularSystemError("equality KKT system is singular");
  }
  VectorXd sol = lu.solve(rhs);
  double scale = 1.0 + rhs.norm();
  if ((K * sol - rhs).norm() > 1e-10 * scale) {
    throw SingularSystemError("equality KKT solve residual too large");
  }
  return {sol.head(n), sol.tail(m)};
}

}  // namespace swz
