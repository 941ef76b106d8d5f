#pragma once

#include <stdexcept>

#include "schwarzqp/qp_model.hpp"

namespace swz {

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kMaxIter };
const char* to_string(SolveStatus s);

struct SolverConfig {
  double tol_kkt = 1e-9;
  int max_iter = 200;               // active-set changes
  double regularization_floor = 1e-12;
};

/// Outcome of a subproblem solve: the primal-dual point, the raw KKT
/// residual groups at it, and whether a diagonal ridge had to be
/// added to Q to factorize (reported, never silent).
struct SolveReport {
  PrimalDualPoint point;
  SolveStatus status = SolveStatus::kMaxIter;
  KktResidual kkt;
  int iterations = 0;
  double wall_time = 0.0;
  bool regularized = false;
  std::vector<int> active_ineq;  // stacked inequality rows active at exit
};

/// Factorization failure that regularization could not rescue;
/// signals an SOSC/LICQ violation in the data.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Primal active-set solve of the compact QP
///   min 1/2 x^T Q x - f^T x   s.t.  AE x = gE,  AI x >= gI
/// under the convention  Q x + AE^T lamE - AI^T lamI = f,  lamI >= 0.
/// Deterministic: ties in the ratio test and in the multiplier drop
/// rule go to the lowest row index.  A warm-start point seeds the
/// initial working set and the feasibility anchor.
SolveReport solve(const CompactQP& qp, const SolverConfig& cfg = {},
                  const PrimalDualPoint* warm_start = nullptr);

/// Saddle system [Q A^T; A 0] [x; lam] = [f; g] by a rank-revealing
/// dense factorization.  Throws SingularSystemError when the system
/// is singular or the residual exceeds 1e-10 * (1 + ||(f, g)||).
struct EqualityKkt {
  VectorXd x;
  VectorXd lam;
};
EqualityKkt solve_equality_kkt(const MatrixXd& Q, const MatrixXd& A,
                               const VectorXd& f, const VectorXd& g);

}  // namespace swz
