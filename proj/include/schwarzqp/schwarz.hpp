#pragma once

#include <iosfwd>
#include <utility>

#include "schwarzqp/qp_model.hpp"
#include "schwarzqp/qp_solver.hpp"

namespace swz {

struct SchwarzConfig {
  int omega = 1;
  int K = 4;
  double tol_pr = 1e-2;
  double tol_du = 1e2;
  int max_outer = 1000;
  SolverConfig subsolver;
  int parallelism = 1;
};

enum class SchwarzStatus {
  kConverged,
  kMaxOuter,
  kDiverged,
  kSubdomainInfeasible,
};
const char* to_string(SchwarzStatus s);

/// One outer iteration of the trace.  Row 0 is the initial snapshot
/// (objective of z0, errors unset).
struct TraceRow {
  int iter = 0;
  double objective = 0;
  double eps_pr = 0;
  double eps_du = 0;
  double max_subsolve_time = 0;
  double total_time = 0;
  struct Sub {
    double solve_time = 0;
    int iterations = 0;
    SolveStatus status = SolveStatus::kOptimal;
  };
  std::vector<Sub> subdomains;
};

struct SchwarzTrace {
  std::vector<TraceRow> rows;
  /// CSV columns: iter,objective,eps_pr,eps_du,max_subsolve_time_s,
  /// total_time_s.  Timing columns are written as zeros unless
  /// include_times is set (wall times are not reproducible run to
  /// run; everything else is).
  void write_csv(std::ostream& out, bool include_times = false) const;
};

struct SchwarzResult {
  PrimalDualPoint z;
  SchwarzTrace trace;
  SchwarzStatus status = SchwarzStatus::kMaxOuter;
  int iterations = 0;             // completed outer iterations
  int infeasible_subdomain = -1;  // set for kSubdomainInfeasible
};

/// Synchronous overlapping Schwarz iteration on P_V: per outer
/// iteration every expanded subdomain solves against the same
/// snapshot (Jacobi semantics), restricts to its original block, and
/// the blocks are scattered into the next iterate.  The result is
/// bitwise independent of cfg.parallelism.
///
/// Stops when eps_pr < tol_pr and eps_du < tol_du.  With omega == 0
/// the coupled neighborhood of V_k is not contained in W_k, so the
/// errors fall back to the node-wise change between successive
/// iterates (outside the convergence theory; accepted for
/// experimentation).
SchwarzResult schwarz_solve(const BlockQP& bqp, const NodeSet& V,
                            const OverlapPartition& part,
                            const SchwarzConfig& cfg,
                            const PrimalDualPoint& z0);

/// Proposition-style subdomain residuals: E_k is the difference
/// between the k-th subproblem solution and the assembled iterate on
/// N_V(V_k).  Throws when N_V(V_k) is not contained in W_k.
std::vector<PrimalDualPoint> residual_E(
    const BlockQP& bqp, const NodeSet& V, const OverlapPartition& part,
    const PrimalDualPoint& z_assembled,
    const std::vector<PrimalDualPoint>& subdomain_solutions);

/// (eps_pr, eps_du): max over k of the infinity norm of the primal /
/// dual entries of E_k.
std::pair<double, double> errors_from_E(const std::vector<PrimalDualPoint>& E);

/// Contraction-factor bound alpha = R * Gamma * rho^ceil((omega-1)/2)
/// with Gamma = sigma_hi / sigma_lo^2, rho = (sigma_hi^2 - sigma_lo^2)
/// / (sigma_hi^2 + sigma_lo^2), and R the max over realized
/// subdomains of the summed spectral norms of the coupling blocks
/// H_{-W_k} (a tractable surrogate for the max over all subsets).
double rate_bound(const BlockQP& bqp, const NodeSet& V,
                  const OverlapPartition& part, double sigma_lo,
                  double sigma_hi);

}  // namespace swz
