#pragma once

#include "schwarzqp/qp_model.hpp"
#include "schwarzqp/qp_solver.hpp"

namespace swz {

/// Stacked layout used by the sensitivity machinery: per node of U,
/// the indices of (x_i, lamE_i, lamI_i) in order.  The matrix built
/// over this layout is the symmetric block form
///
///   H_{i,j} = [ Q_{i,j}   AE_{j,i}^T  AI_{j,i}^T ]
///             [ AE_{i,j}  0           0          ]
///             [ AI_{i,j}  0           0          ]
///
/// whose companion solution vector carries signed inequality duals
/// (x, lamE, -lamI), so that H z = d holds row-wise on active rows.
struct StackedLayout {
  NodeSet U;
  std::vector<int> offset;  // per position in U
  int n_total = 0;

  static StackedLayout build(const NodeGraph& g, const NodeSet& U);
  /// position in U owning stacked index s.
  int owner(int s) const;
};

/// Dense symmetric H_U (desk scale; throws above 2000 stacked dims).
MatrixXd build_H(const BlockQP& bqp, const NodeSet& U);

/// (x_i, lamE_i, -lamI_i) stacked per node.
VectorXd stack_signed(const NodeGraph& g, const NodeSet& U,
                      const PrimalDualPoint& z);

/// (f_i, gE_i, gI_i) stacked per node.
VectorXd stack_data(const NodeGraph& g, const NodeSet& U,
                    const std::vector<NodeData>& d);

/// A basis at a solution: the stacked indices with nonzero entries,
/// augmented with the dual indices of active inequality rows, plus
/// the principal submatrix H_U[B,B] and its extreme singular values.
struct BasisInfo {
  std::vector<int> index_set;  // sorted stacked indices
  /// positions inside index_set owned by each node of U (aligned with
  /// the layout's U order).
  std::vector<std::vector<int>> rows_of_node;
  MatrixXd H_BB;
  double sigma_min = 0;
  double sigma_max = 0;
  /// set when an inequality row is both active and has a vanishing
  /// multiplier (strict complementarity failure; basis not unique).
  bool degenerate = false;
};

/// Basis extraction at an optimal solve.  Activity threshold 1e-7 on
/// stacked |z|; active inequality rows (slack <= 1e-7) force their
/// dual index in.  `data` overrides the per-node right-hand sides
/// when the solve used modified data.  Throws SingularSystemError
/// when H_U[B,B] is singular.
BasisInfo extract_basis(const BlockQP& bqp, const NodeSet& U,
                        const SolveReport& report,
                        const std::vector<NodeData>* data = nullptr);

/// Decay coefficient Gamma * rho^ceil((dist-1)/2);
/// zero for unreachable nodes.
double decay_coefficient(double gamma, double rho, int distance);

/// Per-node response to a single-node data perturbation, with the
/// decay bound computed from the bases observed at the two endpoint
/// solutions (exact when the basis is stable, a labeled estimate
/// otherwise).
struct DecayProfile {
  int perturbed_node = -1;
  NodeSet U;
  std::vector<int> distance;       // aligned with U; kUnreachable possible
  std::vector<double> delta_norm;  // ||z_i(d) - z_i(d')||_2
  std::vector<double> bound;       // coefficient * ||delta d_j||_2
  double gamma = 0;
  double rho = 0;
  double delta_data_norm = 0;
  bool basis_stable = false;
};

/// delta holds the perturbation of node j's data; empty members are
/// treated as zero.  Solver failures propagate.
DecayProfile decay_profile(const BlockQP& bqp, const NodeSet& U, int j,
                           const NodeData& delta,
                           const SolverConfig& cfg = {});

void write_profile_csv(const DecayProfile& p, std::ostream& out);

/// Per-node bound check.  `asserted` is true only when the profile's
/// basis was stable (the single-basis regime where the bound is a
/// theorem); otherwise violations are reported, not asserted.
struct BoundCheck {
  std::vector<bool> holds;
  std::vector<double> margin;  // bound - delta_norm
  bool asserted = false;
  bool all_hold = true;
};
BoundCheck verify_bound(const DecayProfile& p);

/// Extreme singular values over the bases visited along the data
/// homotopy d0 -> d1 (at most max_samples solves).  Estimates by
/// construction: the visited bases are a subset of the basis family.
struct SigmaEstimate {
  double sigma_min = 0;
  double sigma_max = 0;
  int distinct_bases = 0;
};
SigmaEstimate estimate_sigma(const BlockQP& bqp, const NodeSet& U,
                             const std::vector<NodeData>& d0,
                             const std::vector<NodeData>& d1, int max_samples,
                             const SolverConfig& cfg = {});

}  // namespace swz
