#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <unordered_map>
#include <vector>

#include "schwarzqp/graph.hpp"

namespace swz {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

/// Per-node right-hand-side data d_i = (f_i, gE_i, gI_i).
struct NodeData {
  VectorXd f;
  VectorXd gE;
  VectorXd gI;
};

/// Primal-dual values over an ordered (sorted) node set: per node the
/// primal block x_i and the equality/inequality multipliers.
class PrimalDualPoint {
 public:
  struct NodeVars {
    VectorXd x;
    VectorXd lamE;
    VectorXd lamI;
  };

  PrimalDualPoint() = default;
  PrimalDualPoint(NodeSet nodes, std::vector<NodeVars> vars);

  /// All-zero point with dims taken from the graph.
  static PrimalDualPoint zeros(const NodeGraph& g, const NodeSet& U);

  const NodeSet& nodes() const { return nodes_; }
  bool has(int i) const;
  const NodeVars& at(int i) const;
  NodeVars& at(int i);
  bool empty() const { return nodes_.empty(); }

  /// max over nodes of the per-node 2-norm of (x, lamE, lamI); the
  /// ||.||_{U,inf} norm.
  double node_max_norm() const;
  /// plain infinity norm over every stored entry.
  double inf_norm() const;

  /// Componentwise difference on the common domain (domains must match).
  friend PrimalDualPoint operator-(const PrimalDualPoint& a,
                                   const PrimalDualPoint& b);

 private:
  void rebuild_index();
  NodeSet nodes_;
  std::vector<NodeVars> vars_;
  std::vector<int> pos_;  // node id -> slot, -1 if absent
};

/// Copy the entries of z belonging to `target` (a subset of z's
/// domain); the restriction operator.
PrimalDualPoint restrict_to(const PrimalDualPoint& z, const NodeSet& target);

/// Node-wise union of points over pairwise-disjoint domains.
PrimalDualPoint scatter(const std::vector<PrimalDualPoint>& pieces);

/// Block data of a graph-structured QP.  Hessian blocks Q_{i,j},
/// constraint blocks AE_{i,j}/AI_{i,j} (rows belong to node i,
/// columns to node j), and per-node data vectors.  Blocks may only be
/// attached to a node pair with j in N[i]; absent blocks are zero.
/// Q_{j,i} is materialized as Q_{i,j}^T when only one side is stored.
class BlockQP {
 public:
  explicit BlockQP(NodeGraph g);

  const NodeGraph& graph() const { return graph_; }

  void set_Q(int i, int j, MatrixXd q);
  void set_AE(int i, int j, MatrixXd a);
  void set_AI(int i, int j, MatrixXd a);
  void set_f(int i, VectorXd v);
  void set_gE(int i, VectorXd v);
  void set_gI(int i, VectorXd v);

  /// Q block (i, j); falls back to the transpose of (j, i), then to
  /// zero.  Returns nullopt when neither direction is stored.
  std::optional<MatrixXd> Q(int i, int j) const;
  std::optional<MatrixXd> AE(int i, int j) const;
  std::optional<MatrixXd> AI(int i, int j) const;

  const VectorXd& f(int i) const { return f_.at(i); }
  const VectorXd& gE(int i) const { return gE_.at(i); }
  const VectorXd& gI(int i) const { return gI_.at(i); }
  NodeData data(int i) const { return {f(i), gE(i), gI(i)}; }
  std::vector<NodeData> data(const NodeSet& U) const;

  /// Stored Q keys as (i, j) pairs (one per stored direction).
  std::vector<std::pair<int, int>> stored_Q() const;
  std::vector<std::pair<int, int>> stored_AE() const;
  std::vector<std::pair<int, int>> stored_AI() const;

  /// Checks Q_{i,j} = Q_{j,i}^T for pairs stored in both directions
  /// and that every per-node vector has the dims declared by the
  /// graph.  Throws std::invalid_argument on violation.
  void validate() const;

  /// Smallest eigenvalue of the assembled Q_U (dense; desk scale).
  double min_Q_eigenvalue(const NodeSet& U) const;

  /// 1/2 x^T Q x - f^T x accumulated block-wise over z's domain.
  double objective(const PrimalDualPoint& z) const;

 private:
  static std::uint64_t key(int i, int j);
  void check_pair(int i, int j) const;

  NodeGraph graph_;
  std::unordered_map<std::uint64_t, MatrixXd> Q_, AE_, AI_;
  std::vector<VectorXd> f_, gE_, gI_;
};

/// Compact (stacked) form of P_U: matrices over the node order of U.
/// Row/column layout: x blocks at x_off, equality rows at e_off,
/// inequality rows at i_off.  Storage switches to compressed sparse
/// above kSparseThreshold primal variables.
class CompactQP {
 public:
  static constexpr int kSparseThreshold = 500;

  NodeSet U;
  std::vector<NodeDims> dims;       // aligned with U
  std::vector<int> x_off, e_off, i_off;
  int rU = 0, mEU = 0, mIU = 0;

  VectorXd f, gE, gI;

  bool sparse() const { return sparse_; }
  MatrixXd Q_dense() const;
  MatrixXd AE_dense() const;
  MatrixXd AI_dense() const;
  const SpMat& Q_sparse() const { return Qs_; }
  const SpMat& AE_sparse() const { return AEs_; }
  const SpMat& AI_sparse() const { return AIs_; }

  int n_total() const { return rU + mEU + mIU; }

  /// Split a stacked (x, lamE, lamI) triple back into a node-indexed
  /// point.
  PrimalDualPoint unstack(const VectorXd& x, const VectorXd& lamE,
                          const VectorXd& lamI) const;
  void stack(const PrimalDualPoint& z, VectorXd& x, VectorXd& lamE,
             VectorXd& lamI) const;

  friend CompactQP assemble(const BlockQP& bqp, const NodeSet& U,
                            const std::vector<NodeData>* data_override);

 private:
  bool sparse_ = false;
  MatrixXd Qd_, AEd_, AId_;
  SpMat Qs_, AEs_, AIs_;
};

/// Assemble the compact form of P_U; data_override (aligned with U)
/// substitutes the per-node right-hand sides, e.g. the output of
/// modified_data.  Throws on missing per-node data or dim mismatch.
CompactQP assemble(const BlockQP& bqp, const NodeSet& U,
                   const std::vector<NodeData>* data_override = nullptr);

/// Off-domain coupling blocks H_{i,j} for i in U, j in the coupled
/// complementary region, one block per crossing edge.  Layout of each
/// n_i x n_j block (rows: stationarity_i, eq_i, ineq_i / cols: x_j,
/// lamE_j, lamI_j):
///
///   [ Q_{i,j}   AE_{j,i}^T  -AI_{j,i}^T ]
///   [ AE_{i,j}  0            0          ]
///   [ AI_{i,j}  0            0          ]
///
/// The sign on the inequality-dual column matches the stationarity
/// convention Q x + AE^T lamE - AI^T lamI = f with lamI >= 0.
struct CouplingBlocks {
  NodeSet U;
  NodeSet boundary;
  struct Entry {
    int i, j;
    MatrixXd H;
  };
  std::vector<Entry> blocks;  // sorted by (i, j)

  /// H_{-U} z_{-U}: per-node products, aligned with U, each of size
  /// n_i (zero where no crossing edge touches i).
  std::vector<VectorXd> apply(const NodeGraph& g,
                              const PrimalDualPoint& z_boundary) const;
};

CouplingBlocks coupling(const BlockQP& bqp, const NodeSet& V,
                        const NodeSet& U);

/// Right-hand-side data of the consistent subproblem: d_U minus the
/// coupling contribution of the boundary values.  z_boundary's domain
/// defines which exterior neighbors count (it must be disjoint from
/// U); nodes absent from it contribute nothing.
std::vector<NodeData> modified_data(const BlockQP& bqp, const NodeSet& U,
                                    const PrimalDualPoint& z_boundary);

/// The five KKT residual groups at z, infinity norms.
struct KktResidual {
  double stationarity = 0;
  double primal_eq = 0;
  double primal_ineq = 0;      // violation of AI x >= gI
  double dual_sign = 0;        // violation of lamI >= 0
  double complementarity = 0;  // |lamI .* (AI x - gI)|
  double max() const;
};

KktResidual kkt_residual(const BlockQP& bqp, const NodeSet& U,
                         const std::vector<NodeData>& d,
                         const PrimalDualPoint& z);
KktResidual kkt_residual(const BlockQP& bqp, const NodeSet& U,
                         const PrimalDualPoint& z);

}  // namespace swz
