#include "schwarzqp/qp_model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <stdexcept>
#include <string>

namespace swz {

namespace {

void check_dim(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("dimension mismatch: " + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// PrimalDualPoint

PrimalDualPoint::PrimalDualPoint(NodeSet nodes, std::vector<NodeVars> vars)
    : nodes_(std::move(nodes)), vars_(std::move(vars)) {
  if (nodes_.size() != vars_.size()) {
    throw std::invalid_argument("PrimalDualPoint: nodes/vars size mismatch");
  }
  if (!std::is_sorted(nodes_.begin(), nodes_.end())) {
    throw std::invalid_argument("PrimalDualPoint: node list must be sorted");
  }
  rebuild_index();
}

PrimalDualPoint PrimalDualPoint::zeros(const NodeGraph& g, const NodeSet& U) {
  std::vector<NodeVars> vars;
  vars.reserve(U.size());
  for (int i : U) {
    const NodeDims& d = g.dims(i);
    vars.push_back({VectorXd::Zero(d.r), VectorXd::Zero(d.mE),
                    VectorXd::Zero(d.mI)});
  }
  return PrimalDualPoint(U, std::move(vars));
}

void PrimalDualPoint::rebuild_index() {
  int max_id = nodes_.empty() ? -1 : nodes_.back();
  pos_.assign(max_id + 1, -1);
  for (int s = 0; s < static_cast<int>(nodes_.size()); ++s) {
    pos_[nodes_[s]] = s;
  }
}

bool PrimalDualPoint::has(int i) const {
  return i >= 0 && i < static_cast<int>(pos_.size()) && pos_[i] >= 0;
}

const PrimalDualPoint::NodeVars& PrimalDualPoint::at(int i) const {
  if (!has(i)) {
    throw std::invalid_argument("PrimalDualPoint: node " + std::to_string(i) +
                                " not in domain");
  }
  return vars_[pos_[i]];
}

PrimalDualPoint::NodeVars& PrimalDualPoint::at(int i) {
  return const_cast<NodeVars&>(std::as_const(*this).at(i));
}

double PrimalDualPoint::node_max_norm() const {
  double best = 0;
  for (const auto& v : vars_) {
    double s = v.x.squaredNorm() + v.lamE.squaredNorm() + v.lamI.squaredNorm();
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

double PrimalDualPoint::inf_norm() const {
  double best = 0;
  for (const auto& v : vars_) {
    if (v.x.size()) best = std::max(best, v.x.cwiseAbs().maxCoeff());
    if (v.lamE.size()) best = std::max(best, v.lamE.cwiseAbs().maxCoeff());
    if (v.lamI.size()) best = std::max(best, v.lamI.cwiseAbs().maxCoeff());
  }
  return best;
}

PrimalDualPoint operator-(const PrimalDualPoint& a, const PrimalDualPoint& b) {
  if (a.nodes_ != b.nodes_) {
    throw std::invalid_argument("PrimalDualPoint difference: domain mismatch");
  }
  std::vector<PrimalDualPoint::NodeVars> vars;
  vars.reserve(a.vars_.size());
  for (size_t s = 0; s < a.vars_.size(); ++s) {
    vars.push_back({a.vars_[s].x - b.vars_[s].x,
                    a.vars_[s].lamE - b.vars_[s].lamE,
                    a.vars_[s].lamI - b.vars_[s].lamI});
  }
  return PrimalDualPoint(a.nodes_, std::move(vars));
}

PrimalDualPoint restrict_to(const PrimalDualPoint& z, const NodeSet& target) {
  std::vector<PrimalDualPoint::NodeVars> vars;
  vars.reserve(target.size());
  for (int i : target) {
    if (!z.has(i)) {
      throw std::invalid_argument("restrict_to: target node " +
                                  std::to_string(i) + " outside source domain");
    }
    vars.push_back(z.at(i));
  }
  return PrimalDualPoint(target, std::move(vars));
}

PrimalDualPoint scatter(const std::vector<PrimalDualPoint>& pieces) {
  std::vector<std::pair<int, const PrimalDualPoint::NodeVars*>> items;
  for (const auto& p : pieces) {
    for (int i : p.nodes()) items.emplace_back(i, &p.at(i));
  }
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t s = 1; s < items.size(); ++s) {
    if (items[s].first == items[s - 1].first) {
      throw std::invalid_argument("scatter: node " +
                                  std::to_string(items[s].first) +
                                  " present in two pieces");
    }
  }
  NodeSet nodes;
  std::vector<PrimalDualPoint::NodeVars> vars;
  nodes.reserve(items.size());
  vars.reserve(items.size());
  for (auto& [i, v] : items) {
    nodes.push_back(i);
    vars.push_back(*v);
  }
  return PrimalDualPoint(std::move(nodes), std::move(vars));
}

// ---------------------------------------------------------------------------
// BlockQP

BlockQP::BlockQP(NodeGraph g) : graph_(std::move(g)) {
  const int n = graph_.num_nodes();
  f_.resize(n);
  gE_.resize(n);
  gI_.resize(n);
  for (int i = 0; i < n; ++i) {
    const NodeDims& d = graph_.dims(i);
    f_[i] = VectorXd::Zero(d.r);
    gE_[i] = VectorXd::Zero(d.mE);
    gI_[i] = VectorXd::Zero(d.mI);
  }
}

std::uint64_t BlockQP::key(int i, int j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint32_t>(j);
}

void BlockQP::check_pair(int i, int j) const {
  const int n = graph_.num_nodes();
  if (i < 0 || i >= n || j < 0 || j >= n) {
    throw std::invalid_argument("BlockQP: node id out of range");
  }
  if (i != j && !graph_.has_edge(i, j)) {
    throw std::invalid_argument("BlockQP: block (" + std::to_string(i) + "," +
                                std::to_string(j) +
                                ") violates graph sparsity");
  }
}

void BlockQP::set_Q(int i, int j, MatrixXd q) {
  check_pair(i, j);
  check_dim(q.rows() == graph_.dims(i).r && q.cols() == graph_.dims(j).r,
            "Q block (" + std::to_string(i) + "," + std::to_string(j) + ")");
  Q_[key(i, j)] = std::move(q);
}

void BlockQP::set_AE(int i, int j, MatrixXd a) {
  check_pair(i, j);
  check_dim(a.rows() == graph_.dims(i).mE && a.cols() == graph_.dims(j).r,
            "AE block (" + std::to_string(i) + "," + std::to_string(j) + ")");
  AE_[key(i, j)] = std::move(a);
}

void BlockQP::set_AI(int i, int j, MatrixXd a) {
  check_pair(i, j);
  check_dim(a.rows() == graph_.dims(i).mI && a.cols() == graph_.dims(j).r,
            "AI block (" + std::to_string(i) + "," + std::to_string(j) + ")");
  AI_[key(i, j)] = std::move(a);
}

void BlockQP::set_f(int i, VectorXd v) {
  check_dim(v.size() == graph_.dims(i).r, "f at node " + std::to_string(i));
  f_.at(i) = std::move(v);
}

void BlockQP::set_gE(int i, VectorXd v) {
  check_dim(v.size() == graph_.dims(i).mE, "gE at node " + std::to_string(i));
  gE_.at(i) = std::move(v);
}

void BlockQP::set_gI(int i, VectorXd v) {
  check_dim(v.size() == graph_.dims(i).mI, "gI at node " + std::to_string(i));
  gI_.at(i) = std::move(v);
}

std::optional<MatrixXd> BlockQP::Q(int i, int j) const {
  if (auto it = Q_.find(key(i, j)); it != Q_.end()) return it->second;
  if (auto it = Q_.find(key(j, i)); it != Q_.end()) {
    return it->second.transpose();
  }
  return std::nullopt;
}

std::optional<MatrixXd> BlockQP::AE(int i, int j) const {
  if (auto it = AE_.find(key(i, j)); it != AE_.end()) return it->second;
  return std::nullopt;
}

std::optional<MatrixXd> BlockQP::AI(int i, int j) const {
  if (auto it = AI_.find(key(i, j)); it != AI_.end()) return it->second;
  return std::nullopt;
}

std::vector<NodeData> BlockQP::data(const NodeSet& U) const {
  std::vector<NodeData> out;
  out.reserve(U.size());
  for (int i : U) out.push_back(data(i));
  return out;
}

namespace {
std::vector<std::pair<int, int>> keys_of(
    const std::unordered_map<std::uint64_t, MatrixXd>& m) {
  std::vector<std::pair<int, int>> out;
  out.reserve(m.size());
  for (const auto& [k, v] : m) {
    out.emplace_back(static_cast<int>(k >> 32),
                     static_cast<int>(k & 0xffffffffu));
  }
  std::sort(out.begin(), out.end());
  return out;
}
}  // namespace

std::vector<std::pair<int, int>> BlockQP::stored_Q() const { return keys_of(Q_); }
std::vector<std::pair<int, int>> BlockQP::stored_AE() const { return keys_of(AE_); }
std::vector<std::pair<int, int>> BlockQP::stored_AI() const { return keys_of(AI_); }

void BlockQP::validate() const {
  for (auto [i, j] : stored_Q()) {
    auto it_ij = Q_.find(key(i, j));
    auto it_ji = Q_.find(key(j, i));
    if (it_ji == Q_.end()) continue;
    const MatrixXd& a = it_ij->second;
    const MatrixXd& b = it_ji->second;
    double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - b.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw std::invalid_argument("BlockQP: Q(" + std::to_string(i) + "," +
                                  std::to_string(j) +
                                  ") != Q(j,i)^T");
    }
  }
}

double BlockQP::min_Q_eigenvalue(const NodeSet& U) const {
  CompactQP qp = assemble(*this, U);
  MatrixXd Q = qp.Q_dense();
  if (Q.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Q);
  return es.eigenvalues().minCoeff();
}

double BlockQP::objective(const PrimalDualPoint& z) const {
  double quad = 0, lin = 0;
  const NodeSet& U = z.nodes();
  for (int i : U) {
    const VectorXd& xi = z.at(i).x;
    lin += f(i).dot(xi);
    if (auto q = Q(i, i)) quad += xi.dot(*q * xi);
    for (int j : graph_.neighbors(i)) {
      if (!z.has(j)) continue;
      if (auto q = Q(i, j)) quad += xi.dot(*q * z.at(j).x);
    }
  }
  return 0.5 * quad - lin;
}

// ---------------------------------------------------------------------------
// CompactQP / assemble

MatrixXd CompactQP::Q_dense() const { return sparse_ ? MatrixXd(Qs_) : Qd_; }
MatrixXd CompactQP::AE_dense() const { return sparse_ ? MatrixXd(AEs_) : AEd_; }
MatrixXd CompactQP::AI_dense() const { return sparse_ ? MatrixXd(AIs_) : AId_; }

PrimalDualPoint CompactQP::unstack(const VectorXd& x, const VectorXd& lamE,
                                   const VectorXd& lamI) const {
  check_dim(x.size() == rU && lamE.size() == mEU && lamI.size() == mIU,
            "unstack");
  std::vector<PrimalDualPoint::NodeVars> vars;
  vars.reserve(U.size());
  for (size_t a = 0; a < U.size(); ++a) {
    vars.push_back({x.segment(x_off[a], dims[a].r),
                    lamE.segment(e_off[a], dims[a].mE),
                    lamI.segment(i_off[a], dims[a].mI)});
  }
  return PrimalDualPoint(U, std::move(vars));
}

void CompactQP::stack(const PrimalDualPoint& z, VectorXd& x, VectorXd& lamE,
                      VectorXd& lamI) const {
  x.resize(rU);
  lamE.resize(mEU);
  lamI.resize(mIU);
  for (size_t a = 0; a < U.size(); ++a) {
    const auto& v = z.at(U[a]);
    check_dim(v.x.size() == dims[a].r && v.lamE.size() == dims[a].mE &&
                  v.lamI.size() == dims[a].mI,
              "stack at node " + std::to_string(U[a]));
    x.segment(x_off[a], dims[a].r) = v.x;
    lamE.segment(e_off[a], dims[a].mE) = v.lamE;
    lamI.segment(i_off[a], dims[a].mI) = v.lamI;
  }
}

CompactQP assemble(const BlockQP& bqp, const NodeSet& U,
                   const std::vector<NodeData>* data_override) {
  const NodeGraph& g = bqp.graph();
  if (data_override && data_override->size() != U.size()) {
    throw std::invalid_argument("assemble: data override size mismatch");
  }
  CompactQP qp;
  qp.U = U;
  qp.dims.reserve(U.size());
  for (int i : U) qp.dims.push_back(g.dims(i));

  qp.x_off.resize(U.size());
  qp.e_off.resize(U.size());
  qp.i_off.resize(U.size());
  for (size_t a = 0; a < U.size(); ++a) {
    qp.x_off[a] = qp.rU;
    qp.e_off[a] = qp.mEU;
    qp.i_off[a] = qp.mIU;
    qp.rU += qp.dims[a].r;
    qp.mEU += qp.dims[a].mE;
    qp.mIU += qp.dims[a].mI;
  }

  qp.f.resize(qp.rU);
  qp.gE.resize(qp.mEU);
  qp.gI.resize(qp.mIU);
  for (size_t a = 0; a < U.size(); ++a) {
    const NodeData d =
        data_override ? (*data_override)[a] : bqp.data(U[a]);
    check_dim(d.f.size() == qp.dims[a].r && d.gE.size() == qp.dims[a].mE &&
                  d.gI.size() == qp.dims[a].mI,
              "assemble data at node " + std::to_string(U[a]));
    qp.f.segment(qp.x_off[a], qp.dims[a].r) = d.f;
    qp.gE.segment(qp.e_off[a], qp.dims[a].mE) = d.gE;
    qp.gI.segment(qp.i_off[a], qp.dims[a].mI) = d.gI;
  }

  using T = Eigen::Triplet<double>;
  std::vector<T> tq, te, ti;
  auto add_block = [](std::vector<T>& trip, int r0, int c0, const MatrixXd& m) {
    for (int c = 0; c < m.cols(); ++c) {
      for (int r = 0; r < m.rows(); ++r) {
        if (m(r, c) != 0.0) trip.emplace_back(r0 + r, c0 + c, m(r, c));
      }
    }
  };

  std::vector<int> slot(g.num_nodes(), -1);
  for (size_t a = 0; a < U.size(); ++a) slot[U[a]] = static_cast<int>(a);

  for (size_t a = 0; a < U.size(); ++a) {
    const int i = U[a];
    if (auto q = bqp.Q(i, i)) add_block(tq, qp.x_off[a], qp.x_off[a], *q);
    if (auto ae = bqp.AE(i, i)) add_block(te, qp.e_off[a], qp.x_off[a], *ae);
    if (auto ai = bqp.AI(i, i)) add_block(ti, qp.i_off[a], qp.x_off[a], *ai);
    for (int j : g.neighbors(i)) {
      int b = slot[j];
      if (b < 0) continue;
      if (i < j) {
        if (auto q = bqp.Q(i, j)) {
          add_block(tq, qp.x_off[a], qp.x_off[b], *q);
          add_block(tq, qp.x_off[b], qp.x_off[a], q->transpose());
        }
      }
      if (auto ae = bqp.AE(i, j)) add_block(te, qp.e_off[a], qp.x_off[b], *ae);
      if (auto ai = bqp.AI(i, j)) add_block(ti, qp.i_off[a], qp.x_off[b], *ai);
    }
  }

  qp.sparse_ = qp.rU > CompactQP::kSparseThreshold;
  if (qp.sparse_) {
    qp.Qs_.resize(qp.rU, qp.rU);
    qp.AEs_.resize(qp.mEU, qp.rU);
    qp.AIs_.resize(qp.mIU, qp.rU);
    qp.Qs_.setFromTriplets(tq.begin(), tq.end());
    qp.AEs_.setFromTriplets(te.begin(), te.end());
    qp.AIs_.setFromTriplets(ti.begin(), ti.end());
  } else {
    qp.Qd_ = MatrixXd::Zero(qp.rU, qp.rU);
    qp.AEd_ = MatrixXd::Zero(qp.mEU, qp.rU);
    qp.AId_ = MatrixXd::Zero(qp.mIU, qp.rU);
    for (const auto& t : tq) qp.Qd_(t.row(), t.col()) += t.value();
    for (const auto& t : te) qp.AEd_(t.row(), t.col()) += t.value();
    for (const auto& t : ti) qp.AId_(t.row(), t.col()) += t.value();
  }
  return qp;
}

// ---------------------------------------------------------------------------
// Coupling and modified data

namespace {

MatrixXd coupling_block(const BlockQP& bqp, int i, int j) {
  const NodeDims di = bqp.graph().dims(i);
  const NodeDims dj = bqp.graph().dims(j);
  MatrixXd H = MatrixXd::Zero(di.n(), dj.n());
  if (auto q = bqp.Q(i, j)) H.block(0, 0, di.r, dj.r) = *q;
  if (auto ae = bqp.AE(j, i)) {
    H.block(0, dj.r, di.r, dj.mE) = ae->transpose();
  }
  if (auto ai = bqp.AI(j, i)) {
    H.block(0, dj.r + dj.mE, di.r, dj.mI) = -ai->transpose();
  }
  if (auto ae = bqp.AE(i, j)) H.block(di.r, 0, di.mE, dj.r) = *ae;
  if (auto ai = bqp.AI(i, j)) H.block(di.r + di.mE, 0, di.mI, dj.r) = *ai;
  return H;
}

}  // namespace

CouplingBlocks coupling(const BlockQP& bqp, const NodeSet& V,
                        const NodeSet& U) {
  CouplingBlocks out;
  out.U = U;
  out.boundary = coupled_complement(bqp.graph(), V, U);
  for (int i : U) {
    for (int j : bqp.graph().neighbors(i)) {
      if (set_contains(out.boundary, j)) {
        out.blocks.push_back({i, j, coupling_block(bqp, i, j)});
      }
    }
  }
  std::sort(out.blocks.begin(), out.blocks.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.i, a.j) < std::tie(b.i, b.j);
            });
  return out;
}

std::vector<VectorXd> CouplingBlocks::apply(
    const NodeGraph& g, const PrimalDualPoint& z_boundary) const {
  std::vector<VectorXd> out;
  out.reserve(U.size());
  std::vector<int> slot(g.num_nodes(), -1);
  for (size_t a = 0; a < U.size(); ++a) {
    slot[U[a]] = static_cast<int>(a);
    out.push_back(VectorXd::Zero(g.dims(U[a]).n()));
  }
  for (const auto& blk : blocks) {
    const auto& v = z_boundary.at(blk.j);
    VectorXd zj(v.x.size() + v.lamE.size() + v.lamI.size());
    zj << v.x, v.lamE, v.lamI;
    out[slot[blk.i]] += blk.H * zj;
  }
  return out;
}

std::vector<NodeData> modified_data(const BlockQP& bqp, const NodeSet& U,
                                    const PrimalDualPoint& z_boundary) {
  const NodeGraph& g = bqp.graph();
  for (int j : z_boundary.nodes()) {
    if (set_contains(U, j)) {
      throw std::invalid_argument(
          "modified_data: boundary point overlaps U at node " +
          std::to_string(j));
    }
  }
  std::vector<NodeData> out;
  out.reserve(U.size());
  for (int i : U) {
    NodeData d = bqp.data(i);
    for (int j : g.neighbors(i)) {
      if (!z_boundary.has(j)) continue;
      const auto& zj = z_boundary.at(j);
      if (auto q = bqp.Q(i, j)) d.f -= *q * zj.x;
      if (auto ae = bqp.AE(j, i)) d.f -= ae->transpose() * zj.lamE;
      if (auto ai = bqp.AI(j, i)) d.f += ai->transpose() * zj.lamI;
      if (auto ae = bqp.AE(i, j)) d.gE -= *ae * zj.x;
      if (auto ai = bqp.AI(i, j)) d.gI -= *ai * zj.x;
    }
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// KKT residual

double KktResidual::max() const {
  return std::max({stationarity, primal_eq, primal_ineq, dual_sign,
                   complementarity});
}

KktResidual kkt_residual(const BlockQP& bqp, const NodeSet& U,
                         const std::vector<NodeData>& d,
                         const PrimalDualPoint& z) {
  if (d.size() != U.size()) {
    throw std::invalid_argument("kkt_residual: data size mismatch");
  }
  const NodeGraph& g = bqp.graph();
  KktResidual res;
  auto max_abs = [](double& acc, const VectorXd& v) {
    if (v.size()) acc = std::max(acc, v.cwiseAbs().maxCoeff());
  };
  for (size_t a = 0; a < U.size(); ++a) {
    const int i = U[a];
    const auto& zi = z.at(i);
    VectorXd stat = -d[a].f;
    VectorXd eq = -d[a].gE;
    VectorXd ineq_lhs = VectorXd::Zero(g.dims(i).mI);

    auto accumulate = [&](int j, const PrimalDualPoint::NodeVars& zj) {
      if (auto q = bqp.Q(i, j)) stat += *q * zj.x;
      if (auto ae = bqp.AE(j, i)) stat += ae->transpose() * zj.lamE;
      if (auto ai = bqp.AI(j, i)) stat -= ai->transpose() * zj.lamI;
      if (auto ae = bqp.AE(i, j)) eq += *ae * zj.x;
      if (auto ai = bqp.AI(i, j)) ineq_lhs += *ai * zj.x;
    };
    accumulate(i, zi);
    for (int j : g.neighbors(i)) {
      if (set_contains(U, j)) accumulate(j, z.at(j));
    }

    VectorXd slack = ineq_lhs - d[a].gI;  // AI x - gI, must be >= 0
    max_abs(res.stationarity, stat);
    max_abs(res.primal_eq, eq);
    if (slack.size()) {
      res.primal_ineq =
          std::max(res.primal_ineq, (-slack).cwiseMax(0.0).maxCoeff());
      res.dual_sign =
          std::max(res.dual_sign, (-zi.lamI).cwiseMax(0.0).maxCoeff());
      max_abs(res.complementarity, VectorXd(zi.lamI.cwiseProduct(slack)));
    }
  }
  return res;
}

KktResidual kkt_residual(const BlockQP& bqp, const NodeSet& U,
                         const PrimalDualPoint& z) {
  return kkt_residual(bqp, U, bqp.data(U), z);
}

}  // namespace swz
