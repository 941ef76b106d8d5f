#include "schwarzqp/diagnostics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace swz {

namespace {

constexpr int kMaxStacked = 2000;
constexpr double kActivityTol = 1e-7;

void check_size(int n) {
  if (n > kMaxStacked) {
    throw std::invalid_argument(
        "diagnostics: stacked dimension " + std::to_string(n) +
        " exceeds the dense-SVD limit of " + std::to_string(kMaxStacked));
  }
}

std::pair<double, double> extreme_singular_values(const MatrixXd& M) {
  if (M.rows() == 0) return {0.0, 0.0};
  if (M.rows() <= 32) {
    Eigen::JacobiSVD<MatrixXd> svd(M);
    const auto& s = svd.singularValues();
    return {s(s.size() - 1), s(0)};
  }
  Eigen::BDCSVD<MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  return {s(s.size() - 1), s(0)};
}

}  // namespace

StackedLayout StackedLayout::build(const NodeGraph& g, const NodeSet& U) {
  StackedLayout out;
  out.U = U;
  out.offset.resize(U.size());
  for (size_t a = 0; a < U.size(); ++a) {
    out.offset[a] = out.n_total;
    out.n_total += g.dims(U[a]).n();
  }
  return out;
}

int StackedLayout::owner(int s) const {
  auto it = std::upper_bound(offset.begin(), offset.end(), s);
  return static_cast<int>(it - offset.begin()) - 1;
}

MatrixXd build_H(const BlockQP& bqp, const NodeSet& U) {
  const NodeGraph& g = bqp.graph();
  StackedLayout lay = StackedLayout::build(g, U);
  check_size(lay.n_total);
  MatrixXd H = MatrixXd::Zero(lay.n_total, lay.n_total);
  std::vector<int> slot(g.num_nodes(), -1);
  for (size_t a = 0; a < U.size(); ++a) slot[U[a]] = static_cast<int>(a);

  auto place = [&](int a, int b) {
    const int i = U[a], j = U[b];
    const NodeDims di = g.dims(i), dj = g.dims(j);
    const int oi = lay.offset[a], oj = lay.offset[b];
    if (auto q = bqp.Q(i, j)) H.block(oi, oj, di.r, dj.r) = *q;
    if (auto ae = bqp.AE(j, i)) {
      H.block(oi, oj + dj.r, di.r, dj.mE) = ae->transpose();
    }
    if (auto ai = bqp.AI(j, i)) {
      H.block(oi, oj + dj.r + dj.mE, di.r, dj.mI) = ai->transpose();
    }
    if (auto ae = bqp.AE(i, j)) H.block(oi + di.r, oj, di.mE, dj.r) = *ae;
    if (auto ai = bqp.AI(i, j)) {
      H.block(oi + di.r + di.mE, oj, di.mI, dj.r) = *ai;
    }
  };

  for (size_t a = 0; a < U.size(); ++a) {
    place(static_cast<int>(a), static_cast<int>(a));
    for (int j : g.neighbors(U[a])) {
      if (slot[j] >= 0) place(static_cast<int>(a), slot[j]);
    }
  }
  return H;
}

VectorXd stack_signed(const NodeGraph& g, const NodeSet& U,
                      const PrimalDualPoint& z) {
  StackedLayout lay = StackedLayout::build(g, U);
  VectorXd v(lay.n_total);
  for (size_t a = 0; a < U.size(); ++a) {
    const auto& zi = z.at(U[a]);
    const NodeDims d = g.dims(U[a]);
    v.segment(lay.offset[a], d.r) = zi.x;
    v.segment(lay.offset[a] + d.r, d.mE) = zi.lamE;
    v.segment(lay.offset[a] + d.r + d.mE, d.mI) = -zi.lamI;
  }
  return v;
}

VectorXd stack_data(const NodeGraph& g, const NodeSet& U,
                    const std::vector<NodeData>& d) {
  StackedLayout lay = StackedLayout::build(g, U);
  VectorXd v(lay.n_total);
  for (size_t a = 0; a < U.size(); ++a) {
    const NodeDims dm = g.dims(U[a]);
    v.segment(lay.offset[a], dm.r) = d[a].f;
    v.segment(lay.offset[a] + dm.r, dm.mE) = d[a].gE;
    v.segment(lay.offset[a] + dm.r + dm.mE, dm.mI) = d[a].gI;
  }
  return v;
}

BasisInfo extract_basis(const BlockQP& bqp, const NodeSet& U,
                        const SolveReport& report,
                        const std::vector<NodeData>* data) {
  if (report.status != SolveStatus::kOptimal) {
    throw std::invalid_argument("extract_basis: report is not optimal");
  }
  if (data && data->size() != U.size()) {
    throw std::invalid_argument("extract_basis: data override size mismatch");
  }
  const NodeGraph& g = bqp.graph();
  StackedLayout lay = StackedLayout::build(g, U);
  check_size(lay.n_total);
  VectorXd z = stack_signed(g, U, report.point);

  BasisInfo out;
  std::vector<char> in_b(lay.n_total, 0);
  for (int s = 0; s < lay.n_total; ++s) {
    if (std::abs(z(s)) > kActivityTol) in_b[s] = 1;
  }
  // active inequality rows keep their dual index even at lambda ~ 0
  for (size_t a = 0; a < U.size(); ++a) {
    const int i = U[a];
    const NodeDims dm = g.dims(i);
    if (dm.mI == 0) continue;
    VectorXd lhs = VectorXd::Zero(dm.mI);
    auto add = [&](int j) {
      if (auto ai = bqp.AI(i, j)) {
        if (report.point.has(j)) lhs += *ai * report.point.at(j).x;
      }
    };
    add(i);
    for (int j : g.neighbors(i)) {
      if (set_contains(U, j)) add(j);
    }
    VectorXd slack = lhs - (data ? (*data)[a].gI : bqp.gI(i));
    for (int q = 0; q < dm.mI; ++q) {
      const int s = lay.offset[a] + dm.r + dm.mE + q;
      if (std::abs(slack(q)) <= kActivityTol) {
        if (!in_b[s]) out.degenerate = true;  // active with lambda ~ 0
        in_b[s] = 1;
      }
    }
  }
  for (int s = 0; s < lay.n_total; ++s) {
    if (in_b[s]) out.index_set.push_back(s);
  }

  out.rows_of_node.assign(U.size(), {});
  for (size_t p = 0; p < out.index_set.size(); ++p) {
    out.rows_of_node[lay.owner(out.index_set[p])].push_back(
        static_cast<int>(p));
  }

  MatrixXd H = build_H(bqp, U);
  const int nb = static_cast<int>(out.index_set.size());
  out.H_BB.resize(nb, nb);
  for (int r = 0; r < nb; ++r) {
    for (int c = 0; c < nb; ++c) {
      out.H_BB(r, c) = H(out.index_set[r], out.index_set[c]);
    }
  }
  if (nb > 0) {
    Eigen::FullPivLU<MatrixXd> lu(out.H_BB);
    if (!lu.isInvertible()) {
      throw SingularSystemError(
          "extract_basis: H[B,B] singular (degenerate or "
          "strict-complementarity failure)");
    }
    std::tie(out.sigma_min, out.sigma_max) =
        extreme_singular_values(out.H_BB);
  }
  return out;
}

double decay_coefficient(double gamma, double rho, int distance) {
  if (distance == kUnreachable) return 0.0;
  const int exponent = distance <= 1 ? 0 : (distance - 1 + 1) / 2;
  return gamma * std::pow(rho, exponent);
}

DecayProfile decay_profile(const BlockQP& bqp, const NodeSet& U, int j,
                           const NodeData& delta, const SolverConfig& cfg) {
  const NodeGraph& g = bqp.graph();
  if (!set_contains(U, j)) {
    throw std::invalid_argument("decay_profile: node not in U");
  }
  const NodeDims dj = g.dims(j);
  NodeData dlt;
  dlt.f = delta.f.size() ? delta.f : VectorXd::Zero(dj.r);
  dlt.gE = delta.gE.size() ? delta.gE : VectorXd::Zero(dj.mE);
  dlt.gI = delta.gI.size() ? delta.gI : VectorXd::Zero(dj.mI);
  if (dlt.f.size() != dj.r || dlt.gE.size() != dj.mE || dlt.gI.size() != dj.mI) {
    throw std::invalid_argument("decay_profile: delta dims mismatch node");
  }

  std::vector<NodeData> d0 = bqp.data(U);
  std::vector<NodeData> d1 = d0;
  const size_t pos =
      std::lower_bound(U.begin(), U.end(), j) - U.begin();
  d1[pos].f += dlt.f;
  d1[pos].gE += dlt.gE;
  d1[pos].gI += dlt.gI;

  CompactQP qp0 = assemble(bqp, U, &d0);
  CompactQP qp1 = assemble(bqp, U, &d1);
  SolveReport r0 = solve(qp0, cfg);
  SolveReport r1 = solve(qp1, cfg);
  if (r0.status != SolveStatus::kOptimal || r1.status != SolveStatus::kOptimal) {
    throw std::runtime_error(
        std::string("decay_profile: endpoint solve not optimal (") +
        to_string(r0.status) + ", " + to_string(r1.status) + ")");
  }

  BasisInfo b0 = extract_basis(bqp, U, r0, &d0);
  BasisInfo b1 = extract_basis(bqp, U, r1, &d1);

  DecayProfile p;
  p.perturbed_node = j;
  p.U = U;
  p.basis_stable = (b0.index_set == b1.index_set) && !b0.degenerate &&
                   !b1.degenerate;
  {
    const double lo = std::min(b0.sigma_min, b1.sigma_min);
    const double hi = std::max(b0.sigma_max, b1.sigma_max);
    if (hi == 0.0) {  // both endpoints have empty bases
      p.gamma = 0.0;
      p.rho = 0.0;
    } else if (lo == 0.0) {  // one endpoint degenerate; bound vacuous
      p.gamma = std::numeric_limits<double>::infinity();
      p.rho = 1.0;
    } else {
      p.gamma = hi / (lo * lo);
      p.rho = (hi * hi - lo * lo) / (hi * hi + lo * lo);
    }
  }
  VectorXd dstack(dlt.f.size() + dlt.gE.size() + dlt.gI.size());
  dstack << dlt.f, dlt.gE, dlt.gI;
  p.delta_data_norm = dstack.norm();

  auto dist = distances_from_set(g, U, {j});
  p.distance.reserve(U.size());
  p.delta_norm.reserve(U.size());
  p.bound.reserve(U.size());
  for (int i : U) {
    p.distance.push_back(dist[i]);
    const auto& z0 = r0.point.at(i);
    const auto& z1 = r1.point.at(i);
    double s = (z0.x - z1.x).squaredNorm() + (z0.lamE - z1.lamE).squaredNorm() +
               (z0.lamI - z1.lamI).squaredNorm();
    p.delta_norm.push_back(std::sqrt(s));
    p.bound.push_back(p.delta_data_norm == 0
                          ? 0.0
                          : decay_coefficient(p.gamma, p.rho, dist[i]) *
                                p.delta_data_norm);
  }
  return p;
}

void write_profile_csv(const DecayProfile& p, std::ostream& out) {
  out << "node,distance,delta_norm,bound\n";
  char buf[256];
  for (size_t a = 0; a < p.U.size(); ++a) {
    if (p.distance[a] == kUnreachable) {
      std::snprintf(buf, sizeof(buf), "%d,inf,%.17g,%.17g\n", p.U[a],
                    p.delta_norm[a], p.bound[a]);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", p.U[a],
                    p.distance[a], p.delta_norm[a], p.bound[a]);
    }
    out << buf;
  }
}

BoundCheck verify_bound(const DecayProfile& p) {
  BoundCheck c;
  c.asserted = p.basis_stable;
  c.holds.reserve(p.U.size());
  c.margin.reserve(p.U.size());
  for (size_t a = 0; a < p.U.size(); ++a) {
    bool ok = p.delta_norm[a] <= p.bound[a] + 1e-10;
    c.holds.push_back(ok);
    c.margin.push_back(p.bound[a] - p.delta_norm[a]);
    if (!ok) c.all_hold = false;
  }
  return c;
}

SigmaEstimate estimate_sigma(const BlockQP& bqp, const NodeSet& U,
                             const std::vector<NodeData>& d0,
                             const std::vector<NodeData>& d1, int max_samples,
                             const SolverConfig& cfg) {
  if (max_samples < 2) {
    throw std::invalid_argument("estimate_sigma: need at least 2 samples");
  }
  SigmaEstimate est;
  est.sigma_min = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> seen;
  for (int t = 0; t < max_samples; ++t) {
    const double s = static_cast<double>(t) / (max_samples - 1);
    std::vector<NodeData> d(d0.size());
    for (size_t a = 0; a < d0.size(); ++a) {
      d[a].f = (1 - s) * d0[a].f + s * d1[a].f;
      d[a].gE = (1 - s) * d0[a].gE + s * d1[a].gE;
      d[a].gI = (1 - s) * d0[a].gI + s * d1[a].gI;
    }
    CompactQP qp = assemble(bqp, U, &d);
    SolveReport rep = solve(qp, cfg);
    if (rep.status != SolveStatus::kOptimal) continue;
    BasisInfo b = extract_basis(bqp, U, rep, &d);
    est.sigma_min = std::min(est.sigma_min, b.sigma_min);
    est.sigma_max = std::max(est.sigma_max, b.sigma_max);
    if (std::find(seen.begin(), seen.end(), b.index_set) == seen.end()) {
      seen.push_back(b.index_set);
    }
  }
  est.distinct_bases = static_cast<int>(seen.size());
  if (!std::isfinite(est.sigma_min)) est.sigma_min = 0;
  return est;
}

}  // namespace swz
