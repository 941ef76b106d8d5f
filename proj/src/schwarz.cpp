#include "schwarzqp/schwarz.hpp"

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

namespace swz {

const char* to_string(SchwarzStatus s) {
  switch (s) {
    case SchwarzStatus::kConverged: return "converged";
    case SchwarzStatus::kMaxOuter: return "max-outer";
    case SchwarzStatus::kDiverged: return "diverged";
    case SchwarzStatus::kSubdomainInfeasible: return "subdomain-infeasible";
  }
  return "unknown";
}

void SchwarzTrace::write_csv(std::ostream& out, bool include_times) const {
  out << "iter,objective,eps_pr,eps_du,max_subsolve_time_s,total_time_s\n";
  char buf[512];
  for (const auto& r : rows) {
    double ts = include_times ? r.max_subsolve_time : 0.0;
    double tt = include_times ? r.total_time : 0.0;
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.6f,%.6f\n", r.iter,
                  r.objective, r.eps_pr, r.eps_du, ts, tt);
    out << buf;
  }
}

std::vector<PrimalDualPoint> residual_E(
    const BlockQP& bqp, const NodeSet& V, const OverlapPartition& part,
    const PrimalDualPoint& z_assembled,
    const std::vector<PrimalDualPoint>& subdomain_solutions) {
  if (static_cast<int>(subdomain_solutions.size()) != part.K()) {
    throw std::invalid_argument("residual_E: expected one solution per block");
  }
  std::vector<PrimalDualPoint> E;
  E.reserve(part.K());
  for (int k = 0; k < part.K(); ++k) {
    NodeSet nbr = coupled_complement(bqp.graph(), V, part.original[k]);
    if (!is_subset(nbr, part.expanded[k])) {
      throw std::invalid_argument(
          "residual_E: N_V(V_k) not covered by W_k (need omega >= 1)");
    }
    E.push_back(restrict_to(subdomain_solutions[k], nbr) -
                restrict_to(z_assembled, nbr));
  }
  return E;
}

std::pair<double, double> errors_from_E(
    const std::vector<PrimalDualPoint>& E) {
  double pr = 0, du = 0;
  for (const auto& e : E) {
    for (int i : e.nodes()) {
      const auto& v = e.at(i);
      if (v.x.size()) pr = std::max(pr, v.x.cwiseAbs().maxCoeff());
      if (v.lamE.size()) du = std::max(du, v.lamE.cwiseAbs().maxCoeff());
      if (v.lamI.size()) du = std::max(du, v.lamI.cwiseAbs().maxCoeff());
    }
  }
  return {pr, du};
}

double rate_bound(const BlockQP& bqp, const NodeSet& V,
                  const OverlapPartition& part, double sigma_lo,
                  double sigma_hi) {
  if (!(sigma_lo > 0) || sigma_hi < sigma_lo) {
    throw std::invalid_argument("rate_bound: need 0 < sigma_lo <= sigma_hi");
  }
  double R = 0;
  for (int k = 0; k < part.K(); ++k) {
    CouplingBlocks cb = coupling(bqp, V, part.expanded[k]);
    double sum = 0;
    for (const auto& b : cb.blocks) {
      Eigen::JacobiSVD<MatrixXd> svd(b.H);
      sum += svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    }
    R = std::max(R, sum);
  }
  const double gamma = sigma_hi / (sigma_lo * sigma_lo);
  const double rho = (sigma_hi * sigma_hi - sigma_lo * sigma_lo) /
                     (sigma_hi * sigma_hi + sigma_lo * sigma_lo);
  const int exponent = part.omega >= 0 ? part.omega / 2 : 0;
  return R * gamma * std::pow(rho, exponent);
}

namespace {

std::pair<double, double> change_errors(const PrimalDualPoint& a,
                                        const PrimalDualPoint& b) {
  double pr = 0, du = 0;
  for (int i : a.nodes()) {
    const auto& va = a.at(i);
    const auto& vb = b.at(i);
    if (va.x.size()) pr = std::max(pr, (va.x - vb.x).cwiseAbs().maxCoeff());
    if (va.lamE.size()) {
      du = std::max(du, (va.lamE - vb.lamE).cwiseAbs().maxCoeff());
    }
    if (va.lamI.size()) {
      du = std::max(du, (va.lamI - vb.lamI).cwiseAbs().maxCoeff());
    }
  }
  return {pr, du};
}

}  // namespace

SchwarzResult schwarz_solve(const BlockQP& bqp, const NodeSet& V,
                            const OverlapPartition& part,
                            const SchwarzConfig& cfg,
                            const PrimalDualPoint& z0) {
  const auto t0 = std::chrono::steady_clock::now();
  const NodeGraph& g = bqp.graph();
  part.validate(V);
  if (cfg.K != part.K() || cfg.omega != part.omega) {
    throw std::invalid_argument(
        "schwarz_solve: config (K, omega) does not match the partition");
  }
  if (z0.nodes() != V) {
    throw std::invalid_argument("schwarz_solve: z0 must be defined on V");
  }
  const int K = part.K();
  const bool have_E = [&] {
    for (int k = 0; k < K; ++k) {
      NodeSet nbr = coupled_complement(g, V, part.original[k]);
      if (!is_subset(nbr, part.expanded[k])) return false;
    }
    return true;
  }();

  // Per-subdomain structures are assembled once; only the right-hand
  // side changes across iterations.
  std::vector<CompactQP> sub_qp;
  std::vector<NodeSet> sub_boundary;
  sub_qp.reserve(K);
  sub_boundary.reserve(K);
  for (int k = 0; k < K; ++k) {
    sub_qp.push_back(assemble(bqp, part.expanded[k]));
    sub_boundary.push_back(coupled_complement(g, V, part.expanded[k]));
  }

  SchwarzResult res;
  res.z = z0;
  res.trace.rows.push_back(
      {0, bqp.objective(z0), std::numeric_limits<double>::infinity(),
       std::numeric_limits<double>::infinity(), 0.0, 0.0, {}});

  std::vector<PrimalDualPoint> warm(K);
  std::vector<bool> have_warm(K, false);
  std::vector<SolveReport> reports(K);
  std::vector<std::exception_ptr> errors(K);

  double prev_eps_pr = std::numeric_limits<double>::infinity();
  int growth_streak = 0;

  for (int ell = 1; ell <= cfg.max_outer; ++ell) {
    auto run_block = [&](int k) {
      try {
        std::vector<NodeData> d = modified_data(
            bqp, part.expanded[k], restrict_to(res.z, sub_boundary[k]));
        CompactQP& qp = sub_qp[k];  // matrices fixed, only the rhs moves
        for (size_t a = 0; a < qp.U.size(); ++a) {
          qp.f.segment(qp.x_off[a], qp.dims[a].r) = d[a].f;
          qp.gE.segment(qp.e_off[a], qp.dims[a].mE) = d[a].gE;
          qp.gI.segment(qp.i_off[a], qp.dims[a].mI) = d[a].gI;
        }
        reports[k] =
            solve(qp, cfg.subsolver, have_warm[k] ? &warm[k] : nullptr);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    };

    const int P = std::max(1, std::min(cfg.parallelism, K));
    if (P == 1) {
      for (int k = 0; k < K; ++k) run_block(k);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(P);
      for (int w = 0; w < P; ++w) {
        pool.emplace_back([&, w] {
          for (int k = w; k < K; k += P) run_block(k);
        });
      }
      for (auto& t : pool) t.join();
    }
    for (int k = 0; k < K; ++k) {
      if (errors[k]) std::rethrow_exception(errors[k]);
    }

    for (int k = 0; k < K; ++k) {
      if (reports[k].status == SolveStatus::kInfeasible ||
          reports[k].status == SolveStatus::kUnbounded) {
        res.status = SchwarzStatus::kSubdomainInfeasible;
        res.infeasible_subdomain = k;
        res.iterations = ell - 1;
        return res;
      }
    }

    std::vector<PrimalDualPoint> pieces;
    pieces.reserve(K);
    std::vector<PrimalDualPoint> sub_solutions;
    sub_solutions.reserve(K);
    for (int k = 0; k < K; ++k) {
      sub_solutions.push_back(reports[k].point);
      pieces.push_back(restrict_to(reports[k].point, part.original[k]));
      warm[k] = reports[k].point;
      have_warm[k] = true;
    }
    PrimalDualPoint z_next = scatter(pieces);

    double eps_pr, eps_du;
    if (have_E) {
      auto E = residual_E(bqp, V, part, z_next, sub_solutions);
      std::tie(eps_pr, eps_du) = errors_from_E(E);
    } else {
      std::tie(eps_pr, eps_du) = change_errors(z_next, res.z);
    }
    res.z = std::move(z_next);

    TraceRow row;
    row.iter = ell;
    row.objective = bqp.objective(res.z);
    row.eps_pr = eps_pr;
    row.eps_du = eps_du;
    row.total_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    for (int k = 0; k < K; ++k) {
      row.max_subsolve_time =
          std::max(row.max_subsolve_time, reports[k].wall_time);
      row.subdomains.push_back(
          {reports[k].wall_time, reports[k].iterations, reports[k].status});
    }
    res.trace.rows.push_back(std::move(row));
    res.iterations = ell;

    if (eps_pr < cfg.tol_pr && eps_du < cfg.tol_du) {
      res.status = SchwarzStatus::kConverged;
      return res;
    }
    if (res.z.inf_norm() > 1e12) {
      res.status = SchwarzStatus::kDiverged;
      return res;
    }
    growth_streak = eps_pr > prev_eps_pr ? growth_streak + 1 : 0;
    prev_eps_pr = eps_pr;
    if (growth_streak >= 50) {
      res.status = SchwarzStatus::kDiverged;
      return res;
    }
  }
  res.status = SchwarzStatus::kMaxOuter;
  return res;
}

}  // namespace swz
