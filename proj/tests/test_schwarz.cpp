#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "schwarzqp/schwarz.hpp"
#include "test_util.hpp"

using namespace swz;
using swztest::Rng;

namespace {

SchwarzConfig tight_config(const OverlapPartition& part) {
  SchwarzConfig cfg;
  cfg.K = part.K();
  cfg.omega = part.omega;
  cfg.tol_pr = 1e-9;
  cfg.tol_du = 1e-9;
  cfg.max_outer = 400;
  cfg.subsolver.tol_kkt = 1e-10;
  return cfg;
}

// unconstrained diagonally dominant path QP where the per-subdomain
// singular values (and hence the contraction bound) are exact
swztest::RandomInstance decay_instance(int n, double diag, double coupling,
                                       Rng& rng) {
  std::vector<NodeDims> dims(n, NodeDims{1, 0, 0});
  NodeGraph g(n, swztest::path_edges(n), dims);
  BlockQP bqp(g);
  for (int i = 0; i < n; ++i) {
    bqp.set_Q(i, i, MatrixXd::Constant(1, 1, diag));
    bqp.set_f(i, VectorXd::Constant(1, rng.normal(0, 1.0)));
  }
  for (auto [i, j] : g.edges()) {
    bqp.set_Q(i, j, MatrixXd::Constant(1, 1, coupling));
  }
  PrimalDualPoint zero = PrimalDualPoint::zeros(g, all_nodes(g));
  return {std::move(bqp), std::move(zero)};
}

}  // namespace

TEST_CASE("K = 1 converges at the first iteration to the centralized solve") {
  Rng rng(31);
  auto inst = swztest::random_instance(
      10, swztest::random_connected_edges(10, 6, rng), rng);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());
  auto part = expand(bqp.graph(), partition(bqp.graph(), 1, 0), 0);
  SchwarzConfig cfg = tight_config(part);
  auto res =
      schwarz_solve(bqp, V, part, cfg, PrimalDualPoint::zeros(bqp.graph(), V));
  CHECK(res.status == SchwarzStatus::kConverged);
  CHECK(res.iterations == 1);
  auto central = swztest::solve_on(bqp, V);
  CHECK(swztest::max_node_dev(res.z, central.point) <= 1e-7);
}

TEST_CASE("the centralized solution is a fixed point") {
  Rng rng(32);
  auto inst = swztest::random_instance(
      12, swztest::random_connected_edges(12, 8, rng), rng);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());
  auto central = swztest::solve_on(bqp, V);
  REQUIRE(central.status == SolveStatus::kOptimal);

  auto part = expand(bqp.graph(), partition(bqp.graph(), 3, 0), 1);
  SchwarzConfig cfg = tight_config(part);
  cfg.max_outer = 3;
  cfg.tol_pr = 0;  // force the full three iterations
  cfg.tol_du = 0;
  auto res = schwarz_solve(bqp, V, part, cfg, central.point);
  CHECK(swztest::max_node_dev(res.z, central.point) <= 1e-6);
}

TEST_CASE("converges to the centralized solution on a mild instance") {
  Rng rng(33);
  swztest::InstanceOpts opts;
  opts.coupling = 0.15;  // mild coupling keeps the iteration contractive
  auto inst = swztest::random_instance(16, swztest::path_edges(16), rng, opts);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());
  auto part = expand(bqp.graph(), partition(bqp.graph(), 4, 0), 2);
  SchwarzConfig cfg = tight_config(part);
  cfg.tol_pr = 1e-8;
  cfg.tol_du = 1e-8;
  auto res =
      schwarz_solve(bqp, V, part, cfg, PrimalDualPoint::zeros(bqp.graph(), V));
  REQUIRE(res.status == SchwarzStatus::kConverged);
  auto central = swztest::solve_on(bqp, V);
  CHECK(swztest::max_node_dev(res.z, central.point) <=
        std::max(cfg.tol_pr, 1e-6));
  // trace bookkeeping: one row per completed iteration plus snapshot
  CHECK(static_cast<int>(res.trace.rows.size()) == res.iterations + 1);
  CHECK(res.trace.rows[0].iter == 0);
  CHECK(std::isinf(res.trace.rows[0].eps_pr));
}

TEST_CASE("residual_E basics") {
  Rng rng(34);
  auto inst = swztest::random_instance(
      9, swztest::random_connected_edges(9, 5, rng), rng);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());

  SUBCASE("empty coupled region at K = 1") {
    auto part = expand(bqp.graph(), partition(bqp.graph(), 1, 0), 0);
    auto central = swztest::solve_on(bqp, V);
    auto E = residual_E(bqp, V, part, central.point, {central.point});
    REQUIRE(E.size() == 1);
    CHECK(E[0].nodes().empty());
    auto [pr, du] = errors_from_E(E);
    CHECK(pr == 0.0);
    CHECK(du == 0.0);
  }

  SUBCASE("zero at the exact fixed point") {
    auto part = expand(bqp.graph(), partition(bqp.graph(), 3, 0), 1);
    auto central = swztest::solve_on(bqp, V);
    REQUIRE(central.status == SolveStatus::kOptimal);
    // consistent subproblem solutions at the fixed point
    std::vector<PrimalDualPoint> subs;
    for (int k = 0; k < part.K(); ++k) {
      NodeSet bdry = coupled_complement(bqp.graph(), V, part.expanded[k]);
      auto d = modified_data(bqp, part.expanded[k],
                             restrict_to(central.point, bdry));
      CompactQP qp = assemble(bqp, part.expanded[k], &d);
      subs.push_back(solve(qp).point);
    }
    auto E = residual_E(bqp, V, part, central.point, subs);
    auto [pr, du] = errors_from_E(E);
    CHECK(pr <= 1e-7);
    CHECK(du <= 1e-7);
  }

  SUBCASE("coverage error when omega = 0") {
    auto part = expand(bqp.graph(), partition(bqp.graph(), 3, 0), 0);
    auto central = swztest::solve_on(bqp, V);
    std::vector<PrimalDualPoint> subs;
    for (int k = 0; k < part.K(); ++k) {
      subs.push_back(restrict_to(central.point, part.expanded[k]));
    }
    CHECK_THROWS_AS(residual_E(bqp, V, part, central.point, subs),
                    std::invalid_argument);
  }

  SUBCASE("matches a directly coded difference oracle mid-iteration") {
    auto part = expand(bqp.graph(), partition(bqp.graph(), 3, 0), 1);
    // one hand-stepped Jacobi iteration from a random point
    PrimalDualPoint z = PrimalDualPoint::zeros(bqp.graph(), V);
    for (int i : V) {
      auto& v = z.at(i);
      for (int a = 0; a < v.x.size(); ++a) v.x(a) = rng.normal();
    }
    std::vector<PrimalDualPoint> subs, pieces;
    for (int k = 0; k < part.K(); ++k) {
      NodeSet bdry = coupled_complement(bqp.graph(), V, part.expanded[k]);
      auto d = modified_data(bqp, part.expanded[k], restrict_to(z, bdry));
      CompactQP qp = assemble(bqp, part.expanded[k], &d);
      auto rep = solve(qp);
      REQUIRE(rep.status == SolveStatus::kOptimal);
      subs.push_back(rep.point);
      pieces.push_back(restrict_to(rep.point, part.original[k]));
    }
    PrimalDualPoint z_next = scatter(pieces);
    auto E = residual_E(bqp, V, part, z_next, subs);
    for (int k = 0; k < part.K(); ++k) {
      NodeSet nbr = coupled_complement(bqp.graph(), V, part.original[k]);
      REQUIRE(E[k].nodes() == nbr);
      for (int i : nbr) {  // index-map oracle, node by node
        CHECK(swztest::max_abs(VectorXd(E[k].at(i).x -
                                        (subs[k].at(i).x - z_next.at(i).x))) ==
              0.0);
        CHECK(swztest::max_abs(VectorXd(
                  E[k].at(i).lamE -
                  (subs[k].at(i).lamE - z_next.at(i).lamE))) == 0.0);
        CHECK(swztest::max_abs(VectorXd(
                  E[k].at(i).lamI -
                  (subs[k].at(i).lamI - z_next.at(i).lamI))) == 0.0);
      }
    }
  }
}

TEST_CASE("errors_from_E extracts the primal and dual maxima") {
  NodeGraph g = NodeGraph::uniform(2, {{0, 1}}, {2, 1, 1});
  PrimalDualPoint e = PrimalDualPoint::zeros(g, {0});
  SUBCASE("all zero") {
    auto [pr, du] = errors_from_E({e});
    CHECK(pr == 0.0);
    CHECK(du == 0.0);
  }
  SUBCASE("single primal entry") {
    e.at(0).x(1) = 0.3;
    auto [pr, du] = errors_from_E({e});
    CHECK(pr == 0.3);
    CHECK(du == 0.0);
  }
  SUBCASE("random entries match a brute scan") {
    Rng rng(35);
    PrimalDualPoint e2 = PrimalDualPoint::zeros(g, {0, 1});
    double pr_ref = 0, du_ref = 0;
    for (int i : e2.nodes()) {
      auto& v = e2.at(i);
      for (int a = 0; a < v.x.size(); ++a) {
        v.x(a) = rng.normal();
        pr_ref = std::max(pr_ref, std::abs(v.x(a)));
      }
      for (int a = 0; a < v.lamE.size(); ++a) {
        v.lamE(a) = rng.normal();
        du_ref = std::max(du_ref, std::abs(v.lamE(a)));
      }
      for (int a = 0; a < v.lamI.size(); ++a) {
        v.lamI(a) = rng.normal();
        du_ref = std::max(du_ref, std::abs(v.lamI(a)));
      }
    }
    auto [pr, du] = errors_from_E({e2});
    CHECK(pr == pr_ref);
    CHECK(du == du_ref);
  }
}

TEST_CASE("rate bound") {
  Rng rng(36);
  auto inst = decay_instance(12, 3.0, 0.2, rng);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());
  auto part = expand(bqp.graph(), partition(bqp.graph(), 3, 0), 1);

  SUBCASE("validation") {
    CHECK_THROWS_AS(rate_bound(bqp, V, part, 0.0, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(rate_bound(bqp, V, part, 2.0, 1.0),
                    std::invalid_argument);
  }
  SUBCASE("equal extremes: rho = 0 kills alpha once the exponent is positive") {
    auto part2 = expand(bqp.graph(), partition(bqp.graph(), 3, 0), 2);
    CHECK(rate_bound(bqp, V, part2, 2.0, 2.0) == 0.0);
    // omega = 1 keeps the exponent at zero: alpha = R * Gamma
    const double alpha1 = rate_bound(bqp, V, part, 2.0, 2.0);
    CHECK(alpha1 > 0.0);
  }
  SUBCASE("decoupled graph has zero coupling norm") {
    NodeGraph g2 = NodeGraph::uniform(4, {{0, 1}, {2, 3}}, {1, 0, 0});
    BlockQP b2(g2);
    for (int i = 0; i < 4; ++i) b2.set_Q(i, i, MatrixXd::Identity(1, 1));
    OverlapPartition p2;
    p2.original = {{0, 1}, {2, 3}};
    p2.expanded = p2.original;
    p2.omega = 0;
    CHECK(rate_bound(b2, all_nodes(g2), p2, 1.0, 2.0) == 0.0);
  }
  SUBCASE("matches the hand-assembled coupling-norm oracle") {
    auto R_of = [&](const OverlapPartition& p) {
      double R_ref = 0;
      for (int k = 0; k < p.K(); ++k) {
        NodeSet bdry;
        MatrixXd H = swzoracle::dense_coupling(bqp, V, p.expanded[k], bdry);
        // scalar nodes: every block is 1x1, so the summed spectral
        // norms are just the summed absolute entries
        R_ref = std::max(R_ref, H.cwiseAbs().sum());
      }
      return R_ref;
    };
    const double lo = 1.5, hi = 3.0;
    const double gamma = hi / (lo * lo);
    const double rho = (hi * hi - lo * lo) / (hi * hi + lo * lo);
    // omega = 1: the exponent ceil((omega-1)/2) is zero
    CHECK(rate_bound(bqp, V, part, lo, hi) ==
          doctest::Approx(R_of(part) * gamma).epsilon(1e-12));
    // omega = 2: one power of rho
    auto part2 = expand(bqp.graph(), partition(bqp.graph(), 3, 0), 2);
    CHECK(rate_bound(bqp, V, part2, lo, hi) ==
          doctest::Approx(R_of(part2) * gamma * rho).epsilon(1e-12));
  }
}

TEST_CASE("geometric decay obeys the contraction bound (exact constants)") {
  Rng rng(37);
  auto inst = decay_instance(16, 3.0, 0.2, rng);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());
  auto part = expand(bqp.graph(), partition(bqp.graph(), 4, 0), 1);

  // exact per-subdomain extreme singular values (unconstrained: the
  // full H is just Q restricted to W_k)
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (int k = 0; k < part.K(); ++k) {
    MatrixXd Qk = assemble(bqp, part.expanded[k]).Q_dense();
    Eigen::JacobiSVD<MatrixXd> svd(Qk);
    lo = std::min(lo, svd.singularValues().minCoeff());
    hi = std::max(hi, svd.singularValues().maxCoeff());
  }
  const double alpha = rate_bound(bqp, V, part, lo, hi);
  REQUIRE(alpha < 1.0);

  SchwarzConfig cfg = tight_config(part);
  cfg.tol_pr = 1e-12;
  cfg.tol_du = 1e-12;
  auto central = swztest::solve_on(bqp, V);
  auto res =
      schwarz_solve(bqp, V, part, cfg, PrimalDualPoint::zeros(bqp.graph(), V));

  // replay the iteration recording the error after each step
  PrimalDualPoint z = PrimalDualPoint::zeros(bqp.graph(), V);
  const double err0 = (z - central.point).node_max_norm();
  double bound = err0;
  for (int ell = 1; ell <= std::min(res.iterations, 25); ++ell) {
    std::vector<PrimalDualPoint> pieces;
    for (int k = 0; k < part.K(); ++k) {
      NodeSet bdry = coupled_complement(bqp.graph(), V, part.expanded[k]);
      auto d = modified_data(bqp, part.expanded[k], restrict_to(z, bdry));
      CompactQP qp = assemble(bqp, part.expanded[k], &d);
      pieces.push_back(restrict_to(solve(qp).point, part.original[k]));
    }
    z = scatter(pieces);
    bound *= alpha;
    const double err = (z - central.point).node_max_norm();
    REQUIRE(err <= bound * (1 + 1e-6) + 1e-13);
  }
}

TEST_CASE("iteration count weakly decreases with overlap") {
  Rng rng(38);
  swztest::InstanceOpts opts;
  opts.coupling = 0.25;
  auto inst = swztest::random_instance(24, swztest::path_edges(24), rng, opts);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());
  auto base = partition(bqp.graph(), 4, 0);
  int prev = std::numeric_limits<int>::max();
  for (int omega : {1, 2, 3}) {
    auto part = expand(bqp.graph(), base, omega);
    SchwarzConfig cfg = tight_config(part);
    cfg.tol_pr = 1e-6;
    cfg.tol_du = 1e-6;
    auto res = schwarz_solve(bqp, V, part, cfg,
                             PrimalDualPoint::zeros(bqp.graph(), V));
    REQUIRE(res.status == SchwarzStatus::kConverged);
    CHECK(res.iterations <= prev);
    prev = res.iterations;
  }
}

TEST_CASE("trace is bitwise identical across worker counts") {
  Rng rng(39);
  auto inst = swztest::random_instance(
      18, swztest::random_connected_edges(18, 10, rng), rng);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());
  auto part = expand(bqp.graph(), partition(bqp.graph(), 4, 0), 1);

  auto run = [&](int workers) {
    SchwarzConfig cfg = tight_config(part);
    cfg.tol_pr = 1e-7;
    cfg.tol_du = 1e-7;
    cfg.parallelism = workers;
    return schwarz_solve(bqp, V, part, cfg,
                         PrimalDualPoint::zeros(bqp.graph(), V));
  };
  auto r1 = run(1);
  auto r4 = run(4);
  auto rk = run(part.K());
  CHECK(swztest::max_node_dev(r1.z, r4.z) == 0.0);
  CHECK(swztest::max_node_dev(r1.z, rk.z) == 0.0);

  auto csv = [](const SchwarzResult& r) {
    std::ostringstream ss;
    r.trace.write_csv(ss, false);
    return ss.str();
  };
  CHECK(csv(r1) == csv(r4));
  CHECK(csv(r1) == csv(rk));
}

TEST_CASE("pure block Jacobi can diverge and the guard reports it") {
  // complete triangle with strong symmetric coupling: Q stays PD but
  // the no-overlap fixed-point map has spectral radius > 1
  NodeGraph g = NodeGraph::uniform(3, {{0, 1}, {0, 2}, {1, 2}}, {1, 0, 0});
  BlockQP bqp(g);
  for (int i = 0; i < 3; ++i) {
    bqp.set_Q(i, i, MatrixXd::Identity(1, 1));
    bqp.set_f(i, VectorXd::Constant(1, 1.0));
  }
  for (auto [i, j] : g.edges()) {
    bqp.set_Q(i, j, MatrixXd::Constant(1, 1, 0.8));
  }
  NodeSet V = all_nodes(g);
  OverlapPartition part;
  part.original = {{0}, {1}, {2}};
  part.expanded = part.original;
  part.omega = 0;
  SchwarzConfig cfg;
  cfg.K = 3;
  cfg.omega = 0;
  cfg.tol_pr = 1e-9;
  cfg.tol_du = 1e-9;
  cfg.max_outer = 500;
  auto res = schwarz_solve(bqp, V, part, cfg, PrimalDualPoint::zeros(g, V));
  CHECK(res.status == SchwarzStatus::kDiverged);
}

TEST_CASE("infeasible subdomain is surfaced with its index") {
  // node 0 owns x0 + x1 = 1 and x0 >= 0; fixing the neighbor at
  // x1 = 5 leaves node 0's subproblem empty
  NodeGraph g(2, {{0, 1}}, {{1, 1, 1}, {1, 0, 0}});
  BlockQP bqp(g);
  bqp.set_Q(0, 0, MatrixXd::Identity(1, 1));
  bqp.set_Q(1, 1, MatrixXd::Identity(1, 1));
  bqp.set_AE(0, 0, MatrixXd::Identity(1, 1));
  bqp.set_AE(0, 1, MatrixXd::Identity(1, 1));
  bqp.set_gE(0, VectorXd::Ones(1));
  bqp.set_AI(0, 0, MatrixXd::Identity(1, 1));
  bqp.set_gI(0, VectorXd::Zero(1));

  NodeSet V = all_nodes(g);
  OverlapPartition part;
  part.original = {{0}, {1}};
  part.expanded = part.original;
  part.omega = 0;
  SchwarzConfig cfg;
  cfg.K = 2;
  cfg.omega = 0;
  PrimalDualPoint z0 = PrimalDualPoint::zeros(g, V);
  z0.at(1).x(0) = 5.0;
  auto res = schwarz_solve(bqp, V, part, cfg, z0);
  CHECK(res.status == SchwarzStatus::kSubdomainInfeasible);
  CHECK(res.infeasible_subdomain == 0);
}

TEST_CASE("schwarz_solve validates its inputs") {
  Rng rng(40);
  auto inst = swztest::random_instance(6, swztest::path_edges(6), rng);
  const BlockQP& bqp = inst.bqp;
  NodeSet V = all_nodes(bqp.graph());
  auto part = expand(bqp.graph(), partition(bqp.graph(), 2, 0), 1);
  SchwarzConfig cfg = tight_config(part);
  cfg.omega = 5;  // disagrees with the partition
  CHECK_THROWS_AS(schwarz_solve(bqp, V, part, cfg,
                                PrimalDualPoint::zeros(bqp.graph(), V)),
                  std::invalid_argument);
  SchwarzConfig ok = tight_config(part);
  CHECK_THROWS_AS(schwarz_solve(bqp, V, part, ok,
                                PrimalDualPoint::zeros(bqp.graph(), {0, 1})),
                  std::invalid_argument);
}
