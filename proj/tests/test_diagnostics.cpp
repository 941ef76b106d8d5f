#include <doctest.h>

#include <sstream>

#include "schwarzqp/diagnostics.hpp"
#include "test_util.hpp"

using namespace swz;
using swztest::Rng;

namespace {

// diagonally dominant unconstrained path instance with sharp decay
BlockQP sharp_path(int n, Rng& rng, double diag = 5.0,
                   double coupling = 0.25) {
  NodeGraph g = NodeGraph::uniform(n, swztest::path_edges(n), {1, 0, 0});
  BlockQP bqp(g);
  for (int i = 0; i < n; ++i) {
    bqp.set_Q(i, i, MatrixXd::Constant(1, 1, diag + rng.uniform(0, 0.5)));
    bqp.set_f(i, VectorXd::Constant(1, rng.normal(0, 1) + 3.0));
  }
  for (auto [i, j] : g.edges()) {
    bqp.set_Q(i, j, MatrixXd::Constant(1, 1, coupling));
  }
  return bqp;
}

}  // namespace

TEST_CASE("basis of an unconstrained solve is every primal index") {
  Rng rng(51);
  BlockQP bqp = sharp_path(6, rng);
  NodeSet U = all_nodes(bqp.graph());
  auto rep = swztest::solve_on(bqp, U);
  REQUIRE(rep.status == SolveStatus::kOptimal);
  BasisInfo b = extract_basis(bqp, U, rep);
  CHECK(static_cast<int>(b.index_set.size()) == 6);  // all x entries
  MatrixXd H = build_H(bqp, U);
  CHECK(swztest::max_abs(MatrixXd(b.H_BB - H)) == 0.0);  // H_BB = Q here
  Eigen::JacobiSVD<MatrixXd> svd(H);
  CHECK(b.sigma_max ==
        doctest::Approx(svd.singularValues()(0)).epsilon(1e-10));
  CHECK(b.sigma_min ==
        doctest::Approx(svd.singularValues()(5)).epsilon(1e-10));
}

TEST_CASE("zero solution yields the empty basis") {
  NodeGraph g(1, {}, {{1, 0, 0}});
  BlockQP bqp(g);
  bqp.set_Q(0, 0, MatrixXd::Identity(1, 1));
  auto rep = swztest::solve_on(bqp, {0});
  REQUIRE(rep.status == SolveStatus::kOptimal);
  BasisInfo b = extract_basis(bqp, {0}, rep);
  CHECK(b.index_set.empty());
  CHECK(b.sigma_min == 0.0);
  CHECK(b.sigma_max == 0.0);
}

TEST_CASE("basic-solution identity: H[B,B] z[B] = d[B]") {
  Rng rng(52);
  int done = 0;
  for (int trial = 0; trial < 12 && done < 6; ++trial) {
    auto inst = swztest::random_instance(
        10, swztest::random_connected_edges(10, 6, rng), rng);
    const BlockQP& bqp = inst.bqp;
    NodeSet U = all_nodes(bqp.graph());
    auto rep = swztest::solve_on(bqp, U);
    if (rep.status != SolveStatus::kOptimal) continue;
    BasisInfo b;
    try {
      b = extract_basis(bqp, U, rep);
    } catch (const SingularSystemError&) {
      continue;  // degenerate draw
    }
    if (b.degenerate || b.index_set.empty()) continue;
    ++done;

    VectorXd z = stack_signed(bqp.graph(), U, rep.point);
    VectorXd d = stack_data(bqp.graph(), U, bqp.data(U));
    VectorXd zB(b.index_set.size()), dB(b.index_set.size());
    for (size_t p = 0; p < b.index_set.size(); ++p) {
      zB(p) = z(b.index_set[p]);
      dB(p) = d(b.index_set[p]);
    }
    // linear-solve oracle: reconstruct the solution from the basis
    VectorXd w = b.H_BB.partialPivLu().solve(dB);
    CHECK(swztest::max_abs(VectorXd(w - zB)) <= 1e-8);
    CHECK(swztest::max_abs(VectorXd(b.H_BB * zB - dB)) <= 1e-9);
  }
  CHECK(done >= 6);
}

TEST_CASE("structural zeros of H[B,B] powers follow the graph distance") {
  Rng rng(53);
  swztest::InstanceOpts opts;
  opts.r_max = 2;
  auto inst = swztest::random_instance(14, swztest::ring_edges(14), rng, opts);
  const BlockQP& bqp = inst.bqp;
  NodeSet U = all_nodes(bqp.graph());
  auto rep = swztest::solve_on(bqp, U);
  REQUIRE(rep.status == SolveStatus::kOptimal);
  BasisInfo b = extract_basis(bqp, U, rep);

  MatrixXd power = MatrixXd::Identity(b.H_BB.rows(), b.H_BB.cols());
  for (int q = 1; q <= 3; ++q) {
    power = power * b.H_BB;
    for (size_t a = 0; a < U.size(); ++a) {
      auto dist = distances_from_set(bqp.graph(), U, {U[a]});
      for (size_t c = 0; c < U.size(); ++c) {
        if (dist[U[c]] == kUnreachable || dist[U[c]] <= q) continue;
        for (int ra : b.rows_of_node[a]) {
          for (int cc : b.rows_of_node[c]) {
            REQUIRE(power(ra, cc) == 0.0);  // exact structural zero
          }
        }
      }
    }
  }
}

TEST_CASE("decay coefficient is monotone and flat up to distance one") {
  const double gamma = 2.0, rho = 0.4;
  CHECK(decay_coefficient(gamma, rho, 0) == gamma);
  CHECK(decay_coefficient(gamma, rho, 1) == gamma);
  double prev = gamma;
  for (int d = 2; d < 12; ++d) {
    double c = decay_coefficient(gamma, rho, d);
    CHECK(c <= prev);
    prev = c;
  }
  CHECK(decay_coefficient(gamma, rho, kUnreachable) == 0.0);
}

TEST_CASE("zero perturbation gives an all-zero profile that holds") {
  Rng rng(54);
  BlockQP bqp = sharp_path(8, rng);
  NodeSet U = all_nodes(bqp.graph());
  NodeData delta;  // empty members are treated as zero
  DecayProfile p = decay_profile(bqp, U, 3, delta);
  for (double v : p.delta_norm) CHECK(v == 0.0);
  for (double v : p.bound) CHECK(v == 0.0);
  BoundCheck c = verify_bound(p);
  CHECK(c.all_hold);
  CHECK(c.asserted);
}

TEST_CASE("perturbations do not cross a disconnected component") {
  // two separate paths in one graph
  std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {3, 4}, {4, 5}};
  NodeGraph g = NodeGraph::uniform(6, edges, {1, 0, 0});
  BlockQP bqp(g);
  for (int i = 0; i < 6; ++i) {
    bqp.set_Q(i, i, MatrixXd::Constant(1, 1, 3.0));
    bqp.set_f(i, VectorXd::Constant(1, 1.0));
  }
  for (auto [i, j] : edges) bqp.set_Q(i, j, MatrixXd::Constant(1, 1, 0.4));
  NodeData delta;
  delta.f = VectorXd::Constant(1, 0.5);
  DecayProfile p = decay_profile(bqp, all_nodes(g), 1, delta);
  for (size_t a = 0; a < p.U.size(); ++a) {
    if (p.U[a] >= 3) {
      CHECK(p.distance[a] == kUnreachable);
      CHECK(p.delta_norm[a] <= 1e-12);
      CHECK(p.bound[a] == 0.0);
    }
  }
  BoundCheck c = verify_bound(p);
  CHECK(c.all_hold);
}

TEST_CASE("20-node path: decay is monotone with a good log-linear fit") {
  Rng rng(55);
  BlockQP bqp = sharp_path(20, rng);
  NodeSet U = all_nodes(bqp.graph());
  NodeData delta;
  delta.f = VectorXd::Constant(1, 0.37);
  DecayProfile p = decay_profile(bqp, U, 0, delta);
  REQUIRE(p.basis_stable);

  std::vector<double> xs, ys;
  double prev = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < p.U.size(); ++a) {
    if (p.distance[a] >= 1) {
      CHECK(p.delta_norm[a] <= prev * (1 + 1e-9));  // weakly decreasing
    }
    prev = p.delta_norm[a];
    if (p.delta_norm[a] > 1e-14 * p.delta_data_norm) {
      xs.push_back(p.distance[a]);
      ys.push_back(std::log(p.delta_norm[a]));
    }
  }
  auto [slope, r2] = swztest::linear_fit(xs, ys);
  CHECK(slope < 0.0);
  CHECK(r2 >= 0.8);
}

TEST_CASE("two-node hand inverse pins the bound arithmetic") {
  NodeGraph g = NodeGraph::uniform(2, {{0, 1}}, {1, 0, 0});
  BlockQP bqp(g);
  bqp.set_Q(0, 0, MatrixXd::Constant(1, 1, 2.0));
  bqp.set_Q(1, 1, MatrixXd::Constant(1, 1, 2.0));
  bqp.set_Q(0, 1, MatrixXd::Constant(1, 1, 0.5));
  bqp.set_f(0, VectorXd::Constant(1, 1.0));
  bqp.set_f(1, VectorXd::Constant(1, 1.0));

  // H = Q with eigenvalues {1.5, 2.5}; by hand:
  //   Gamma = 2.5 / 1.5^2 = 1.1111...
  //   rho = (2.5^2 - 1.5^2) / (2.5^2 + 1.5^2) = 4 / 8.5
  //   H^{-1} = (1/3.75) [2 -0.5; -0.5 2]
  const double delta_f = 0.3;
  NodeData delta;
  delta.f = VectorXd::Constant(1, delta_f);
  DecayProfile p = decay_profile(bqp, {0, 1}, 0, delta);
  REQUIRE(p.basis_stable);
  CHECK(p.gamma == doctest::Approx(2.5 / 2.25).epsilon(1e-9));
  CHECK(p.rho == doctest::Approx(4.0 / 8.5).epsilon(1e-9));
  CHECK(p.delta_norm[0] ==
        doctest::Approx(2.0 / 3.75 * delta_f).epsilon(1e-9));
  CHECK(p.delta_norm[1] ==
        doctest::Approx(0.5 / 3.75 * delta_f).epsilon(1e-9));
  // the decay coefficient dominates the hand inverse block-wise
  CHECK(2.0 / 3.75 <= p.gamma + 1e-12);
  CHECK(0.5 / 3.75 <= decay_coefficient(p.gamma, p.rho, 1) + 1e-12);
  BoundCheck c = verify_bound(p);
  CHECK(c.asserted);
  CHECK(c.all_hold);
}

TEST_CASE("basis-stable random trials always satisfy the bound") {
  Rng rng(56);
  int stable_trials = 0, attempts = 0;
  while (stable_trials < 10 && attempts < 80) {
    ++attempts;
    const int kind = attempts % 3;
    std::vector<std::pair<int, int>> edges =
        kind == 0   ? swztest::path_edges(12)
        : kind == 1 ? swztest::ring_edges(12)
                    : swztest::grid_edges(3, 4);
    swztest::InstanceOpts opts;
    opts.coupling = 0.2;
    auto inst = swztest::random_instance(12, edges, rng, opts);
    const BlockQP& bqp = inst.bqp;
    NodeSet U = all_nodes(bqp.graph());
    const int j = rng.uniform_int(0, 11);
    NodeData delta;
    delta.f = VectorXd::Zero(bqp.graph().dims(j).r);
    delta.f(0) = 0.2;
    for (int shrink = 0; shrink < 6; ++shrink) {
      DecayProfile p;
      try {
        p = decay_profile(bqp, U, j, delta);
      } catch (const SingularSystemError&) {
        break;
      }
      if (!p.basis_stable) {
        delta.f *= 0.25;
        continue;
      }
      ++stable_trials;
      BoundCheck c = verify_bound(p);
      CHECK(c.asserted);
      CHECK(c.all_hold);
      break;
    }
  }
  CHECK(stable_trials >= 10);
}

TEST_CASE("estimate_sigma visits at least the endpoint bases") {
  Rng rng(57);
  BlockQP bqp = sharp_path(8, rng);
  NodeSet U = all_nodes(bqp.graph());
  auto d0 = bqp.data(U);
  auto d1 = d0;
  d1[2].f(0) += 0.4;
  SigmaEstimate est = estimate_sigma(bqp, U, d0, d1, 8);
  CHECK(est.distinct_bases == 1);  // unconstrained: one basis throughout
  auto rep = swztest::solve_on(bqp, U);
  BasisInfo b = extract_basis(bqp, U, rep);
  CHECK(est.sigma_min == doctest::Approx(b.sigma_min).epsilon(1e-9));
  CHECK(est.sigma_max == doctest::Approx(b.sigma_max).epsilon(1e-9));
  CHECK_THROWS_AS(estimate_sigma(bqp, U, d0, d1, 1), std::invalid_argument);
}

TEST_CASE("profile CSV format") {
  Rng rng(58);
  BlockQP bqp = sharp_path(4, rng);
  NodeData delta;
  delta.f = VectorXd::Constant(1, 0.1);
  DecayProfile p = decay_profile(bqp, all_nodes(bqp.graph()), 1, delta);
  std::ostringstream ss;
  write_profile_csv(p, ss);
  std::string text = ss.str();
  CHECK(text.rfind("node,distance,delta_norm,bound\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 4 rows
}

TEST_CASE("stacked dimension limit is enforced") {
  NodeGraph g = NodeGraph::uniform(2001, swztest::path_edges(2001), {1, 0, 0});
  BlockQP bqp(g);
  CHECK_THROWS_AS(build_H(bqp, all_nodes(g)), std::invalid_argument);
}
