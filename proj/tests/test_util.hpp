#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "schwarzqp/qp_model.hpp"
#include "schwarzqp/qp_solver.hpp"

namespace swztest {

using swz::BlockQP;
using swz::MatrixXd;
using swz::NodeGraph;
using swz::NodeSet;
using swz::PrimalDualPoint;
using swz::VectorXd;

/// Deterministic RNG wrapper: raw mt19937_64 bits only, so sequences
/// do not depend on libstdc++ distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double a = 0.0, double b = 1.0) {
    const double u = (eng_() >> 11) * 0x1.0p-53;
    return a + (b - a) * u;
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform(1e-300, 1.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(eng_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(double p) { return uniform() < p; }
  std::uint64_t bits() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0;
};

std::vector<std::pair<int, int>> path_edges(int n);
std::vector<std::pair<int, int>> ring_edges(int n);
std::vector<std::pair<int, int>> grid_edges(int rows, int cols);
/// random spanning tree plus `extra` random chords
std::vector<std::pair<int, int>> random_connected_edges(int n, int extra,
                                                        Rng& rng);

struct InstanceOpts {
  int r_min = 1, r_max = 3;
  double p_eq = 0.6;       // probability a node carries one equality row
  int mI_max = 2;
  double coupling = 0.3;   // off-diagonal Q magnitude
  double p_couple = 0.6;   // probability a constraint couples a neighbor
  double margin_lo = 0.05; // strict-interior margin on inequality rows
  double margin_hi = 0.8;
  double f_scale = 1.0;
  double q_noise = 1.0;    // scale of the random SPD part of Q_ii
};

struct RandomInstance {
  BlockQP bqp;
  PrimalDualPoint interior;  // strictly feasible primal point, zero duals
};

/// Graph-structured QP with Q positive definite by construction
/// (Gershgorin margin >= 1) and a strictly feasible interior point.
RandomInstance random_instance(int n, const std::vector<std::pair<int, int>>& edges,
                               Rng& rng, const InstanceOpts& opts = {});

/// Random nonempty subset of U (each node kept with probability p).
NodeSet random_subset(const NodeSet& U, Rng& rng, double p = 0.5);

/// max over nodes of the infinity-norm difference of (x, lamE, lamI).
double max_node_dev(const PrimalDualPoint& a, const PrimalDualPoint& b);

/// infinity norm that tolerates empty vectors/matrices.
inline double max_abs(const VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}
inline double max_abs(const MatrixXd& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

/// assemble + solve over U.
swz::SolveReport solve_on(const BlockQP& bqp, const NodeSet& U,
                          const swz::SolverConfig& cfg = {});

/// Least-squares line fit; returns (slope, r_squared).
std::pair<double, double> linear_fit(const std::vector<double>& x,
                                     const std::vector<double>& y);

}  // namespace swztest
