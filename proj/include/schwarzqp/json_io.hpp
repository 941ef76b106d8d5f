#pragma once

#include <string>

#include "schwarzqp/qp_model.hpp"
#include "schwarzqp/qp_solver.hpp"
#include "schwarzqp/schwarz.hpp"

namespace swz {

/// BlockQP as a JSON document: node dims, edges, per-block row-major
/// arrays, per-node vectors.  Doubles are written with a
/// shortest-round-trip encoding, so save/load is bit-exact for
/// binary64 values.
std::string blockqp_to_json(const BlockQP& bqp);
BlockQP blockqp_from_json(const std::string& text);

/// Solution document: status, objective, KKT residual groups,
/// iteration count and the node-indexed point.  Deliberately carries
/// no wall-clock fields; identical runs serialize identically.
std::string solution_to_json(const PrimalDualPoint& z,
                             const std::string& status,
                             const KktResidual& kkt, int iterations,
                             double objective, bool regularized);

/// Full trace including per-subdomain detail; wall times included
/// only when include_times is set.
std::string trace_to_json(const SchwarzTrace& trace, SchwarzStatus status,
                          bool include_times);

/// Perturbation spec for sensitivity runs: "0" for the zero
/// perturbation, else a comma-separated list of field:index=value
/// entries with field in {f, gE, gI}, e.g. "f:0=0.1,gI:2=-0.5".
/// Indices are within node j's blocks.
NodeData parse_delta_spec(const std::string& spec, const NodeGraph& g, int j);

}  // namespace swz
