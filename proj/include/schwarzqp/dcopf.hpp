#pragma once

#include <string>
#include <vector>

#include "schwarzqp/qp_model.hpp"

namespace swz {

/// Parsed network data, already converted to per-unit (power /
/// baseMVA, cost coefficients scaled to keep objective values in the
/// original currency, angles in radians).
struct PowerCase {
  struct Bus {
    int id = 0;  // original bus number
    double p_load = 0;
    bool is_ref = false;
    double theta_ref = 0;
  };
  struct Generator {
    int bus = 0;  // node index into buses
    double c1 = 0, c2 = 0;
    double p_min = 0, p_max = 0;
  };
  struct Branch {
    int from = 0, to = 0;  // node indices into buses
    double susceptance = 0;
    double angle_limit = 0;  // rad; <= 0 means unconstrained
  };

  double base_mva = 100;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  std::vector<std::string> warnings;

  void validate() const;
};

struct OpfOptions {
  double gamma = 1e5;         // angle-difference regularization weight
  double storage_cost = 1e4;  // quadratic cost on the artificial storage
  bool storage_enabled = false;
};

/// Parse the MATPOWER-style subset: baseMVA, bus, gen, branch and
/// polynomial gencost (degree <= 2) tables.  Throws std::runtime_error
/// with a line number on malformed input.
PowerCase parse_case(const std::string& text);

/// Index bookkeeping for the built QP: per node, variable 0 is the
/// voltage angle, generator variables follow in input order, the
/// storage variable (when enabled) is last.
struct OpfLayout {
  std::vector<std::vector<int>> gens_at_node;  // generator indices
  bool storage = false;
};

/// Build the regularized DC OPF as a graph-structured QP: one node
/// per bus, power-balance equality rows (plus the reference-angle row
/// on reference buses), generator bounds and angle-separation rows as
/// >= pairs, generator costs and the gamma-Laplacian on angle
/// couplings in Q.  Throws on a connected component without a
/// reference bus.
BlockQP build_qp(const PowerCase& pc, const OpfOptions& opts,
                 OpfLayout* layout = nullptr,
                 std::vector<std::string>* warnings = nullptr);

/// Rebuild with one unbounded storage variable per node entering the
/// balance row with coefficient 1 and the objective with cost
/// (storage_cost/2) s^2; keeps every balance row satisfiable for any
/// boundary data.
BlockQP add_storage(const BlockQP& base, const PowerCase& pc,
                    const OpfOptions& opts, OpfLayout* layout = nullptr);

}  // namespace swz
