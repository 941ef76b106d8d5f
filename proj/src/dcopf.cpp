#include "schwarzqp/dcopf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace swz {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct RawTable {
  std::vector<std::vector<double>> rows;
  std::vector<int> line_of_row;
};

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw std::runtime_error("case parse error at line " + std::to_string(line) +
                           ": " + msg);
}

// Reads "mpc.<name> = [ rows ];" tables and "mpc.baseMVA = <v>;".
class CaseReader {
 public:
  explicit CaseReader(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto pos = line.find('%'); pos != std::string::npos) {
        line = line.substr(0, pos);
      }
      lines_.emplace_back(line_no, line);
    }
  }

  bool scalar(const std::string& name, double& out) const {
    const std::string tag = "mpc." + name;
    for (const auto& [no, line] : lines_) {
      auto pos = line.find(tag);
      if (pos == std::string::npos) continue;
      auto eq = line.find('=', pos);
      if (eq == std::string::npos) continue;
      std::string rhs = line.substr(eq + 1);
      std::erase(rhs, ';');
      std::istringstream v(rhs);
      if (v >> out) return true;
      parse_fail(no, "expected a number after " + tag);
    }
    return false;
  }

  bool table(const std::string& name, RawTable& out) const {
    const std::string tag = "mpc." + name;
    for (size_t idx = 0; idx < lines_.size(); ++idx) {
      const auto& [no, line] = lines_[idx];
      auto pos = line.find(tag);
      if (pos == std::string::npos) continue;
      const size_t after = pos + tag.size();
      if (after < line.size() && line[after] != ' ' && line[after] != '\t' &&
          line[after] != '=') {
        continue;  // longer identifier sharing the prefix
      }
      auto bracket = line.find('[', pos);
      if (bracket == std::string::npos) continue;
      std::string rest = line.substr(bracket + 1);
      size_t cursor = idx;
      while (true) {
        bool closed = false;
        if (auto close = rest.find(']'); close != std::string::npos) {
          rest = rest.substr(0, close);
          closed = true;
        }
        parse_rows(rest, lines_[cursor].first, out);
        if (closed) return true;
        ++cursor;
        if (cursor >= lines_.size()) {
          parse_fail(no, "unterminated table " + tag);
        }
        rest = lines_[cursor].second;
      }
    }
    return false;
  }

 private:
  static void parse_rows(const std::string& chunk, int line_no,
                         RawTable& out) {
    std::string row;
    for (char c : chunk + ";") {
      if (c == ';') {
        std::istringstream v(row);
        std::vector<double> vals;
        double x;
        while (v >> x) vals.push_back(x);
        std::string trailing;
        if (!v.eof()) {
          v.clear();
          v >> trailing;
        }
        if (!trailing.empty()) {
          parse_fail(line_no, "unexpected token '" + trailing + "'");
        }
        if (!vals.empty()) {
          out.rows.push_back(std::move(vals));
          out.line_of_row.push_back(line_no);
        }
        row.clear();
      } else {
        row += c;
      }
    }
  }

  std::vector<std::pair<int, std::string>> lines_;
};

}  // namespace

void PowerCase::validate() const {
  bool has_ref = false;
  for (const auto& b : buses) has_ref = has_ref || b.is_ref;
  if (!has_ref) {
    throw std::invalid_argument("power case: no reference bus");
  }
  const int n = static_cast<int>(buses.size());
  for (const auto& g : generators) {
    if (g.bus < 0 || g.bus >= n) {
      throw std::invalid_argument("power case: generator at unknown bus");
    }
    if (g.p_min > g.p_max) {
      throw std::invalid_argument("power case: Pmin > Pmax");
    }
  }
  for (const auto& br : branches) {
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n) {
      throw std::invalid_argument("power case: branch endpoint unknown");
    }
    if (!std::isfinite(br.susceptance)) {
      throw std::invalid_argument("power case: non-finite susceptance");
    }
  }
}

PowerCase parse_case(const std::string& text) {
  CaseReader reader(text);
  PowerCase pc;
  if (!reader.scalar("baseMVA", pc.base_mva) || pc.base_mva <= 0) {
    throw std::runtime_error("case parse error: missing mpc.baseMVA");
  }

  RawTable bus, gen, branch, gencost;
  if (!reader.table("bus", bus)) {
    throw std::runtime_error("case parse error: missing mpc.bus table");
  }
  if (!reader.table("gen", gen)) {
    throw std::runtime_error("case parse error: missing mpc.gen table");
  }
  if (!reader.table("branch", branch)) {
    throw std::runtime_error("case parse error: missing mpc.branch table");
  }
  reader.table("gencost", gencost);

  std::map<long long, int> node_of_bus;
  for (size_t r = 0; r < bus.rows.size(); ++r) {
    const auto& row = bus.rows[r];
    if (row.size() < 9) parse_fail(bus.line_of_row[r], "bus row too short");
    PowerCase::Bus b;
    b.id = static_cast<int>(row[0]);
    const int type = static_cast<int>(row[1]);
    b.p_load = row[2] / pc.base_mva;
    b.is_ref = type == 3;
    b.theta_ref = row[8] * kDegToRad;
    if (node_of_bus.count(b.id)) {
      parse_fail(bus.line_of_row[r], "duplicate bus id");
    }
    node_of_bus[b.id] = static_cast<int>(pc.buses.size());
    pc.buses.push_back(b);
  }

  if (!gencost.rows.empty() && gencost.rows.size() != gen.rows.size()) {
    throw std::runtime_error(
        "case parse error: gencost rows do not match gen rows (reactive "
        "cost tables are unsupported)");
  }

  for (size_t r = 0; r < gen.rows.size(); ++r) {
    const auto& row = gen.rows[r];
    if (row.size() < 10) parse_fail(gen.line_of_row[r], "gen row too short");
    const int status = static_cast<int>(row[7]);
    if (status <= 0) {
      pc.warnings.push_back("gen row " + std::to_string(r + 1) +
                            " out of service, dropped");
      continue;
    }
    PowerCase::Generator g;
    auto it = node_of_bus.find(static_cast<long long>(row[0]));
    if (it == node_of_bus.end()) {
      parse_fail(gen.line_of_row[r], "generator references unknown bus");
    }
    g.bus = it->second;
    g.p_max = row[8] / pc.base_mva;
    g.p_min = row[9] / pc.base_mva;
    if (!gencost.rows.empty()) {
      const auto& cost = gencost.rows[r];
      if (cost.size() < 4) {
        parse_fail(gencost.line_of_row[r], "gencost row too short");
      }
      if (static_cast<int>(cost[0]) != 2) {
        parse_fail(gencost.line_of_row[r],
                   "only polynomial gencost (model 2) is supported");
      }
      const int ncost = static_cast<int>(cost[3]);
      if (ncost < 1 || ncost > 3 ||
          cost.size() < static_cast<size_t>(4 + ncost)) {
        parse_fail(gencost.line_of_row[r],
                   "gencost polynomial of degree <= 2 required");
      }
      // highest-degree first: [c2 c1 c0], [c1 c0], or [c0]
      double c2 = 0, c1 = 0;
      if (ncost == 3) {
        c2 = cost[4];
        c1 = cost[5];
      } else if (ncost == 2) {
        c1 = cost[4];
      }
      g.c1 = c1 * pc.base_mva;
      g.c2 = c2 * pc.base_mva * pc.base_mva;
    }
    pc.generators.push_back(g);
  }

  for (size_t r = 0; r < branch.rows.size(); ++r) {
    const auto& row = branch.rows[r];
    if (row.size() < 4) {
      parse_fail(branch.line_of_row[r], "branch row too short");
    }
    if (row.size() >= 11 && static_cast<int>(row[10]) == 0) {
      pc.warnings.push_back("branch row " + std::to_string(r + 1) +
                            " out of service, dropped");
      continue;
    }
    PowerCase::Branch br;
    auto from = node_of_bus.find(static_cast<long long>(row[0]));
    auto to = node_of_bus.find(static_cast<long long>(row[1]));
    if (from == node_of_bus.end() || to == node_of_bus.end()) {
      parse_fail(branch.line_of_row[r], "branch references unknown bus");
    }
    br.from = from->second;
    br.to = to->second;
    const double x = row[3];
    if (x == 0.0) {
      pc.warnings.push_back("branch row " + std::to_string(r + 1) +
                            " has zero reactance, dropped");
      continue;
    }
    br.susceptance = 1.0 / x;
    br.angle_limit = 0;  // unconstrained unless angmin/angmax present
    if (row.size() >= 13) {
      const double angmin = row[11], angmax = row[12];
      if (!(angmin == 0 && angmax == 0) && angmin > -360 && angmax < 360) {
        br.angle_limit = std::min(-angmin, angmax) * kDegToRad;
      }
    }
    pc.branches.push_back(br);
  }

  pc.validate();
  return pc;
}

BlockQP build_qp(const PowerCase& pc, const OpfOptions& opts,
                 OpfLayout* layout, std::vector<std::string>* warnings) {
  if (opts.gamma < 0) throw std::invalid_argument("build_qp: gamma < 0");
  pc.validate();
  const int n = static_cast<int>(pc.buses.size());
  const bool storage = opts.storage_enabled;

  // Collapse parallel branches: summed susceptance, tightest limit.
  std::map<std::pair<int, int>, std::pair<double, double>> edge_data;
  for (const auto& br : pc.branches) {
    if (br.from == br.to) continue;
    if (br.susceptance == 0.0) {
      if (warnings) {
        warnings->push_back("branch " + std::to_string(pc.buses[br.from].id) +
                            "-" + std::to_string(pc.buses[br.to].id) +
                            " has zero susceptance, skipped");
      }
      continue;
    }
    auto key = std::minmax(br.from, br.to);
    auto [it, fresh] = edge_data.try_emplace(
        key, std::make_pair(br.susceptance, br.angle_limit));
    if (!fresh) {
      it->second.first += br.susceptance;
      double& lim = it->second.second;
      if (br.angle_limit > 0) {
        lim = lim > 0 ? std::min(lim, br.angle_limit) : br.angle_limit;
      }
    }
  }

  std::vector<std::vector<int>> gens_at(n);
  for (size_t q = 0; q < pc.generators.size(); ++q) {
    gens_at[pc.generators[q].bus].push_back(static_cast<int>(q));
  }
  std::vector<std::vector<std::pair<int, double>>> owned_limits(n);
  for (const auto& [key, val] : edge_data) {
    if (val.second > 0) {
      owned_limits[key.first].emplace_back(key.second, val.second);
    }
  }

  std::vector<std::pair<int, int>> edges;
  for (const auto& [key, val] : edge_data) edges.push_back(key);

  std::vector<NodeDims> dims(n);
  for (int i = 0; i < n; ++i) {
    const int ng = static_cast<int>(gens_at[i].size());
    dims[i].r = 1 + ng + (storage ? 1 : 0);
    dims[i].mE = 1 + (pc.buses[i].is_ref ? 1 : 0);
    dims[i].mI = 2 * ng + 2 * static_cast<int>(owned_limits[i].size());
  }
  NodeGraph g(n, edges, dims);

  // Every connected component needs a reference bus to pin angles.
  {
    NodeSet refs;
    for (int i = 0; i < n; ++i) {
      if (pc.buses[i].is_ref) refs.push_back(i);
    }
    auto dist = distances_from_set(g, all_nodes(g), refs);
    for (int i = 0; i < n; ++i) {
      if (dist[i] == kUnreachable) {
        throw std::invalid_argument(
            "build_qp: bus " + std::to_string(pc.buses[i].id) +
            " lies in a component without a reference bus");
      }
    }
  }

  BlockQP bqp(g);
  for (int i = 0; i < n; ++i) {
    const auto& gens = gens_at[i];
    const int ng = static_cast<int>(gens.size());
    const int r = dims[i].r;

    MatrixXd Qii = MatrixXd::Zero(r, r);
    Qii(0, 0) = opts.gamma * static_cast<double>(g.neighbors(i).size());
    VectorXd fi = VectorXd::Zero(r);
    for (int a = 0; a < ng; ++a) {
      const auto& gen = pc.generators[gens[a]];
      Qii(1 + a, 1 + a) = 2.0 * gen.c2;
      fi(1 + a) = -gen.c1;
    }
    if (storage) Qii(r - 1, r - 1) = opts.storage_cost;
    bqp.set_Q(i, i, Qii);
    bqp.set_f(i, fi);

    // balance row, then the reference row when present
    MatrixXd AEii = MatrixXd::Zero(dims[i].mE, r);
    VectorXd gEi = VectorXd::Zero(dims[i].mE);
    double b_sum = 0;
    for (int j : g.neighbors(i)) {
      b_sum += edge_data.at(std::minmax(i, j)).first;
    }
    AEii(0, 0) = -b_sum;
    for (int a = 0; a < ng; ++a) AEii(0, 1 + a) = 1.0;
    if (storage) AEii(0, r - 1) = 1.0;
    gEi(0) = pc.buses[i].p_load;
    if (pc.buses[i].is_ref) {
      AEii(1, 0) = 1.0;
      gEi(1) = pc.buses[i].theta_ref;
    }
    bqp.set_AE(i, i, AEii);
    bqp.set_gE(i, gEi);

    MatrixXd AIii = MatrixXd::Zero(dims[i].mI, r);
    VectorXd gIi = VectorXd::Zero(dims[i].mI);
    for (int a = 0; a < ng; ++a) {
      const auto& gen = pc.generators[gens[a]];
      AIii(2 * a, 1 + a) = 1.0;  // P >= Pmin
      gIi(2 * a) = gen.p_min;
      AIii(2 * a + 1, 1 + a) = -1.0;  // -P >= -Pmax
      gIi(2 * a + 1) = -gen.p_max;
    }
    for (size_t e = 0; e < owned_limits[i].size(); ++e) {
      const int row0 = 2 * ng + 2 * static_cast<int>(e);
      AIii(row0, 0) = 1.0;  // theta_i - theta_j >= -limit
      gIi(row0) = -owned_limits[i][e].second;
      AIii(row0 + 1, 0) = -1.0;  // theta_j - theta_i >= -limit
      gIi(row0 + 1) = -owned_limits[i][e].second;
    }
    bqp.set_AI(i, i, AIii);
    bqp.set_gI(i, gIi);
  }

  for (auto [i, j] : edges) {
    const double b = edge_data.at({i, j}).first;
    MatrixXd Qij = MatrixXd::Zero(dims[i].r, dims[j].r);
    Qij(0, 0) = -opts.gamma;
    bqp.set_Q(i, j, Qij);

    // balance coupling: +B on the neighbor angle, both directions
    MatrixXd AEij = MatrixXd::Zero(dims[i].mE, dims[j].r);
    AEij(0, 0) = b;
    bqp.set_AE(i, j, AEij);
    MatrixXd AEji = MatrixXd::Zero(dims[j].mE, dims[i].r);
    AEji(0, 0) = b;
    bqp.set_AE(j, i, AEji);
  }

  // angle-limit coupling columns live on the non-owning endpoint
  for (int i = 0; i < n; ++i) {
    const int ng = static_cast<int>(gens_at[i].size());
    for (size_t e = 0; e < owned_limits[i].size(); ++e) {
      const int j = owned_limits[i][e].first;
      MatrixXd AIij = MatrixXd::Zero(dims[i].mI, dims[j].r);
      const int row0 = 2 * ng + 2 * static_cast<int>(e);
      AIij(row0, 0) = -1.0;
      AIij(row0 + 1, 0) = 1.0;
      bqp.set_AI(i, j, AIij);
    }
  }

  if (layout) {
    layout->gens_at_node = gens_at;
    layout->storage = storage;
  }
  bqp.validate();
  return bqp;
}

BlockQP add_storage(const BlockQP& base, const PowerCase& pc,
                    const OpfOptions& opts, OpfLayout* layout) {
  if (static_cast<int>(pc.buses.size()) != base.graph().num_nodes()) {
    throw std::invalid_argument("add_storage: case does not match model");
  }
  OpfOptions with = opts;
  with.storage_enabled = true;
  return build_qp(pc, with, layout);
}

}  // namespace swz
