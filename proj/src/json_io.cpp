#include "schwarzqp/json_io.hpp"

#include <cmath>
#include <json.hpp>

namespace swz {

using nlohmann::json;

namespace {

json vec_to_json(const VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

VectorXd vec_from_json(const json& j) {
  VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json mat_to_json(const MatrixXd& m) {  // row-major flattening
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

MatrixXd mat_from_json(const json& j, int rows, int cols) {
  if (static_cast<int>(j.size()) != rows * cols) {
    throw std::invalid_argument("blockqp json: block size mismatch");
  }
  MatrixXd m(rows, cols);
  size_t s = 0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = j[s++].get<double>();
  }
  return m;
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string blockqp_to_json(const BlockQP& bqp) {
  const NodeGraph& g = bqp.graph();
  json doc;
  doc["format"] = "blockqp";
  doc["version"] = 1;
  json nodes = json::array();
  for (int i = 0; i < g.num_nodes(); ++i) {
    const NodeDims& d = g.dims(i);
    nodes.push_back({{"id", i}, {"r", d.r}, {"mE", d.mE}, {"mI", d.mI}});
  }
  doc["nodes"] = nodes;
  json edges = json::array();
  for (auto [i, j] : g.edges()) edges.push_back({i, j});
  doc["edges"] = edges;

  auto dump_blocks = [&](const std::vector<std::pair<int, int>>& keys, auto get) {
    json arr = json::array();
    for (auto [i, j] : keys) {
      arr.push_back({{"i", i}, {"j", j}, {"v", mat_to_json(*get(i, j))}});
    }
    return arr;
  };
  doc["Q"] = dump_blocks(bqp.stored_Q(),
                         [&](int i, int j) { return bqp.Q(i, j); });
  doc["AE"] = dump_blocks(bqp.stored_AE(),
                          [&](int i, int j) { return bqp.AE(i, j); });
  doc["AI"] = dump_blocks(bqp.stored_AI(),
                          [&](int i, int j) { return bqp.AI(i, j); });

  json f = json::array(), gE = json::array(), gI = json::array();
  for (int i = 0; i < g.num_nodes(); ++i) {
    f.push_back(vec_to_json(bqp.f(i)));
    gE.push_back(vec_to_json(bqp.gE(i)));
    gI.push_back(vec_to_json(bqp.gI(i)));
  }
  doc["f"] = f;
  doc["gE"] = gE;
  doc["gI"] = gI;
  return doc.dump(2);
}

BlockQP blockqp_from_json(const std::string& text) {
  json doc = json::parse(text);
  if (doc.value("format", "") != "blockqp") {
    throw std::invalid_argument("blockqp json: missing format tag");
  }
  const auto& nodes = doc.at("nodes");
  const int n = static_cast<int>(nodes.size());
  std::vector<NodeDims> dims(n);
  for (int i = 0; i < n; ++i) {
    const auto& nd = nodes[i];
    if (nd.at("id").get<int>() != i) {
      throw std::invalid_argument("blockqp json: node ids must be 0..n-1");
    }
    dims[i] = {nd.at("r").get<int>(), nd.at("mE").get<int>(),
               nd.at("mI").get<int>()};
  }
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : doc.at("edges")) {
    edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  }
  BlockQP bqp(NodeGraph(n, edges, dims));

  auto load_blocks = [&](const char* key, auto set, auto rows, auto cols) {
    if (!doc.contains(key)) return;
    for (const auto& b : doc.at(key)) {
      const int i = b.at("i").get<int>();
      const int j = b.at("j").get<int>();
      set(i, j, mat_from_json(b.at("v"), rows(i), cols(j)));
    }
  };
  load_blocks(
      "Q", [&](int i, int j, MatrixXd m) { bqp.set_Q(i, j, std::move(m)); },
      [&](int i) { return dims[i].r; }, [&](int j) { return dims[j].r; });
  load_blocks(
      "AE", [&](int i, int j, MatrixXd m) { bqp.set_AE(i, j, std::move(m)); },
      [&](int i) { return dims[i].mE; }, [&](int j) { return dims[j].r; });
  load_blocks(
      "AI", [&](int i, int j, MatrixXd m) { bqp.set_AI(i, j, std::move(m)); },
      [&](int i) { return dims[i].mI; }, [&](int j) { return dims[j].r; });

  if (doc.contains("f")) {
    for (int i = 0; i < n; ++i) bqp.set_f(i, vec_from_json(doc.at("f")[i]));
  }
  if (doc.contains("gE")) {
    for (int i = 0; i < n; ++i) bqp.set_gE(i, vec_from_json(doc.at("gE")[i]));
  }
  if (doc.contains("gI")) {
    for (int i = 0; i < n; ++i) bqp.set_gI(i, vec_from_json(doc.at("gI")[i]));
  }
  bqp.validate();
  return bqp;
}

std::string solution_to_json(const PrimalDualPoint& z,
                             const std::string& status,
                             const KktResidual& kkt, int iterations,
                             double objective, bool regularized) {
  json doc;
  doc["status"] = status;
  doc["objective"] = objective;
  doc["iterations"] = iterations;
  doc["regularized"] = regularized;
  doc["kkt"] = {{"stationarity", kkt.stationarity},
                {"primal_eq", kkt.primal_eq},
                {"primal_ineq", kkt.primal_ineq},
                {"dual_sign", kkt.dual_sign},
                {"complementarity", kkt.complementarity}};
  json nodes = json::array();
  for (int i : z.nodes()) {
    const auto& v = z.at(i);
    nodes.push_back({{"id", i},
                     {"x", vec_to_json(v.x)},
                     {"lamE", vec_to_json(v.lamE)},
                     {"lamI", vec_to_json(v.lamI)}});
  }
  doc["point"] = {{"nodes", nodes}};
  return doc.dump(2);
}

std::string trace_to_json(const SchwarzTrace& trace, SchwarzStatus status,
                          bool include_times) {
  json rows = json::array();
  for (const auto& r : trace.rows) {
    json subs = json::array();
    for (const auto& s : r.subdomains) {
      subs.push_back({{"time_s", include_times ? s.solve_time : 0.0},
                      {"iterations", s.iterations},
                      {"status", to_string(s.status)}});
    }
    rows.push_back({{"iter", r.iter},
                    {"objective", r.objective},
                    {"eps_pr", finite_or_null(r.eps_pr)},
                    {"eps_du", finite_or_null(r.eps_du)},
                    {"max_subsolve_time_s",
                     include_times ? r.max_subsolve_time : 0.0},
                    {"total_time_s", include_times ? r.total_time : 0.0},
                    {"subdomains", subs}});
  }
  json doc;
  doc["status"] = to_string(status);
  doc["rows"] = rows;
  return doc.dump(2);
}

NodeData parse_delta_spec(const std::string& spec, const NodeGraph& g, int j) {
  const NodeDims& d = g.dims(j);
  NodeData out{VectorXd::Zero(d.r), VectorXd::Zero(d.mE), VectorXd::Zero(d.mI)};
  std::string s = spec;
  std::erase_if(s, [](char c) { return c == ' '; });
  if (s.empty() || s == "0") return out;
  size_t pos = 0;
  while (pos < s.size()) {
    size_t end = s.find(',', pos);
    if (end == std::string::npos) end = s.size();
    const std::string item = s.substr(pos, end - pos);
    pos = end + 1;
    const size_t colon = item.find(':');
    const size_t eq = item.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
      throw std::invalid_argument("delta spec: expected field:index=value in '" +
                                  item + "'");
    }
    const std::string field = item.substr(0, colon);
    const int idx = std::stoi(item.substr(colon + 1, eq - colon - 1));
    const double val = std::stod(item.substr(eq + 1));
    VectorXd* target = nullptr;
    if (field == "f") target = &out.f;
    else if (field == "gE") target = &out.gE;
    else if (field == "gI") target = &out.gI;
    else {
      throw std::invalid_argument("delta spec: unknown field '" + field + "'");
    }
    if (idx < 0 || idx >= target->size()) {
      throw std::invalid_argument("delta spec: index " + std::to_string(idx) +
                                  " out of range for " + field);
    }
    (*target)(idx) += val;
  }
  return out;
}

}  // namespace swz
