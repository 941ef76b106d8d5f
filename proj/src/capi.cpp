#include "schwarzqp.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "schwarzqp/dcopf.hpp"
#include "schwarzqp/diagnostics.hpp"
#include "schwarzqp/json_io.hpp"
#include "schwarzqp/qp_solver.hpp"
#include "schwarzqp/schwarz.hpp"

struct swz_model {
  swz::BlockQP bqp;
};

struct swz_solution {
  swz::PrimalDualPoint z;
  std::string status;
  swz::KktResidual kkt;
  int iterations = 0;
  double objective = 0;
  bool regularized = false;
};

struct swz_trace {
  swz::SchwarzTrace trace;
  swz::SchwarzStatus status = swz::SchwarzStatus::kMaxOuter;
  int iterations = 0;
};

struct swz_profile {
  swz::DecayProfile p;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

swz_status fail(swz_status code, const std::string& msg) {
  set_error(msg);
  return code;
}

template <typename Fn>
swz_status guarded(swz_status error_code, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return fail(SWZ_ERR_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(error_code, e.what());
  }
}

bool read_file(const char* path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

bool write_file(const char* path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << text;
  return out.good();
}

swz::OpfOptions to_cpp(const swz_opf_options* o) {
  swz::OpfOptions opts;
  if (o) {
    opts.gamma = o->gamma;
    opts.storage_cost = o->storage_cost;
    opts.storage_enabled = o->storage_enabled != 0;
  }
  return opts;
}

swz::SolverConfig to_cpp(const swz_solver_options* o) {
  swz::SolverConfig cfg;
  if (o) {
    cfg.tol_kkt = o->tol_kkt;
    cfg.max_iter = o->max_iter;
    cfg.regularization_floor = o->regularization_floor;
  }
  return cfg;
}

swz_solution* make_solution(const swz::BlockQP& bqp, const swz::NodeSet& U,
                            const swz::PrimalDualPoint& z,
                            const std::string& status, int iterations,
                            bool regularized) {
  auto* s = new swz_solution;
  s->z = z;
  s->status = status;
  s->iterations = iterations;
  s->objective = bqp.objective(z);
  s->kkt = kkt_residual(bqp, U, z);
  s->regularized = regularized;
  return s;
}

}  // namespace

extern "C" {

const char* swz_version(void) { return "0.1.0"; }

const char* swz_last_error(void) { return g_last_error.c_str(); }

void swz_opf_options_init(swz_opf_options* o) {
  if (!o) return;
  swz::OpfOptions d;
  o->gamma = d.gamma;
  o->storage_cost = d.storage_cost;
  o->storage_enabled = d.storage_enabled ? 1 : 0;
}

void swz_solver_options_init(swz_solver_options* o) {
  if (!o) return;
  swz::SolverConfig d;
  o->tol_kkt = d.tol_kkt;
  o->max_iter = d.max_iter;
  o->regularization_floor = d.regularization_floor;
}

void swz_schwarz_options_init(swz_schwarz_options* o) {
  if (!o) return;
  swz::SchwarzConfig d;
  o->num_subdomains = d.K;
  o->overlap = d.omega;
  o->tol_pr = d.tol_pr;
  o->tol_du = d.tol_du;
  o->max_outer = d.max_outer;
  o->workers = d.parallelism;
  o->seed = 0;
  swz_solver_options_init(&o->subsolver);
}

swz_status swz_model_from_case_text(const char* text,
                                    const swz_opf_options* opf,
                                    swz_model** out) {
  if (!text || !out) return fail(SWZ_ERR_ARGUMENT, "null argument");
  return guarded(SWZ_ERR_PARSE, [&]() -> swz_status {
    swz::PowerCase pc = swz::parse_case(text);
    *out = new swz_model{swz::build_qp(pc, to_cpp(opf))};
    return SWZ_OK;
  });
}

swz_status swz_model_from_blockqp_json(const char* text, swz_model** out) {
  if (!text || !out) return fail(SWZ_ERR_ARGUMENT, "null argument");
  return guarded(SWZ_ERR_PARSE, [&]() -> swz_status {
    *out = new swz_model{swz::blockqp_from_json(text)};
    return SWZ_OK;
  });
}

swz_status swz_model_load_file(const char* path, const swz_opf_options* opf,
                               swz_model** out) {
  if (!path || !out) return fail(SWZ_ERR_ARGUMENT, "null argument");
  std::string text;
  if (!read_file(path, text)) {
    return fail(SWZ_ERR_IO, std::string("cannot read ") + path);
  }
  const std::string p(path);
  if (p.size() >= 2 && p.substr(p.size() - 2) == ".m") {
    return swz_model_from_case_text(text.c_str(), opf, out);
  }
  return swz_model_from_blockqp_json(text.c_str(), out);
}

swz_status swz_model_write_blockqp_json(const swz_model* m, const char* path) {
  if (!m || !path) return fail(SWZ_ERR_ARGUMENT, "null argument");
  return guarded(SWZ_ERR_INTERNAL, [&]() -> swz_status {
    if (!write_file(path, swz::blockqp_to_json(m->bqp))) {
      return fail(SWZ_ERR_IO, std::string("cannot write ") + path);
    }
    return SWZ_OK;
  });
}

void swz_model_free(swz_model* m) { delete m; }

int swz_model_num_nodes(const swz_model* m) {
  return m ? m->bqp.graph().num_nodes() : 0;
}

int swz_model_num_edges(const swz_model* m) {
  return m ? m->bqp.graph().num_edges() : 0;
}

int swz_model_num_variables(const swz_model* m) {
  if (!m) return 0;
  int n = 0;
  for (int i = 0; i < m->bqp.graph().num_nodes(); ++i) {
    n += m->bqp.graph().dims(i).r;
  }
  return n;
}

swz_status swz_solve(const swz_model* m, const swz_solver_options* opts,
                     swz_solution** out) {
  if (!m || !out) return fail(SWZ_ERR_ARGUMENT, "null argument");
  return guarded(SWZ_ERR_INTERNAL, [&]() -> swz_status {
    const swz::NodeSet V = swz::all_nodes(m->bqp.graph());
    swz::CompactQP qp = swz::assemble(m->bqp, V);
    swz::SolveReport rep = swz::solve(qp, to_cpp(opts));
    switch (rep.status) {
      case swz::SolveStatus::kOptimal:
      case swz::SolveStatus::kMaxIter:
        *out = make_solution(m->bqp, V, rep.point, to_string(rep.status),
                             rep.iterations, rep.regularized);
        return rep.status == swz::SolveStatus::kOptimal
                   ? SWZ_OK
                   : fail(SWZ_ERR_MAXITER, "iteration cap reached");
      case swz::SolveStatus::kInfeasible:
        return fail(SWZ_ERR_INFEASIBLE, "problem infeasible");
      case swz::SolveStatus::kUnbounded:
        return fail(SWZ_ERR_UNBOUNDED, "objective unbounded below");
    }
    return fail(SWZ_ERR_INTERNAL, "unknown solver status");
  });
}

swz_status swz_schwarz(const swz_model* m, const swz_schwarz_options* opts,
                       swz_solution** out, swz_trace** trace_out) {
  if (!m || !opts || !out) return fail(SWZ_ERR_ARGUMENT, "null argument");
  return guarded(SWZ_ERR_INTERNAL, [&]() -> swz_status {
    const swz::NodeGraph& g = m->bqp.graph();
    const swz::NodeSet V = swz::all_nodes(g);
    swz::OverlapPartition part =
        swz::partition(g, opts->num_subdomains, opts->seed);
    part = swz::expand(g, part, opts->overlap);

    swz::SchwarzConfig cfg;
    cfg.K = opts->num_subdomains;
    cfg.omega = opts->overlap;
    cfg.tol_pr = opts->tol_pr;
    cfg.tol_du = opts->tol_du;
    cfg.max_outer = opts->max_outer;
    cfg.parallelism = opts->workers;
    cfg.subsolver = to_cpp(&opts->subsolver);

    swz::SchwarzResult res = swz::schwarz_solve(
        m->bqp, V, part, cfg, swz::PrimalDualPoint::zeros(g, V));

    if (trace_out) {
      *trace_out = new swz_trace{res.trace, res.status, res.iterations};
    }
    switch (res.status) {
      case swz::SchwarzStatus::kConverged:
      case swz::SchwarzStatus::kMaxOuter:
        *out = make_solution(m->bqp, V, res.z, to_string(res.status),
                             res.iterations, false);
        return res.status == swz::SchwarzStatus::kConverged
                   ? SWZ_OK
                   : fail(SWZ_ERR_MAXITER, "outer iteration cap reached");
      case swz::SchwarzStatus::kDiverged:
        return fail(SWZ_ERR_DIVERGED, "iteration diverged");
      case swz::SchwarzStatus::kSubdomainInfeasible:
        return fail(SWZ_ERR_INFEASIBLE,
                    "subdomain " + std::to_string(res.infeasible_subdomain) +
                        " infeasible");
    }
    return fail(SWZ_ERR_INTERNAL, "unknown schwarz status");
  });
}

swz_status swz_sensitivity(const swz_model* m, int node,
                           const char* delta_spec,
                           const swz_solver_options* opts, swz_profile** out) {
  if (!m || !delta_spec || !out) {
    return fail(SWZ_ERR_ARGUMENT, "null argument");
  }
  return guarded(SWZ_ERR_INTERNAL, [&]() -> swz_status {
    const swz::NodeGraph& g = m->bqp.graph();
    if (node < 0 || node >= g.num_nodes()) {
      return fail(SWZ_ERR_ARGUMENT,
                  "node " + std::to_string(node) + " out of range");
    }
    swz::NodeData delta = swz::parse_delta_spec(delta_spec, g, node);
    swz::DecayProfile p = swz::decay_profile(
        m->bqp, swz::all_nodes(g), node, delta, to_cpp(opts));
    *out = new swz_profile{std::move(p)};
    return SWZ_OK;
  });
}

double swz_solution_objective(const swz_solution* s) {
  return s ? s->objective : 0.0;
}

int swz_solution_iterations(const swz_solution* s) {
  return s ? s->iterations : 0;
}

const char* swz_solution_status(const swz_solution* s) {
  return s ? s->status.c_str() : "null";
}

void swz_solution_kkt(const swz_solution* s, double out[5]) {
  if (!s || !out) return;
  out[0] = s->kkt.stationarity;
  out[1] = s->kkt.primal_eq;
  out[2] = s->kkt.primal_ineq;
  out[3] = s->kkt.dual_sign;
  out[4] = s->kkt.complementarity;
}

swz_status swz_solution_write_json(const swz_solution* s, const char* path) {
  if (!s || !path) return fail(SWZ_ERR_ARGUMENT, "null argument");
  return guarded(SWZ_ERR_INTERNAL, [&]() -> swz_status {
    std::string doc = swz::solution_to_json(s->z, s->status, s->kkt,
                                            s->iterations, s->objective,
                                            s->regularized);
    if (!write_file(path, doc)) {
      return fail(SWZ_ERR_IO, std::string("cannot write ") + path);
    }
    return SWZ_OK;
  });
}

void swz_solution_free(swz_solution* s) { delete s; }

int swz_trace_iterations(const swz_trace* t) { return t ? t->iterations : 0; }

const char* swz_trace_status(const swz_trace* t) {
  return t ? to_string(t->status) : "null";
}

void swz_trace_final_errors(const swz_trace* t, double* eps_pr,
                            double* eps_du) {
  if (!t || t->trace.rows.empty()) return;
  const auto& last = t->trace.rows.back();
  if (eps_pr) *eps_pr = last.eps_pr;
  if (eps_du) *eps_du = last.eps_du;
}

swz_status swz_trace_write_csv(const swz_trace* t, const char* path,
                               int include_times) {
  if (!t || !path) return fail(SWZ_ERR_ARGUMENT, "null argument");
  std::ostringstream ss;
  t->trace.write_csv(ss, include_times != 0);
  if (!write_file(path, ss.str())) {
    return fail(SWZ_ERR_IO, std::string("cannot write ") + path);
  }
  return SWZ_OK;
}

swz_status swz_trace_write_json(const swz_trace* t, const char* path,
                                int include_times) {
  if (!t || !path) return fail(SWZ_ERR_ARGUMENT, "null argument");
  return guarded(SWZ_ERR_INTERNAL, [&]() -> swz_status {
    std::string doc =
        swz::trace_to_json(t->trace, t->status, include_times != 0);
    if (!write_file(path, doc)) {
      return fail(SWZ_ERR_IO, std::string("cannot write ") + path);
    }
    return SWZ_OK;
  });
}

void swz_trace_free(swz_trace* t) { delete t; }

swz_status swz_profile_write_csv(const swz_profile* p, const char* path) {
  if (!p || !path) return fail(SWZ_ERR_ARGUMENT, "null argument");
  std::ostringstream ss;
  swz::write_profile_csv(p->p, ss);
  if (!write_file(path, ss.str())) {
    return fail(SWZ_ERR_IO, std::string("cannot write ") + path);
  }
  return SWZ_OK;
}

int swz_profile_basis_stable(const swz_profile* p) {
  return p && p->p.basis_stable ? 1 : 0;
}

double swz_profile_log_slope(const swz_profile* p) {
  if (!p) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (size_t a = 0; a < p->p.U.size(); ++a) {
    if (p->p.distance[a] == swz::kUnreachable) continue;
    if (p->p.delta_norm[a] <= 0) continue;
    const double x = p->p.distance[a];
    const double y = std::log(p->p.delta_norm[a]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double denom = n * sxx - sx * sx;
  if (denom == 0) return 0.0;
  return (n * sxy - sx * sy) / denom;
}

void swz_profile_free(swz_profile* p) { delete p; }

}  // extern "C"
