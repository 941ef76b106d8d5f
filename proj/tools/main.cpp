// Command-line driver for the schwarzqp shared library.  Talks to the
// solver exclusively through the C API in schwarzqp.h.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>

#include "schwarzqp.h"

namespace {

using nlohmann::json;

int exit_code_for(swz_status s) {
  switch (s) {
    case SWZ_OK: return 0;
    case SWZ_ERR_ARGUMENT:
    case SWZ_ERR_PARSE:
    case SWZ_ERR_IO: return 2;
    case SWZ_ERR_INFEASIBLE:
    case SWZ_ERR_UNBOUNDED: return 3;
    case SWZ_ERR_MAXITER: return 4;
    case SWZ_ERR_DIVERGED: return 5;
    case SWZ_ERR_INTERNAL: return 2;
  }
  return 2;
}

std::string iso_timestamp() {
  char buf[64];
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// A manifest fully determines a rerun: command, input, and the whole
// option snapshot.  Written next to the primary output.
bool write_manifest(const std::string& out_path, const std::string& command,
                    const std::string& input, const json& options) {
  json doc;
  doc["command"] = command;
  doc["input"] = input;
  doc["options"] = options;
  doc["version"] = swz_version();
  doc["timestamp"] = iso_timestamp();
  std::ofstream f(out_path + ".manifest.json");
  if (!f) return false;
  f << doc.dump(2) << "\n";
  return f.good();
}

struct OpfFlags {
  double gamma = 0;
  double storage_cost = 0;
  bool storage = false;

  swz_opf_options to_options() const {
    swz_opf_options o;
    swz_opf_options_init(&o);
    o.gamma = gamma;
    o.storage_cost = storage_cost;
    o.storage_enabled = storage ? 1 : 0;
    return o;
  }
  void attach(CLI::App* cmd) {
    swz_opf_options d;
    swz_opf_options_init(&d);
    gamma = d.gamma;
    storage_cost = d.storage_cost;
    cmd->add_option("--gamma", gamma,
                    "angle regularization weight for case files");
    cmd->add_option("--storage-cost", storage_cost,
                    "quadratic cost of artificial storage");
    cmd->add_flag("--storage", storage,
                  "add artificial storage at every bus");
  }
  json to_json() const {
    return {{"gamma", gamma},
            {"storage_cost", storage_cost},
            {"storage", storage}};
  }
};

int fail_with(swz_status s, const char* what) {
  std::fprintf(stderr, "error: %s: %s\n", what, swz_last_error());
  return exit_code_for(s);
}

int run_solve(const std::string& input, const std::string& out,
              const OpfFlags& opf, double tol_kkt, int max_iter, int k_flag,
              int omega_flag) {
  if (k_flag >= 0 || omega_flag >= 0) {
    std::fprintf(stderr,
                 "warning: --K/--omega ignored in centralized mode\n");
  }
  swz_opf_options oo = opf.to_options();
  swz_model* model = nullptr;
  swz_status s = swz_model_load_file(input.c_str(), &oo, &model);
  if (s != SWZ_OK) return fail_with(s, "load");

  swz_solver_options so;
  swz_solver_options_init(&so);
  so.tol_kkt = tol_kkt;
  so.max_iter = max_iter;

  swz_solution* sol = nullptr;
  s = swz_solve(model, &so, &sol);
  if (s != SWZ_OK && !sol) {
    swz_model_free(model);
    return fail_with(s, "solve");
  }

  double kkt[5];
  swz_solution_kkt(sol, kkt);
  std::printf("status      %s\n", swz_solution_status(sol));
  std::printf("objective   %.10g\n", swz_solution_objective(sol));
  std::printf("iterations  %d\n", swz_solution_iterations(sol));
  std::printf("kkt         stat=%.3e eq=%.3e ineq=%.3e sign=%.3e comp=%.3e\n",
              kkt[0], kkt[1], kkt[2], kkt[3], kkt[4]);

  swz_status ws = swz_solution_write_json(sol, out.c_str());
  if (ws != SWZ_OK) {
    swz_solution_free(sol);
    swz_model_free(model);
    return fail_with(ws, "write solution");
  }
  write_manifest(out, "solve", input,
                 json{{"tol_kkt", tol_kkt},
                      {"max_iter", max_iter},
                      {"opf", opf.to_json()},
                      {"out", out}});
  std::printf("wrote %s\n", out.c_str());
  swz_solution_free(sol);
  swz_model_free(model);
  return exit_code_for(s);
}

int run_schwarz(const std::string& input, const std::string& out,
                const std::string& trace_csv, const std::string& trace_json,
                const OpfFlags& opf, swz_schwarz_options so,
                bool trace_times) {
  swz_opf_options oo = opf.to_options();
  swz_model* model = nullptr;
  swz_status s = swz_model_load_file(input.c_str(), &oo, &model);
  if (s != SWZ_OK) return fail_with(s, "load");

  const auto t0 = std::chrono::steady_clock::now();
  swz_solution* sol = nullptr;
  swz_trace* trace = nullptr;
  s = swz_schwarz(model, &so, &sol, &trace);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (trace) {
    if (!trace_csv.empty()) {
      swz_trace_write_csv(trace, trace_csv.c_str(), trace_times ? 1 : 0);
    }
    if (!trace_json.empty()) {
      swz_trace_write_json(trace, trace_json.c_str(), 1);
    }
  }
  if (s != SWZ_OK && !sol) {
    std::fprintf(stderr, "error: schwarz: %s\n", swz_last_error());
    if (trace) swz_trace_free(trace);
    swz_model_free(model);
    return exit_code_for(s);
  }

  double eps_pr = 0, eps_du = 0;
  if (trace) swz_trace_final_errors(trace, &eps_pr, &eps_du);
  std::printf("subdomains  %d    overlap %d\n", so.num_subdomains, so.overlap);
  std::printf("status      %s\n", swz_solution_status(sol));
  std::printf("iterations  %d\n", swz_trace_iterations(trace));
  std::printf("time        %.3f s\n", elapsed);
  std::printf("eps_pr      %.6e  (tol %.1e)\n", eps_pr, so.tol_pr);
  std::printf("eps_du      %.6e  (tol %.1e)\n", eps_du, so.tol_du);
  std::printf("objective   %.10g\n", swz_solution_objective(sol));

  if (!out.empty()) {
    swz_status ws = swz_solution_write_json(sol, out.c_str());
    if (ws != SWZ_OK) {
      std::fprintf(stderr, "error: write solution: %s\n", swz_last_error());
    }
  }
  const std::string manifest_anchor = !out.empty() ? out : trace_csv;
  write_manifest(manifest_anchor, "schwarz", input,
                 json{{"K", so.num_subdomains},
                      {"omega", so.overlap},
                      {"tol_pr", so.tol_pr},
                      {"tol_du", so.tol_du},
                      {"max_outer", so.max_outer},
                      {"workers", so.workers},
                      {"seed", so.seed},
                      {"sub_tol_kkt", so.subsolver.tol_kkt},
                      {"sub_max_iter", so.subsolver.max_iter},
                      {"trace", trace_csv},
                      {"trace_times", trace_times},
                      {"opf", opf.to_json()},
                      {"out", out}});

  if (trace) swz_trace_free(trace);
  swz_solution_free(sol);
  swz_model_free(model);
  return exit_code_for(s);
}

int run_sensitivity(const std::string& input, const std::string& out,
                    int node, const std::string& delta, const OpfFlags& opf,
                    double tol_kkt) {
  swz_opf_options oo = opf.to_options();
  swz_model* model = nullptr;
  swz_status s = swz_model_load_file(input.c_str(), &oo, &model);
  if (s != SWZ_OK) return fail_with(s, "load");

  swz_solver_options so;
  swz_solver_options_init(&so);
  so.tol_kkt = tol_kkt;

  swz_profile* profile = nullptr;
  s = swz_sensitivity(model, node, delta.c_str(), &so, &profile);
  if (s != SWZ_OK) {
    swz_model_free(model);
    return fail_with(s, "sensitivity");
  }
  swz_status ws = swz_profile_write_csv(profile, out.c_str());
  if (ws != SWZ_OK) {
    swz_profile_free(profile);
    swz_model_free(model);
    return fail_with(ws, "write profile");
  }
  std::printf("node        %d\n", node);
  std::printf("delta       %s\n", delta.c_str());
  std::printf("log-slope   %.6f\n", swz_profile_log_slope(profile));
  std::printf("basis       %s\n",
              swz_profile_basis_stable(profile) ? "stable" : "changed");
  write_manifest(out, "sensitivity", input,
                 json{{"node", node},
                      {"delta", delta},
                      {"tol_kkt", tol_kkt},
                      {"opf", opf.to_json()},
                      {"out", out}});
  std::printf("wrote %s\n", out.c_str());
  swz_profile_free(profile);
  swz_model_free(model);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-structured QP solver with overlapping Schwarz "
               "decomposition"};
  app.require_subcommand(1);

  // ---- solve ----
  auto* solve = app.add_subcommand("solve", "centralized solve");
  std::string in_solve, out_solve = "solution.json";
  double tol_kkt = 1e-9;
  int max_iter = 200;
  int k_ignored = -1, omega_ignored = -1;
  OpfFlags opf_solve;
  solve->add_option("input", in_solve, "case (.m) or BlockQP JSON")
      ->required();
  solve->add_option("--out", out_solve, "solution JSON path");
  solve->add_option("--tol-kkt", tol_kkt, "KKT tolerance");
  solve->add_option("--max-iter", max_iter, "active-set iteration cap");
  solve->add_option("--K", k_ignored, "ignored in centralized mode");
  solve->add_option("--omega", omega_ignored, "ignored in centralized mode");
  opf_solve.attach(solve);

  // ---- schwarz ----
  auto* schwarz = app.add_subcommand("schwarz", "overlapping Schwarz solve");
  std::string in_sz, out_sz = "solution.json", trace_csv = "trace.csv",
              trace_json;
  bool trace_times = false;
  swz_schwarz_options so;
  swz_schwarz_options_init(&so);
  unsigned long long seed = 0;
  OpfFlags opf_sz;
  schwarz->add_option("input", in_sz, "case (.m) or BlockQP JSON")
      ->required();
  schwarz->add_option("--K", so.num_subdomains, "subdomain count")
      ->check(CLI::PositiveNumber);
  schwarz->add_option("--omega", so.overlap, "overlap size")
      ->check(CLI::NonNegativeNumber);
  schwarz->add_option("--tol-pr", so.tol_pr, "primal tolerance");
  schwarz->add_option("--tol-du", so.tol_du, "dual tolerance");
  schwarz->add_option("--max-iter", so.max_outer, "outer iteration cap");
  schwarz->add_option("--workers", so.workers, "worker threads");
  schwarz->add_option("--seed", seed, "partition seed");
  schwarz->add_option("--sub-tol-kkt", so.subsolver.tol_kkt,
                      "subproblem KKT tolerance");
  schwarz->add_option("--sub-max-iter", so.subsolver.max_iter,
                      "subproblem active-set cap");
  schwarz->add_option("--trace", trace_csv, "trace CSV path");
  schwarz->add_option("--trace-json", trace_json, "full trace JSON path");
  schwarz->add_flag("--trace-times", trace_times,
                    "keep wall times in the trace CSV (not reproducible)");
  schwarz->add_option("--out", out_sz, "solution JSON path");
  opf_sz.attach(schwarz);

  // ---- sensitivity ----
  auto* sens = app.add_subcommand("sensitivity",
                                  "perturbation decay profile");
  std::string in_se, out_se = "profile.csv", delta = "0";
  int node = 0;
  double tol_kkt_se = 1e-9;
  OpfFlags opf_se;
  sens->add_option("input", in_se, "case (.m) or BlockQP JSON")->required();
  sens->add_option("--node", node, "perturbed node id")->required();
  sens->add_option("--delta", delta,
                   "perturbation spec, e.g. f:0=0.1,gI:2=-0.5 (or 0)");
  sens->add_option("--out", out_se, "profile CSV path");
  sens->add_option("--tol-kkt", tol_kkt_se, "solver KKT tolerance");
  opf_se.attach(sens);

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) {
    return run_solve(in_solve, out_solve, opf_solve, tol_kkt, max_iter,
                     k_ignored, omega_ignored);
  }
  if (schwarz->parsed()) {
    so.seed = seed;
    return run_schwarz(in_sz, out_sz, trace_csv, trace_json, opf_sz, so,
                       trace_times);
  }
  if (sens->parsed()) {
    return run_sensitivity(in_se, out_se, node, delta, opf_se, tol_kkt_se);
  }
  return 2;
}
