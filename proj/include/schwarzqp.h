/* C interface to the schwarzqp solver library.
 *
 * All functions return swz_status (SWZ_OK on success); constructors
 * hand back opaque handles that must be released with the matching
 * _free call.  swz_last_error() returns a message for the most recent
 * failure on the calling thread.
 */
#ifndef SCHWARZQP_H
#define SCHWARZQP_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum swz_status {
  SWZ_OK = 0,
  SWZ_ERR_ARGUMENT = 1,
  SWZ_ERR_PARSE = 2,
  SWZ_ERR_INFEASIBLE = 3,
  SWZ_ERR_MAXITER = 4,
  SWZ_ERR_DIVERGED = 5,
  SWZ_ERR_UNBOUNDED = 6,
  SWZ_ERR_IO = 7,
  SWZ_ERR_INTERNAL = 8
} swz_status;

typedef struct swz_model swz_model;
typedef struct swz_solution swz_solution;
typedef struct swz_trace swz_trace;
typedef struct swz_profile swz_profile;

const char* swz_version(void);
const char* swz_last_error(void);

typedef struct swz_opf_options {
  double gamma;          /* angle regularization weight */
  double storage_cost;   /* quadratic cost of artificial storage */
  int storage_enabled;   /* nonzero: add one storage variable per bus */
} swz_opf_options;
void swz_opf_options_init(swz_opf_options* o);

typedef struct swz_solver_options {
  double tol_kkt;
  int max_iter;
  double regularization_floor;
} swz_solver_options;
void swz_solver_options_init(swz_solver_options* o);

typedef struct swz_schwarz_options {
  int num_subdomains;       /* K */
  int overlap;              /* omega */
  double tol_pr;
  double tol_du;
  int max_outer;
  int workers;
  unsigned long long seed;  /* partition seed */
  swz_solver_options subsolver;
} swz_schwarz_options;
void swz_schwarz_options_init(swz_schwarz_options* o);

/* Loading: paths ending in ".m" parse as a MATPOWER-style case (opf
 * may be NULL for defaults), anything else as BlockQP JSON. */
swz_status swz_model_load_file(const char* path, const swz_opf_options* opf,
                               swz_model** out);
swz_status swz_model_from_case_text(const char* text,
                                    const swz_opf_options* opf,
                                    swz_model** out);
swz_status swz_model_from_blockqp_json(const char* text, swz_model** out);
swz_status swz_model_write_blockqp_json(const swz_model* m, const char* path);
void swz_model_free(swz_model* m);

int swz_model_num_nodes(const swz_model* m);
int swz_model_num_edges(const swz_model* m);
int swz_model_num_variables(const swz_model* m);

/* Centralized solve of the full problem.  *out is filled for OK and
 * SWZ_ERR_MAXITER. */
swz_status swz_solve(const swz_model* m, const swz_solver_options* opts,
                     swz_solution** out);

/* Partition -> expand -> overlapping Schwarz.  *out is filled for OK
 * and SWZ_ERR_MAXITER (best iterate); *trace_out, when non-NULL, is
 * filled whenever at least one iteration ran. */
swz_status swz_schwarz(const swz_model* m, const swz_schwarz_options* opts,
                       swz_solution** out, swz_trace** trace_out);

/* Sensitivity profile at `node` under a perturbation spec ("0" or
 * "f:0=0.1,gI:2=-0.5"). */
swz_status swz_sensitivity(const swz_model* m, int node,
                           const char* delta_spec,
                           const swz_solver_options* opts, swz_profile** out);

double swz_solution_objective(const swz_solution* s);
int swz_solution_iterations(const swz_solution* s);
const char* swz_solution_status(const swz_solution* s);
/* [stationarity, primal_eq, primal_ineq, dual_sign, complementarity] */
void swz_solution_kkt(const swz_solution* s, double out[5]);
swz_status swz_solution_write_json(const swz_solution* s, const char* path);
void swz_solution_free(swz_solution* s);

int swz_trace_iterations(const swz_trace* t);
const char* swz_trace_status(const swz_trace* t);
void swz_trace_final_errors(const swz_trace* t, double* eps_pr,
                            double* eps_du);
/* include_times = 0 writes zeroed timing columns (byte-reproducible). */
swz_status swz_trace_write_csv(const swz_trace* t, const char* path,
                               int include_times);
swz_status swz_trace_write_json(const swz_trace* t, const char* path,
                                int include_times);
void swz_trace_free(swz_trace* t);

swz_status swz_profile_write_csv(const swz_profile* p, const char* path);
int swz_profile_basis_stable(const swz_profile* p);
/* least-squares slope of log(delta_norm) against distance over nodes
 * with a finite distance and a nonzero delta; 0 when undefined */
double swz_profile_log_slope(const swz_profile* p);
void swz_profile_free(swz_profile* p);

#ifdef __cplusplus
}
#endif

#endif /* SCHWARZQP_H */
