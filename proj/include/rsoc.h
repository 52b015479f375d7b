/* C interface to the risk-sensitive trajectory optimizer.
 *
 * All functions return RSOC_OK (0) on success or a nonzero error code; the
 * last error message for a session is available via rsoc_last_error. A
 * session is created from a JSON config text, solved once, and then queried.
 */
#ifndef RSOC_H
#define RSOC_H

#ifdef __cplusplus
extern "C" {
#endif

#define RSOC_OK 0
#define RSOC_ERR_INVALID 1    /* bad handle, null argument, out-of-range index */
#define RSOC_ERR_CONFIG 2     /* malformed or inconsistent configuration */
#define RSOC_ERR_SOLVER 3     /* numerical failure inside the optimizer */
#define RSOC_ERR_DIVERGENCE 4 /* a rollout left the finite range */

typedef struct rsoc_session rsoc_session;

const char* rsoc_version(void);

/* Creates a session from JSON config text. On failure returns NULL and, when
 * errbuf is non-null, stores a message (truncated to errbuf_len). */
rsoc_session* rsoc_session_create(const char* config_json, char* errbuf, int errbuf_len);
void rsoc_session_destroy(rsoc_session* s);

int rsoc_last_error(const rsoc_session* s, char* buf, int len);

int rsoc_solve(rsoc_session* s);

/* Dimensions and solve metadata (valid after rsoc_solve). Dimension getters
 * return negative values on error. */
int rsoc_num_steps(const rsoc_session* s);
int rsoc_state_dim(const rsoc_session* s);
int rsoc_control_dim(const rsoc_session* s);
int rsoc_measurement_dim(const rsoc_session* s);
int rsoc_iterations(const rsoc_session* s);
int rsoc_termination(const rsoc_session* s, char* buf, int len);

/* Copies min(cap, count) cost history entries; returns the full count or a
 * negative error code. */
int rsoc_cost_history(const rsoc_session* s, double* out, int cap);

/* k in [0, steps] for states, [0, steps) for the others. Matrices are copied
 * row-major: feedback m*n, estimator gain n*p. */
int rsoc_nominal_state(const rsoc_session* s, int k, double* out);
int rsoc_nominal_control(const rsoc_session* s, int k, double* out);
int rsoc_feedforward(const rsoc_session* s, int k, double* out);
int rsoc_feedback_gain(const rsoc_session* s, int k, double* out);
int rsoc_estimator_gain(const rsoc_session* s, int k, double* out);

/* Writes config.json, solution.json, trajectory.csv, gains.csv,
 * estimation_gains.csv and summary.json into out_dir. */
int rsoc_write_outputs(rsoc_session* s, const char* out_dir);

/* Simulates `samples` closed-loop noisy rollouts and stores the realized cost
 * of each into costs_out (length samples). */
int rsoc_rollout_batch(rsoc_session* s, int samples, unsigned long long seed, double* costs_out);

/* Monte Carlo risk statistics of a cost sample: out[0]=risk, out[1]=mean,
 * out[2]=variance, out[3]=third central moment, out[4]=bootstrap std error. */
int rsoc_estimate_risk(const double* costs, int count, double sigma, double out[5]);

/* One-shot helpers mirroring the CLI subcommands. On failure the message goes
 * to errbuf when non-null. */
int rsoc_solve_to_dir(const char* config_json, const char* out_dir, char* errbuf, int errbuf_len);
int rsoc_rollout_to_dir(const char* config_json, const char* law_dir, int samples,
                        unsigned long long seed, const char* out_dir, char* errbuf,
                        int errbuf_len);
int rsoc_run_experiment(const char* name, const char* config_json, const char* out_dir,
                        char* errbuf, int errbuf_len);

/* Runs the built-in diagnostics; writes the report into buf (truncated) and
 * returns RSOC_OK when every check passes. */
int rsoc_selftest(char* buf, int len);

#ifdef __cplusplus
}
#endif

#endif /* RSOC_H */
