#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsoc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error classes map 1:1 onto CLI / C API exit codes.
enum class ErrorCode : int {
  invalid = 1,     // misuse of the API (bad handle, wrong sizes)
  config = 2,      // invalid problem/config input
  solver = 3,      // numerical failure inside the optimizer
  divergence = 4,  // a rollout left the finite range
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCode::config, w) {}
};

struct SolverError : Error {
  explicit SolverError(const std::string& w) : Error(ErrorCode::solver, w) {}
};

// Thrown by the backward pass when the control Hessian is not positive
// definite at the current regularization; the solver reacts by raising lambda.
struct RegularizationNeeded : SolverError {
  explicit RegularizationNeeded(const std::string& w) : SolverError(w) {}
};

struct DivergenceError : Error {
  DivergenceError(const std::string& w, int timestep)
      : Error(ErrorCode::divergence, w), timestep(timestep) {}
  int timestep;
};

// Continuous-time stochastic control problem
//   dx = m(x,u,t) dt + M(x,u,t) db,   b Brownian with covariance rate Omega
//   dy = n(x,u,t) dt + N(x,u,t) dg,   g Brownian with covariance rate Gamma
//   J  = integral L(x,u,t) dt + Lf(x(tf))
// All callbacks take absolute states/controls and the absolute time.
struct ContinuousProblem {
  int state_dim = 0;
  int control_dim = 0;
  int measurement_dim = 0;
  int process_noise_dim = 0;      // columns of M
  int measurement_noise_dim = 0;  // columns of N
  double horizon = 0.0;           // tf, seconds

  std::function<Vec(const Vec&, const Vec&, double)> drift;
  std::function<Mat(const Vec&, const Vec&, double)> diffusion;
  std::function<Vec(const Vec&, const Vec&, double)> measurement;
  std::function<Mat(const Vec&, const Vec&, double)> measurement_diffusion;
  std::function<double(const Vec&, const Vec&, double)> running_cost;
  std::function<double(const Vec&)> terminal_cost;

  // Optional analytic Jacobians; finite differences are used when absent.
  std::function<Mat(const Vec&, const Vec&, double)> drift_dx;
  std::function<Mat(const Vec&, const Vec&, double)> drift_du;
  std::function<Mat(const Vec&, const Vec&, double)> measurement_dx;
  std::function<Mat(const Vec&, const Vec&, double)> measurement_du;

  // Optional probe recorded along rollouts (e.g. contact force components and
  // the gap); one label per row of the returned vector.
  std::function<Vec(const Vec&, const Vec&, double)> probe;
  std::vector<std::string> probe_labels;
};

// Brownian covariance rates for the process and measurement channels.
struct NoiseModel {
  Mat process_cov;      // Omega, w x w
  Mat measurement_cov;  // Gamma, v x v
};

// Discrete trajectory on a uniform grid: states has exactly one more entry
// than controls and both agree on their vector dimensions.
struct Trajectory {
  double dt = 0.0;
  std::vector<Vec> states;
  std::vector<Vec> controls;

  Trajectory() = default;
  Trajectory(double dt, std::vector<Vec> states, std::vector<Vec> controls);

  int steps() const { return static_cast<int>(controls.size()); }
  double time(int k) const { return dt * k; }
};

// Shape/value checks for a trajectory; returns human-readable violations.
std::vector<std::string> check_trajectory(const Trajectory& traj);

struct SolverConfig {
  double sigma = 0.0;  // risk sensitivity; 0 recovers the risk-neutral solver
  // Warm-start schedule: solve at each of these sigmas in turn, feeding the
  // optimized controls forward, before the final solve at `sigma`. Keeps the
  // early iterates of an aggressive sigma out of regions where the
  // risk-sensitive recursion overflows (stiff contact being the usual case).
  std::vector<double> sigma_stages;
  int max_iterations = 100;
  double cost_tolerance = 1e-6;  // relative cost-change convergence threshold

  double regularization_init = 1e-6;
  double regularization_min = 1e-9;
  double regularization_max = 1e9;
  double regularization_factor = 10.0;

  std::vector<double> line_search_alphas;  // empty -> default_alphas()

  Mat initial_error_cov;  // empty -> 1e-2 * I
  std::uint64_t rng_seed = 0;
  double fd_epsilon = 1e-5;

  // Clamp negative eigenvalues of the state cost Hessian blocks at zero.
  // Useful for costs composed through nonlinear kinematics.
  bool project_cost_hessians = false;
};

// 1, 1/2, 1/4, ..., 1/1024
std::vector<double> default_alphas();

// Throws ConfigError when the config violates its invariants.
void check_solver_config(const SolverConfig& config);

}  // namespace rsoc
