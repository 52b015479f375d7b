#include "rsoc/problem.hpp"

#include <cmath>
#include <sstream>

namespace rsoc {

namespace {

bool finite(const Vec& v) { return v.allFinite(); }
bool finite(const Mat& m) { return m.allFinite(); }

std::string shape(const Mat& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

Trajectory::Trajectory(double dt_, std::vector<Vec> states_, std::vector<Vec> controls_)
    : dt(dt_), states(std::move(states_)), controls(std::move(controls_)) {
  auto violations = check_trajectory(*this);
  if (!violations.empty()) throw ConfigError("invalid trajectory: " + violations.front());
}

std::vector<std::string> check_trajectory(const Trajectory& traj) {
  std::vector<std::string> out;
  if (!(traj.dt > 0.0) || !std::isfinite(traj.dt)) out.push_back("dt must be positive and finite");
  if (traj.states.size() != traj.controls.size() + 1)
    out.push_back("states must have exactly one more entry than controls");
  if (traj.states.empty()) {
    out.push_back("trajectory has no states");
    return out;
  }
  const auto n = traj.states.front().size();
  for (const auto& x : traj.states)
    if (x.size() != n) {
      out.push_back("state dimensions are not uniform");
      break;
    }
  if (!traj.controls.empty()) {
    const auto m = traj.controls.front().size();
    for (const auto& u : traj.controls)
      if (u.size() != m) {
        out.push_back("control dimensions are not uniform");
        break;
      }
  }
  return out;
}

std::vector<double> default_alphas() {
  std::vector<double> a;
  for (double v = 1.0; v >= 1.0 / 1024.0 - 1e-12; v /= 2.0) a.push_back(v);
  return a;
}

void check_solver_config(const SolverConfig& c) {
  if (!std::isfinite(c.sigma)) throw ConfigError("sigma must be finite");
  if (c.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(c.cost_tolerance > 0.0)) throw ConfigError("cost_tolerance must be positive");
  if (!(c.regularization_min > 0.0) || !(c.regularization_max >= c.regularization_min))
    throw ConfigError("regularization bounds must satisfy 0 < min <= max");
  if (!(c.regularization_init >= c.regularization_min &&
        c.regularization_init <= c.regularization_max))
    throw ConfigError("regularization_init must lie within [min, max]");
  if (!(c.regularization_factor > 1.0))
    throw ConfigError("regularization_factor must be greater than 1");
  if (!(c.fd_epsilon > 0.0)) throw ConfigError("fd_epsilon must be positive");
  const auto& alphas = c.line_search_alphas;
  if (!alphas.empty()) {
    if (alphas.front() != 1.0) throw ConfigError("line_search_alphas must start at 1");
    for (size_t i = 0; i < alphas.size(); ++i) {
      if (!(alphas[i] > 0.0 && alphas[i] <= 1.0))
        throw ConfigError("line_search_alphas must lie in (0, 1]");
      if (i > 0 && !(alphas[i] < alphas[i - 1]))
        throw ConfigError("line_search_alphas must be strictly decreasing");
    }
  }
  if (c.initial_error_cov.size() > 0) {
    if (c.initial_error_cov.rows() != c.initial_error_cov.cols())
      throw ConfigError("initial_error_cov must be square");
    if (!c.initial_error_cov.isApprox(c.initial_error_cov.transpose(), 1e-10))
      throw ConfigError("initial_error_cov must be symmetric");
  }
}

std::vector<std::string> validate_problem(const ContinuousProblem& p, const NoiseModel& noise,
                                          const Trajectory& traj) {
  std::vector<std::string> out;
  if (p.state_dim <= 0) out.push_back("state_dim must be positive");
  if (p.control_dim <= 0) out.push_back("control_dim must be positive");
  if (p.measurement_dim <= 0) out.push_back("measurement_dim must be positive");
  if (p.process_noise_dim <= 0) out.push_back("process_noise_dim must be positive");
  if (p.measurement_noise_dim <= 0) out.push_back("measurement_noise_dim must be positive");
  if (!(p.horizon > 0.0)) out.push_back("horizon must be positive");
  if (!p.drift || !p.diffusion || !p.measurement || !p.measurement_diffusion ||
      !p.running_cost || !p.terminal_cost) {
    out.push_back("problem callbacks must all be set");
    return out;
  }

  for (const auto& v : check_trajectory(traj)) out.push_back(v);
  if (!out.empty()) return out;

  if (traj.states.front().size() != p.state_dim)
    out.push_back("trajectory state dimension does not match the problem");
  if (!traj.controls.empty() && traj.controls.front().size() != p.control_dim)
    out.push_back("trajectory control dimension does not match the problem");

  auto check_cov = [&out](const Mat& cov, int dim, const char* name) {
    if (cov.rows() != dim || cov.cols() != dim) {
      out.push_back(std::string(name) + " has shape " + shape(cov) + ", expected " +
                    std::to_string(dim) + "x" + std::to_string(dim));
      return;
    }
    if (!finite(cov)) {
      out.push_back(std::string(name) + " has non-finite entries");
      return;
    }
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if (!cov.isApprox(cov.transpose(), 1e-10))
      out.push_back(std::string(name) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (cov + cov.transpose()));
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
      out.push_back(std::string(name) + " is not positive semidefinite");
  };
  check_cov(noise.process_cov, p.process_noise_dim, "process covariance");
  check_cov(noise.measurement_cov, p.measurement_noise_dim, "measurement covariance");
  if (!out.empty()) return out;

  // Probe every callback once at the start of the trajectory.
  const Vec& x = traj.states.front();
  const Vec u = traj.controls.empty() ? Vec::Zero(p.control_dim) : traj.controls.front();
  const double t = 0.0;
  try {
    Vec m = p.drift(x, u, t);
    if (m.size() != p.state_dim) out.push_back("drift output has wrong dimension");
    else if (!finite(m)) out.push_back("drift output is non-finite at the initial point");
    Mat M = p.diffusion(x, u, t);
    if (M.rows() != p.state_dim || M.cols() != p.process_noise_dim)
      out.push_back("diffusion output has shape " + shape(M));
    else if (!finite(M)) out.push_back("diffusion output is non-finite at the initial point");
    Vec y = p.measurement(x, u, t);
    if (y.size() != p.measurement_dim) out.push_back("measurement output has wrong dimension");
    else if (!finite(y)) out.push_back("measurement output is non-finite at the initial point");
    Mat N = p.measurement_diffusion(x, u, t);
    if (N.rows() != p.measurement_dim || N.cols() != p.measurement_noise_dim)
      out.push_back("measurement diffusion output has shape " + shape(N));
    else if (!finite(N))
      out.push_back("measurement diffusion output is non-finite at the initial point");
    const double l = p.running_cost(x, u, t);
    if (!std::isfinite(l)) out.push_back("running cost is non-finite at the initial point");
    const double lf = p.terminal_cost(traj.states.back());
    if (!std::isfinite(lf)) out.push_back("terminal cost is non-finite at the final state");
  } catch (const std::exception& e) {
    out.push_back(std::string("a problem callback threw: ") + e.what());
  }
  return out;
}

Vec rk4_step(const ContinuousProblem& p, const Vec& x, const Vec& u, double t, double dt) {
  const Vec k1 = p.drift(x, u, t);
  const Vec k2 = p.drift(x + 0.5 * dt * k1, u, t + 0.5 * dt);
  const Vec k3 = p.drift(x + 0.5 * dt * k2, u, t + 0.5 * dt);
  const Vec k4 = p.drift(x + dt * k3, u, t + dt);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory zero_noise_rollout(const ContinuousProblem& p, const std::vector<Vec>& controls,
                              const Vec& x0, double dt) {
  Trajectory traj;
  traj.dt = dt;
  traj.controls = controls;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(x0);
  for (size_t k = 0; k < controls.size(); ++k) {
    Vec next = rk4_step(p, traj.states.back(), controls[k], dt * static_cast<double>(k), dt);
    if (!finite(next))
      throw DivergenceError("rollout produced a non-finite state at step " + std::to_string(k + 1),
                            static_cast<int>(k + 1));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

double evaluate_deterministic_cost(const ContinuousProblem& p, const Trajectory& traj) {
  double total = 0.0;
  for (int k = 0; k < traj.steps(); ++k) {
    const double l = p.running_cost(traj.states[k], traj.controls[k], traj.time(k));
    if (!std::isfinite(l))
      throw DivergenceError("running cost non-finite at step " + std::to_string(k), k);
    total += l * traj.dt;
  }
  const double lf = p.terminal_cost(traj.states.back());
  if (!std::isfinite(lf))
    throw DivergenceError("terminal cost non-finite", traj.steps());
  return total + lf;
}

}  // namespace rsoc
