#include "rsoc/linearize.hpp"

#include <cmath>
#include <string>

namespace rsoc {

namespace {

double step_size(double eps, double coord) { return eps * std::max(1.0, std::abs(coord)); }

void require_finite(const Mat& m, const char* name, int k_unknown, const char* what) {
  if (m.allFinite()) return;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)))
        throw SolverError(std::string(what) + " produced non-finite " + name + " entry (" +
                          std::to_string(i) + "," + std::to_string(j) + ")" +
                          (k_unknown >= 0 ? " at step " + std::to_string(k_unknown) : ""));
}

// Central-difference Jacobian of f with respect to its first argument,
// perturbing around z; second argument held fixed.
template <typename F>
Mat jacobian_wrt(const F& f, const Vec& z, int out_dim, double eps) {
  Mat J(out_dim, z.size());
  Vec zp = z, zm = z;
  for (int i = 0; i < z.size(); ++i) {
    const double h = step_size(eps, z[i]);
    zp[i] = z[i] + h;
    zm[i] = z[i] - h;
    J.col(i) = (f(zp) - f(zm)) / (2.0 * h);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  return J;
}

template <typename F>
Vec gradient_wrt(const F& f, const Vec& z, double eps) {
  Vec g(z.size());
  Vec zp = z, zm = z;
  for (int i = 0; i < z.size(); ++i) {
    const double h = step_size(eps, z[i]);
    zp[i] = z[i] + h;
    zm[i] = z[i] - h;
    g[i] = (f(zp) - f(zm)) / (2.0 * h);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  return g;
}

// Central second differences; f0 is f(z).
template <typename F>
Mat hessian_wrt(const F& f, const Vec& z, double f0, double eps) {
  const int n = static_cast<int>(z.size());
  Mat H(n, n);
  Vec w = z;
  for (int i = 0; i < n; ++i) {
    const double hi = step_size(eps, z[i]);
    w[i] = z[i] + hi;
    const double fpp = f(w);
    w[i] = z[i] - hi;
    const double fmm = f(w);
    w[i] = z[i];
    H(i, i) = (fpp - 2.0 * f0 + fmm) / (hi * hi);
    for (int j = i + 1; j < n; ++j) {
      const double hj = step_size(eps, z[j]);
      w[i] = z[i] + hi;
      w[j] = z[j] + hj;
      const double fa = f(w);
      w[j] = z[j] - hj;
      const double fb = f(w);
      w[i] = z[i] - hi;
      const double fd = f(w);
      w[j] = z[j] + hj;
      const double fc = f(w);
      w[i] = z[i];
      w[j] = z[j];
      H(i, j) = H(j, i) = (fa - fb - fc + fd) / (4.0 * hi * hj);
    }
  }
  return H;
}

// Mixed block d^2 f / dx du by differencing the x-gradient along u.
template <typename F>
Mat cross_hessian(const F& f, const Vec& x, const Vec& u, double eps) {
  Mat P(x.size(), u.size());
  Vec up = u, um = u;
  for (int j = 0; j < u.size(); ++j) {
    const double hj = step_size(eps, u[j]);
    up[j] = u[j] + hj;
    um[j] = u[j] - hj;
    Vec xp = x, xm = x;
    for (int i = 0; i < x.size(); ++i) {
      const double hi = step_size(eps, x[i]);
      xp[i] = x[i] + hi;
      xm[i] = x[i] - hi;
      const double fa = f(xp, up);
      const double fb = f(xp, um);
      const double fc = f(xm, up);
      const double fd = f(xm, um);
      xp[i] = x[i];
      xm[i] = x[i];
      P(i, j) = (fa - fb - fc + fd) / (4.0 * hi * hj);
    }
    up[j] = u[j];
    um[j] = u[j];
  }
  return P;
}

Mat project_psd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  Vec vals = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

StageDynamics linearize_stage(const ContinuousProblem& p, const Vec& x, const Vec& u, double t,
                              double dt, const FdOptions& opts) {
  StageDynamics s;
  const double sdt = std::sqrt(dt);
  const Mat dm_dx = p.drift_dx
                        ? p.drift_dx(x, u, t)
                        : jacobian_wrt([&](const Vec& z) { return p.drift(z, u, t); }, x,
                                       p.state_dim, opts.fd_epsilon);
  const Mat dm_du = p.drift_du
                        ? p.drift_du(x, u, t)
                        : jacobian_wrt([&](const Vec& z) { return p.drift(x, z, t); }, u,
                                       p.state_dim, opts.fd_epsilon);
  const Mat dn_dx = p.measurement_dx
                        ? p.measurement_dx(x, u, t)
                        : jacobian_wrt([&](const Vec& z) { return p.measurement(z, u, t); }, x,
                                       p.measurement_dim, opts.fd_epsilon);
  const Mat dn_du = p.measurement_du
                        ? p.measurement_du(x, u, t)
                        : jacobian_wrt([&](const Vec& z) { return p.measurement(x, z, t); }, u,
                                       p.measurement_dim, opts.fd_epsilon);
  s.A = Mat::Identity(p.state_dim, p.state_dim) + dt * dm_dx;
  s.B = dt * dm_du;
  s.C = sdt * p.diffusion(x, u, t);
  s.F = dt * dn_dx;
  s.E = dt * dn_du;
  s.D = sdt * p.measurement_diffusion(x, u, t);
  require_finite(s.A, "A", -1, "linearization");
  require_finite(s.B, "B", -1, "linearization");
  require_finite(s.C, "C", -1, "linearization");
  require_finite(s.F, "F", -1, "linearization");
  require_finite(s.E, "E", -1, "linearization");
  require_finite(s.D, "D", -1, "linearization");
  return s;
}

StageCost quadratize_stage(const ContinuousProblem& p, const Vec& x, const Vec& u, double t,
                           double dt, const FdOptions& opts) {
  StageCost c;
  const double l0 = p.running_cost(x, u, t);
  if (!std::isfinite(l0)) throw SolverError("running cost non-finite during quadratization");
  auto fx = [&](const Vec& z) { return p.running_cost(z, u, t); };
  auto fu = [&](const Vec& z) { return p.running_cost(x, z, t); };
  auto fxu = [&](const Vec& zx, const Vec& zu) { return p.running_cost(zx, zu, t); };
  c.q0 = l0 * dt;
  c.qx = dt * gradient_wrt(fx, x, opts.fd_epsilon);
  c.ru = dt * gradient_wrt(fu, u, opts.fd_epsilon);
  Mat Q = dt * hessian_wrt(fx, x, l0, opts.fd_epsilon);
  Mat R = dt * hessian_wrt(fu, u, l0, opts.fd_epsilon);
  c.Q = 0.5 * (Q + Q.transpose());
  c.R = 0.5 * (R + R.transpose());
  c.P = dt * cross_hessian(fxu, x, u, opts.fd_epsilon);
  if (opts.project_state_hessian) c.Q = project_psd(c.Q);
  require_finite(c.Q, "Q", -1, "quadratization");
  require_finite(c.R, "R", -1, "quadratization");
  require_finite(c.P, "P", -1, "quadratization");
  if (!c.qx.allFinite() || !c.ru.allFinite() || !std::isfinite(c.q0))
    throw SolverError("quadratization produced non-finite cost gradients");
  return c;
}

StageCost quadratize_terminal(const ContinuousProblem& p, const Vec& x, const FdOptions& opts) {
  StageCost c;
  const double l0 = p.terminal_cost(x);
  if (!std::isfinite(l0)) throw SolverError("terminal cost non-finite during quadratization");
  auto f = [&](const Vec& z) { return p.terminal_cost(z); };
  c.q0 = l0;
  c.qx = gradient_wrt(f, x, opts.fd_epsilon);
  Mat Q = hessian_wrt(f, x, l0, opts.fd_epsilon);
  c.Q = 0.5 * (Q + Q.transpose());
  if (opts.project_state_hessian) c.Q = project_psd(c.Q);
  c.ru = Vec(0);
  c.P = Mat(x.size(), 0);
  c.R = Mat(0, 0);
  require_finite(c.Q, "terminal Q", -1, "quadratization");
  if (!c.qx.allFinite() || !std::isfinite(c.q0))
    throw SolverError("terminal quadratization produced non-finite values");
  return c;
}

StagePlan build_plan(const ContinuousProblem& p, const Trajectory& nominal,
                     const SolverConfig& config) {
  StagePlan plan;
  plan.nominal = nominal;
  const int N = nominal.steps();
  plan.dynamics.reserve(N);
  plan.costs.reserve(N);
  FdOptions opts{config.fd_epsilon, config.project_cost_hessians};
  for (int k = 0; k < N; ++k) {
    const Vec& x = nominal.states[k];
    const Vec& u = nominal.controls[k];
    const double t = nominal.time(k);
    try {
      plan.dynamics.push_back(linearize_stage(p, x, u, t, nominal.dt, opts));
      plan.costs.push_back(quadratize_stage(p, x, u, t, nominal.dt, opts));
    } catch (const SolverError& e) {
      throw SolverError(std::string(e.what()) + " (stage " + std::to_string(k) + ")");
    }
  }
  plan.terminal = quadratize_terminal(p, nominal.states.back(), opts);

  // Soft check: the control Hessians should be positive definite once the
  // smallest regularization is added; report, do not fail.
  for (int k = 0; k < N; ++k) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(plan.costs[k].R);
    if (eig.eigenvalues().minCoeff() + config.regularization_min <= 0.0) {
      plan.warnings.push_back("control cost Hessian at stage " + std::to_string(k) +
                              " is not positive definite at minimal regularization");
      break;
    }
  }
  return plan;
}

}  // namespace rsoc
