#include "rsoc/selftest.hpp"

#include "rsoc/backward_pass.hpp"
#include "rsoc/estimation.hpp"
#include "rsoc/evaluation.hpp"
#include "rsoc/models.hpp"
#include "rsoc/problem.hpp"
#include "rsoc/rng.hpp"
#include "rsoc/solver.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace rsoc {

namespace {

Mat random_matrix(RandomStream& rng, int rows, int cols, double scale) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.next_normal();
  return m;
}

Mat random_spd(RandomStream& rng, int n, double scale) {
  Mat m = random_matrix(rng, n, n, scale);
  return m * m.transpose() + 1e-3 * Mat::Identity(n, n);
}

// Small linear-Gaussian stage plan with dense couplings, built directly so no
// differentiation enters the comparison.
StagePlan make_linear_plan(RandomStream& rng, int n, int m, int steps) {
  StagePlan plan;
  std::vector<Vec> xs(steps + 1, Vec::Zero(n)), us(steps, Vec::Zero(m));
  plan.nominal = Trajectory(0.01, xs, us);
  for (int k = 0; k < steps; ++k) {
    StageDynamics d;
    d.A = Mat::Identity(n, n) + random_matrix(rng, n, n, 0.05);
    d.B = random_matrix(rng, n, m, 0.1);
    d.C = random_matrix(rng, n, n, 0.05);
    d.F = random_matrix(rng, n, n, 0.1) + Mat::Identity(n, n);
    d.E = random_matrix(rng, n, m, 0.02);
    d.D = random_matrix(rng, n, n, 0.05) + Mat::Identity(n, n);
    plan.dynamics.push_back(d);

    StageCost c;
    c.Q = random_spd(rng, n, 0.3);
    c.R = random_spd(rng, m, 0.3) + Mat::Identity(m, m);
    c.P = random_matrix(rng, n, m, 0.05);
    c.qx = random_matrix(rng, n, 1, 0.2).col(0);
    c.ru = random_matrix(rng, m, 1, 0.2).col(0);
    c.q0 = rng.next_normal();
    plan.costs.push_back(c);
  }
  plan.terminal.Q = random_spd(rng, n, 0.5);
  plan.terminal.qx = random_matrix(rng, n, 1, 0.3).col(0);
  plan.terminal.q0 = rng.next_normal();
  plan.terminal.ru = Vec(0);
  plan.terminal.P = Mat(n, 0);
  plan.terminal.R = Mat(0, 0);
  return plan;
}

// Textbook discrete recursion for the risk-neutral gains; the filter plays no
// role at sigma = 0, which is exactly what this cross-checks.
void riccati_gains(const StagePlan& plan, std::vector<Vec>& ffs, std::vector<Mat>& fbs) {
  const int steps = plan.nominal.steps();
  Mat S = plan.terminal.Q;
  Vec s = plan.terminal.qx;
  ffs.assign(steps, Vec());
  fbs.assign(steps, Mat());
  for (int k = steps - 1; k >= 0; --k) {
    const auto& d = plan.dynamics[k];
    const auto& c = plan.costs[k];
    Mat H = c.R + d.B.transpose() * S * d.B;
    Mat G = c.P.transpose() + d.B.transpose() * S * d.A;
    Vec g = c.ru + d.B.transpose() * s;
    Eigen::LLT<Mat> llt(H);
    Vec l = -llt.solve(g);
    Mat L = -llt.solve(G);
    ffs[k] = l;
    fbs[k] = L;
    Mat Snew = c.Q + d.A.transpose() * S * d.A + G.transpose() * L;
    Vec snew = c.qx + d.A.transpose() * s + G.transpose() * l + L.transpose() * (H * l + g);
    S = 0.5 * (Snew + Snew.transpose());
    s = snew;
  }
}

struct Reporter {
  std::ostream& out;
  int failures = 0;
  void check(bool ok, const std::string& name, const std::string& detail = "") {
    if (ok) {
      out << "ok - " << name << "\n";
    } else {
      ++failures;
      out << "FAIL - " << name;
      if (!detail.empty()) out << " (" << detail << ")";
      out << "\n";
    }
  }
};

std::string num_detail(const char* label, double v) {
  std::ostringstream ss;
  ss << label << " = " << v;
  return ss.str();
}

}  // namespace

int selftest(std::ostream& out) {
  Reporter rep{out};

  // Deterministic counter-based streams
  {
    RandomStream a = RandomStream::at(42, 3, 1);
    RandomStream b = RandomStream::at(42, 3, 1);
    bool same = true;
    for (int i = 0; i < 100; ++i) same = same && a.next_normal() == b.next_normal();
    RandomStream c = RandomStream::at(42, 3, 2);
    rep.check(same && c.next_u64() != RandomStream::at(42, 3, 1).next_u64(),
              "rng streams reproducible and channel-separated");
  }

  // Arm conserves energy without damping, gravity or torque
  {
    ManipulatorParams p;
    p.damping1 = p.damping2 = 0.0;
    ContinuousProblem prob;
    prob.state_dim = 4;
    prob.control_dim = 2;
    prob.drift = [&p](const Vec& x, const Vec& u, double) {
      return manipulator_dynamics(p, x, u);
    };
    Vec x(4);
    x << 0.3, -0.8, 1.0, -0.5;
    const double e0 = manipulator_kinetic_energy(p, x.head(2), x.tail(2));
    const Vec u = Vec::Zero(2);
    const double dt = 1e-3;
    for (int k = 0; k < 1000; ++k) x = rk4_step(prob, x, u, k * dt, dt);
    const double e1 = manipulator_kinetic_energy(p, x.head(2), x.tail(2));
    const double drift = std::abs(e1 - e0) / std::max(1.0, std::abs(e0));
    rep.check(drift <= 1e-6, "arm kinetic energy conserved over 1 s",
              num_detail("relative drift", drift));
  }

  // Smooth magnitude penalty anchors
  {
    const double big = soft_abs(10.0);
    const double small = soft_abs(0.5);
    rep.check(std::abs(big - 9.3068528215012083) < 1e-12 &&
                  std::abs(small - 0.12011450695827751) < 1e-12 && soft_abs(0.0) == 0.0 &&
                  std::abs(soft_abs(-10.0) - big) < 1e-15,
              "log-cosh penalty values and symmetry");
  }

  // Wall spring: pushes only, never pulls
  {
    WallContact w;
    const double f = contact_force_magnitude(w, -0.001, 0.0);
    const bool free_zone = contact_force_magnitude(w, 0.001, -5.0) == 0.0;
    const bool no_pull = contact_force_magnitude(w, -0.001, 10.0) == 0.0;
    rep.check(std::abs(f - 10.0) < 1e-12 && free_zone && no_pull,
              "contact spring magnitude, one-sidedness and pull clamp",
              num_detail("force at 1 mm", f));
  }

  // Risk-neutral recursion reduces to the textbook one for any filter gains
  {
    RandomStream rng = RandomStream::at(7, 0, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 2 + static_cast<int>(rng.next_below(3));
      const int m = 1 + static_cast<int>(rng.next_below(2));
      StagePlan plan = make_linear_plan(rng, n, m, 15);
      NoiseModel noise{random_spd(rng, n, 0.4), random_spd(rng, n, 0.4)};
      EstimatorPass est = ekf_forward(plan, noise, random_spd(rng, n, 0.3));
      BackwardPassResult bp = backward_recursion(plan, est, noise, 0.0, 0.0);
      std::vector<Vec> ffs;
      std::vector<Mat> fbs;
      riccati_gains(plan, ffs, fbs);
      for (int k = 0; k < plan.nominal.steps(); ++k) {
        worst = std::max(worst, (bp.law.feedback[k] - fbs[k]).cwiseAbs().maxCoeff());
        worst = std::max(worst, (bp.law.feedforward[k] - ffs[k]).cwiseAbs().maxCoeff());
      }
    }
    rep.check(worst < 1e-8, "risk-neutral gains match an independent recursion",
              num_detail("max abs deviation", worst));
  }

  // Filter gain minimizes the one-step-ahead error covariance trace
  {
    RandomStream rng = RandomStream::at(11, 0, 0);
    double worst = 0.0;
    StagePlan plan = make_linear_plan(rng, 3, 2, 10);
    NoiseModel noise{random_spd(rng, 3, 0.4), random_spd(rng, 3, 0.4)};
    EstimatorPass est = ekf_forward(plan, noise, random_spd(rng, 3, 0.3));
    for (int k = 0; k < 10; ++k)
      for (int trial = 0; trial < 20; ++trial) {
        Mat dK = random_matrix(rng, 3, 3, 0.05);
        worst = std::min(worst, ekf_gain_optimality_check(plan, noise, est, k, dK));
      }
    rep.check(worst >= -1e-10, "filter gain perturbations never improve the covariance",
              num_detail("most negative trace change", worst));
  }

  // Monte Carlo risk estimator limits
  {
    std::vector<double> flat(50, 3.25);
    RiskEstimate r1 = estimate_risk(flat, 1.7);
    std::vector<double> two{1.0, 2.0};
    RiskEstimate r2 = estimate_risk(two, 0.0);
    rep.check(std::abs(r1.mc_risk - 3.25) < 1e-12 && std::abs(r2.mc_risk - 1.5) < 1e-12,
              "risk estimator degenerate and risk-neutral limits");
  }

  // Zero noise closes the loop on the deterministic rollout bit for bit
  {
    ViapointTask task;
    task.steps = 40;
    task.horizon = 0.4;
    task.x0 = Vec::Zero(4);
    task.x0[0] = 0.4;
    task.x0[1] = 1.2;
    task.goal = Eigen::Vector4d(0.55, 0.45, 0.0, 0.0);
    task.goal_weight = 100.0;
    task.goal_velocity_weight = 1.0;
    task.control_weight = 1e-3;
    ContinuousProblem prob = make_viapoint_problem(task);
    NoiseModel zero{Mat::Zero(4, 4), Mat::Zero(4, 4)};
    SolverConfig cfg;
    cfg.max_iterations = 25;
    SolveResult res = solve(prob, zero, task.x0, std::vector<Vec>(40, Vec::Zero(2)), cfg);
    bool monotone = true;
    for (size_t i = 1; i < res.cost_history.size(); ++i)
      monotone = monotone && res.cost_history[i] <= res.cost_history[i - 1] + 1e-12;
    rep.check(monotone, "solver cost history is non-increasing");
    rep.check(res.cost_history.back() < res.cost_history.front(),
              "reaching task cost improves over the initial rollout");

    // Zero law, zero noise: the simulated loop must match a hand-stepped
    // explicit Euler rollout bit for bit.
    const double dt = res.nominal.dt;
    std::vector<Vec> euler_states{task.x0};
    for (int k = 0; k < 40; ++k)
      euler_states.push_back(euler_states.back() +
                             dt * prob.drift(euler_states.back(), Vec::Zero(2), k * dt));
    Trajectory open_loop(dt, euler_states, std::vector<Vec>(40, Vec::Zero(2)));
    StagePlan plan = build_plan(prob, open_loop, cfg);
    EstimatorPass est = ekf_forward(plan, zero, 1e-2 * Mat::Identity(4, 4));
    ControlLaw zero_law;
    zero_law.feedforward.assign(40, Vec::Zero(2));
    zero_law.feedback.assign(40, Mat::Zero(2, 4));
    RolloutRecord rec = stochastic_rollout(prob, zero, plan, est, zero_law, task.x0, 5);
    bool identical = true;
    for (int k = 0; k <= 40; ++k)
      identical = identical && rec.realized.states[k] == euler_states[k];
    rep.check(identical, "zero-noise closed loop matches explicit Euler bit for bit");
  }

  out << (rep.failures == 0 ? "selftest: all checks passed\n"
                            : "selftest: " + std::to_string(rep.failures) + " check(s) failed\n");
  return rep.failures;
}

}  // namespace rsoc
