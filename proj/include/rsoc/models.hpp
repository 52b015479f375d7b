#pragma once

#include "rsoc/types.hpp"

#include <cmath>
#include <complex>

namespace rsoc {

// Planar 2-link arm, point masses at the link ends, viscous joint damping,
// angles measured from the x axis (q2 relative to link 1), y up.
struct ManipulatorParams {
  double l1 = 0.5, l2 = 0.5;
  double m1 = 1.0, m2 = 1.0;
  double damping1 = 0.1, damping2 = 0.1;
  double gravity = 0.0;  // 0 disables gravity
};

// The kernels below are templated so tests can push complex arguments through
// them (complex-step derivatives); T is double or std::complex<double>.

template <typename T>
void manipulator_inertia_t(const ManipulatorParams& p, const T q[2], T H[4]) {
  const T c2 = cos(q[1]);
  H[0] = p.m1 * p.l1 * p.l1 + p.m2 * (p.l1 * p.l1 + p.l2 * p.l2 + 2.0 * p.l1 * p.l2 * c2);
  H[1] = p.m2 * (p.l2 * p.l2 + p.l1 * p.l2 * c2);
  H[2] = H[1];
  H[3] = p.m2 * p.l2 * p.l2;
}

// Coriolis/centrifugal + gravity + viscous damping, on the left-hand side of
// H qdd + bias = tau.
template <typename T>
void manipulator_bias_t(const ManipulatorParams& p, const T q[2], const T qd[2], T bias[2]) {
  const T s2 = sin(q[1]);
  const T h = p.m2 * p.l1 * p.l2 * s2;
  bias[0] = -h * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]) + p.damping1 * qd[0];
  bias[1] = h * qd[0] * qd[0] + p.damping2 * qd[1];
  if (p.gravity != 0.0) {
    const T c1 = cos(q[0]);
    const T c12 = cos(q[0] + q[1]);
    bias[0] += p.gravity * ((p.m1 + p.m2) * p.l1 * c1 + p.m2 * p.l2 * c12);
    bias[1] += p.gravity * p.m2 * p.l2 * c12;
  }
}

template <typename T>
void manipulator_accel_t(const ManipulatorParams& p, const T q[2], const T qd[2], const T tau[2],
                         T qdd[2]) {
  T H[4], bias[2];
  manipulator_inertia_t(p, q, H);
  manipulator_bias_t(p, q, qd, bias);
  const T rhs0 = tau[0] - bias[0];
  const T rhs1 = tau[1] - bias[1];
  const T det = H[0] * H[3] - H[1] * H[2];
  qdd[0] = (H[3] * rhs0 - H[1] * rhs1) / det;
  qdd[1] = (H[0] * rhs1 - H[2] * rhs0) / det;
}

template <typename T>
void end_effector_t(const ManipulatorParams& p, const T q[2], T pos[2]) {
  pos[0] = p.l1 * cos(q[0]) + p.l2 * cos(q[0] + q[1]);
  pos[1] = p.l1 * sin(q[0]) + p.l2 * sin(q[0] + q[1]);
}

// End-effector position and velocity stacked as (px, py, vx, vy).
template <typename T>
void end_effector_state_t(const ManipulatorParams& p, const T q[2], const T qd[2], T out[4]) {
  end_effector_t(p, q, out);
  const T s1 = sin(q[0]);
  const T c1 = cos(q[0]);
  const T s12 = sin(q[0] + q[1]);
  const T c12 = cos(q[0] + q[1]);
  out[2] = -p.l1 * s1 * qd[0] - p.l2 * s12 * (qd[0] + qd[1]);
  out[3] = p.l1 * c1 * qd[0] + p.l2 * c12 * (qd[0] + qd[1]);
}

// log cosh, overflow-safe; behaves like z^2/2 near zero and |z| - log 2 for
// large |z|.
template <typename T>
T soft_abs(T z) {
  using std::exp;
  using std::log;
  if (std::real(std::complex<double>(z)) >= 0.0) {
    return z + log(1.0 + exp(-2.0 * z)) - std::log(2.0);
  }
  return -z + log(1.0 + exp(2.0 * z)) - std::log(2.0);
}

// Smooth magnitude penalty: log cosh of the euclidean norm, written as an
// analytic function of the squared norm so it stays smooth at zero.
template <typename T>
T soft_norm(const T* z, int dim) {
  using std::sqrt;
  T s = T(0);
  for (int i = 0; i < dim; ++i) s += z[i] * z[i];
  if (std::abs(std::complex<double>(s)) < 1e-30) return 0.5 * s;  // series limit
  return soft_abs(sqrt(s));
}

Mat manipulator_inertia(const ManipulatorParams& p, const Vec& q);
double manipulator_kinetic_energy(const ManipulatorParams& p, const Vec& q, const Vec& qd);

// State x = (q1, q2, qd1, qd2); returns xdot under joint torques tau and an
// optional end-effector force (world frame).
Vec manipulator_dynamics(const ManipulatorParams& p, const Vec& x, const Vec& tau);
Vec manipulator_dynamics_forced(const ManipulatorParams& p, const Vec& x, const Vec& tau,
                                const Eigen::Vector2d& ee_force);

Vec end_effector_position(const ManipulatorParams& p, const Vec& q);
Mat end_effector_jacobian(const ManipulatorParams& p, const Vec& q);
Vec end_effector_velocity(const ManipulatorParams& p, const Vec& q, const Vec& qd);

// One-sided stiff wall. `normal` is the unit normal pointing from the wall
// surface into free space; gap(p) = normal . (p - point) is positive in free
// space and negative under penetration. `smoothing` is an optional boundary
// layer (meters): zero keeps the ideal piecewise spring, a positive value
// blends stiffness and damping in over that depth so the force is C1 at the
// surface. Gradient-based solvers need the blend; the kinked force gives them
// sign-wrong local models whenever an integration step straddles the surface.
struct WallContact {
  Eigen::Vector2d point{0.6, 0.0};
  Eigen::Vector2d normal{-1.0, 0.0};
  double stiffness = 1e4;
  double damping = 10.0;
  double smoothing = 0.0;
};

double wall_gap(const WallContact& w, const Eigen::Vector2d& p);

// Spring-damper magnitude along the normal. Active only under penetration;
// damping resists approach speed and the total is clamped so the wall never
// pulls. Inside the boundary layer the spring follows the quadratic blend
// k z^2 / (2 d) (so deeper than the layer it is k (z - d/2)) and the damping
// ramps in with a smoothstep. Branches on the real part so complex-step goes
// through the smooth pieces.
template <typename T>
T contact_force_magnitude(const WallContact& w, T gap, T gap_rate) {
  if (std::real(std::complex<double>(gap)) >= 0.0) return T(0);
  const double d = w.smoothing;
  T f;
  if (d <= 0.0) {
    f = -w.stiffness * gap - w.damping * gap_rate;
  } else {
    const T z = -gap;
    T spring, gate;
    if (std::real(std::complex<double>(gap)) > -d) {
      spring = w.stiffness * z * z / (2.0 * d);
      const T frac = z / d;
      gate = frac * frac * (3.0 - 2.0 * frac);
    } else {
      spring = w.stiffness * (z - 0.5 * d);
      gate = T(1);
    }
    f = spring - w.damping * gate * gap_rate;
  }
  if (std::real(std::complex<double>(f)) <= 0.0) return T(0);
  return f;
}

// ---------------------------------------------------------------------------
// Task definitions

// A viapoint pins the end-effector position and velocity (px, py, vx, vy) at
// one time instant.
struct ViapointSpec {
  double time = 0.0;  // seconds; snapped to the time grid
  Eigen::Vector4d target{0.0, 0.0, 0.0, 0.0};
  double weight = 0.0;
};

// Reaching task with intermediate end-effector viapoints. Viapoint terms act
// at a single time step with dt-normalized magnitude; the terminal cost pins
// the end-effector position/velocity pair.
struct ViapointTask {
  ManipulatorParams arm;
  double horizon = 2.0;
  int steps = 200;
  Vec x0;  // 4
  std::vector<ViapointSpec> viapoints;
  Eigen::Vector4d goal{0.0, 0.0, 0.0, 0.0};  // position and velocity
  double goal_weight = 0.0;
  double goal_velocity_weight = 0.0;  // extra damping on the velocity alone
  double control_weight = 0.0;
  std::string process_noise = "full_state";  // or "accelerations"
  std::string measurement = "full_state";    // or "positions"
};

// Force task against a one-sided wall. State is augmented with the normal
// distance coordinate xp (xp(0) = gap at the initial pose, xp_dot =
// normal . ee velocity); the contact spring and the cost both read xp, so
// uncertainty in xp is load-bearing for the optimizer.
struct ContactTask {
  ManipulatorParams arm;
  WallContact wall;
  double horizon = 3.0;
  int steps = 300;
  Vec x0;  // 4, joint state; xp is appended internally
  std::vector<ViapointSpec> viapoints;
  double force_window_start = 1.8;
  double force_window_end = 2.8;
  double desired_force = 15.0;  // magnitude along the wall normal
  double force_weight = 0.0;
  // Force error that counts as cheap in the tracking term; smaller values
  // sharpen the press and drive up the feedback gains around it.
  double force_tolerance = 15.0;
  double gap_weight = 0.0;
  // Pull toward the surface before the window opens, so the optimizer learns
  // to arrive on time instead of creeping in mid-window.
  double approach_gap_weight = 0.0;
  double control_weight = 0.0;
  double terminal_velocity_weight = 0.0;
  std::string process_noise = "accelerations";
  // Drift rate of the distance coordinate (m per sqrt s, before the process
  // noise level multiplies it). Models surface-location uncertainty: with it
  // the filter can only pin xp as well as the xp sensor allows, so measurement
  // quality starts to matter exactly around contact.
  double xp_process_scale = 0.05;
  // Measurement diffusion scale of the xp channel in free space / in contact;
  // 1,1 keeps it state-independent.
  double xp_meas_scale_free = 1.0;
  double xp_meas_scale_contact = 1.0;
};

ContinuousProblem make_viapoint_problem(const ViapointTask& task);

// xp_shift moves the initial distance coordinate (a closer true wall has
// negative shift); dynamics and cost are unchanged.
ContinuousProblem make_contact_problem(const ContactTask& task);
Vec contact_initial_state(const ContactTask& task, double xp_shift = 0.0);

// Feedforward torque sequence tracking a minimum-jerk joint path through the
// pre-window viapoints into a pressing configuration, with the expected wall
// reaction compensated. Used as the default initial guess for contact solves:
// a cold start wanders into wall impacts whose local models derail the
// optimizer long before it finds the press.
std::vector<Vec> contact_reference_controls(const ContactTask& task);

}  // namespace rsoc
