#include "rsoc/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsoc {

namespace {

// Snap a time in seconds onto the trajectory grid index.
int grid_index(double time, double dt, int steps) {
  int k = static_cast<int>(std::lround(time / dt));
  if (k < 0) k = 0;
  if (k > steps) k = steps;
  return k;
}

bool at_index(double t, double dt, int k) { return std::abs(t - k * dt) < 0.25 * dt; }

}  // namespace

Mat manipulator_inertia(const ManipulatorParams& p, const Vec& q) {
  double H[4];
  const double qv[2] = {q[0], q[1]};
  manipulator_inertia_t(p, qv, H);
  Mat out(2, 2);
  out << H[0], H[1], H[2], H[3];
  return out;
}

double manipulator_kinetic_energy(const ManipulatorParams& p, const Vec& q, const Vec& qd) {
  return 0.5 * qd.dot(manipulator_inertia(p, q) * qd);
}

Vec manipulator_dynamics(const ManipulatorParams& p, const Vec& x, const Vec& tau) {
  return manipulator_dynamics_forced(p, x, tau, Eigen::Vector2d::Zero());
}

Vec manipulator_dynamics_forced(const ManipulatorParams& p, const Vec& x, const Vec& tau,
                                const Eigen::Vector2d& ee_force) {
  const Vec q = x.head(2);
  const Vec qd = x.segment(2, 2);
  Vec joint_torque = tau;
  if (ee_force.squaredNorm() > 0.0)
    joint_torque += end_effector_jacobian(p, q).transpose() * ee_force;
  double qdd[2];
  const double qv[2] = {q[0], q[1]};
  const double qdv[2] = {qd[0], qd[1]};
  const double tv[2] = {joint_torque[0], joint_torque[1]};
  manipulator_accel_t(p, qv, qdv, tv, qdd);
  Vec out(4);
  out << qd[0], qd[1], qdd[0], qdd[1];
  return out;
}

Vec end_effector_position(const ManipulatorParams& p, const Vec& q) {
  double pos[2];
  const double qv[2] = {q[0], q[1]};
  end_effector_t(p, qv, pos);
  Vec out(2);
  out << pos[0], pos[1];
  return out;
}

Mat end_effector_jacobian(const ManipulatorParams& p, const Vec& q) {
  const double s1 = std::sin(q[0]);
  const double c1 = std::cos(q[0]);
  const double s12 = std::sin(q[0] + q[1]);
  const double c12 = std::cos(q[0] + q[1]);
  Mat J(2, 2);
  J << -p.l1 * s1 - p.l2 * s12, -p.l2 * s12, p.l1 * c1 + p.l2 * c12, p.l2 * c12;
  return J;
}

Vec end_effector_velocity(const ManipulatorParams& p, const Vec& q, const Vec& qd) {
  return end_effector_jacobian(p, q) * qd;
}

double wall_gap(const WallContact& w, const Eigen::Vector2d& p) {
  return w.normal.dot(p - w.point);
}

// ---------------------------------------------------------------------------
// Viapoint task

ContinuousProblem make_viapoint_problem(const ViapointTask& task) {
  if (task.x0.size() != 4) throw ConfigError("viapoint task needs a 4-dimensional x0");
  if (task.steps <= 0 || task.horizon <= 0.0)
    throw ConfigError("viapoint task needs positive steps and horizon");
  const double dt = task.horizon / task.steps;
  const ManipulatorParams arm = task.arm;

  struct ViaGrid {
    int index;
    Eigen::Vector4d target;
    double weight;
  };
  std::vector<ViaGrid> vias;
  for (const auto& v : task.viapoints)
    vias.push_back({grid_index(v.time, dt, task.steps), v.target, v.weight});

  ContinuousProblem p;
  p.state_dim = 4;
  p.control_dim = 2;
  const bool position_meas = task.measurement == "positions";
  p.measurement_dim = position_meas ? 2 : 4;
  const bool full_state_noise = task.process_noise == "full_state";
  p.process_noise_dim = full_state_noise ? 4 : 2;
  p.measurement_noise_dim = p.measurement_dim;
  p.horizon = task.horizon;

  p.drift = [arm](const Vec& x, const Vec& u, double) { return manipulator_dynamics(arm, x, u); };
  if (full_state_noise) {
    p.diffusion = [](const Vec&, const Vec&, double) { return Mat::Identity(4, 4); };
  } else {
    // Disturbances enter as accelerations.
    p.diffusion = [](const Vec&, const Vec&, double) {
      Mat M = Mat::Zero(4, 2);
      M(2, 0) = 1.0;
      M(3, 1) = 1.0;
      return M;
    };
  }
  if (position_meas) {
    p.measurement = [](const Vec& x, const Vec&, double) -> Vec { return x.head(2); };
    p.measurement_diffusion = [](const Vec&, const Vec&, double) { return Mat::Identity(2, 2); };
  } else {
    p.measurement = [](const Vec& x, const Vec&, double) { return x; };
    p.measurement_diffusion = [](const Vec&, const Vec&, double) { return Mat::Identity(4, 4); };
  }

  const double cw = task.control_weight;
  p.running_cost = [arm, vias, dt, cw](const Vec& x, const Vec& u, double t) {
    double cost = cw * u.squaredNorm();
    for (const auto& v : vias) {
      if (!at_index(t, dt, v.index)) continue;
      double ee[4], d[4];
      const double qv[2] = {x[0], x[1]};
      const double qdv[2] = {x[2], x[3]};
      end_effector_state_t(arm, qv, qdv, ee);
      for (int i = 0; i < 4; ++i) d[i] = ee[i] - v.target[i];
      // dt-normalized so the discrete contribution is grid-independent
      cost += v.weight * soft_norm(d, 4) / dt;
    }
    return cost;
  };
  const Eigen::Vector4d goal = task.goal;
  const double gw = task.goal_weight;
  const double gvw = task.goal_velocity_weight;
  p.terminal_cost = [arm, goal, gw, gvw](const Vec& x) {
    double ee[4], d[4];
    const double qv[2] = {x[0], x[1]};
    const double qdv[2] = {x[2], x[3]};
    end_effector_state_t(arm, qv, qdv, ee);
    for (int i = 0; i < 4; ++i) d[i] = ee[i] - goal[i];
    const double v[2] = {ee[2], ee[3]};
    return gw * soft_norm(d, 4) + gvw * soft_norm(v, 2);
  };
  return p;
}

// ---------------------------------------------------------------------------
// Contact task

Vec contact_initial_state(const ContactTask& task, double xp_shift) {
  if (task.x0.size() != 4) throw ConfigError("contact task needs a 4-dimensional x0");
  Vec x0(5);
  x0.head(4) = task.x0;
  x0[4] = wall_gap(task.wall, end_effector_position(task.arm, task.x0.head(2))) + xp_shift;
  return x0;
}

namespace {

// Two-link IK picking the elbow branch closest to `prev`.
Vec arm_ik(const ManipulatorParams& p, const Eigen::Vector2d& target, const Vec& prev) {
  Eigen::Vector2d goal = target;
  const double reach = p.l1 + p.l2;
  const double r = goal.norm();
  if (r > 0.999 * reach) goal *= 0.999 * reach / r;
  const double r2 = goal.squaredNorm();
  double c2 = (r2 - p.l1 * p.l1 - p.l2 * p.l2) / (2.0 * p.l1 * p.l2);
  c2 = std::clamp(c2, -1.0, 1.0);
  const double base = std::atan2(goal[1], goal[0]);
  Vec best(2);
  double best_dist = -1.0;
  for (double sign : {1.0, -1.0}) {
    const double q2 = sign * std::acos(c2);
    const double q1 = base - std::atan2(p.l2 * std::sin(q2), p.l1 + p.l2 * std::cos(q2));
    Vec q(2);
    q << q1, q2;
    const double dist = (q - prev).norm();
    if (best_dist < 0.0 || dist < best_dist) {
      best_dist = dist;
      best = q;
    }
  }
  return best;
}

// Quintic ease 10u^3 - 15u^4 + 6u^5 with value, slope and curvature.
void min_jerk(double u, double& s, double& sd, double& sdd) {
  s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
  sd = 30.0 * u * u * (1.0 - u) * (1.0 - u);
  sdd = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
}

}  // namespace

std::vector<Vec> contact_reference_controls(const ContactTask& task) {
  const double dt = task.horizon / task.steps;
  const ManipulatorParams& arm = task.arm;
  const WallContact& wall = task.wall;

  // Joint-space waypoints: start, pre-window viapoints, then a pressing
  // configuration reached exactly when the force window opens.
  struct Waypoint {
    double time;
    Vec q;
  };
  std::vector<Waypoint> plan;
  plan.push_back({0.0, task.x0.head(2)});

  std::vector<ViapointSpec> vias = task.viapoints;
  std::sort(vias.begin(), vias.end(),
            [](const ViapointSpec& a, const ViapointSpec& b) { return a.time < b.time; });
  const double t_press = std::min(task.force_window_start, task.horizon);
  for (const auto& v : vias) {
    if (v.time <= plan.back().time + 1e-9 || v.time >= t_press - 1e-9) continue;
    plan.push_back({v.time, arm_ik(arm, v.target.head(2), plan.back().q)});
  }

  const double layer = std::max(0.0, wall.smoothing);
  const double fk = task.desired_force / wall.stiffness;
  const double pen = fk >= 0.5 * layer ? fk + 0.5 * layer : std::sqrt(2.0 * layer * fk);
  if (t_press > plan.back().time + 1e-9) {
    // Press where the last waypoint meets the wall: its projection onto the
    // surface, pushed in to the depth the desired force needs.
    const Eigen::Vector2d last = end_effector_position(arm, plan.back().q);
    const Eigen::Vector2d target = last - (wall_gap(wall, last) + pen) * wall.normal;
    plan.push_back({t_press, arm_ik(arm, target, plan.back().q)});
  }

  // Hold the final waypoint through the rest of the horizon.
  std::vector<Vec> controls;
  controls.reserve(task.steps);
  std::size_t seg = 0;
  for (int k = 0; k < task.steps; ++k) {
    const double t = k * dt;
    while (seg + 1 < plan.size() && t >= plan[seg + 1].time) ++seg;
    Vec q(2), qd(2), qdd(2);
    if (seg + 1 < plan.size()) {
      const Waypoint& a = plan[seg];
      const Waypoint& b = plan[seg + 1];
      const double T = b.time - a.time;
      double s, sd, sdd;
      min_jerk(std::clamp((t - a.time) / T, 0.0, 1.0), s, sd, sdd);
      const Vec d = b.q - a.q;
      q = a.q + s * d;
      qd = (sd / T) * d;
      qdd = (sdd / (T * T)) * d;
    } else {
      q = plan.back().q;
      qd = Vec::Zero(2);
      qdd = Vec::Zero(2);
    }

    const Eigen::Vector2d pos = end_effector_position(arm, q);
    const Mat J = end_effector_jacobian(arm, q);
    const Vec pdot = J * qd;
    const double gap = wall_gap(wall, pos);
    const double gap_rate = wall.normal.dot(Eigen::Vector2d(pdot[0], pdot[1]));
    const double lambda = contact_force_magnitude(wall, gap, gap_rate);

    // Inverse dynamics: torque that realizes the planned acceleration against
    // the bias terms and the expected wall reaction.
    Vec x(4);
    x << q[0], q[1], qd[0], qd[1];
    const Vec free_acc = manipulator_dynamics(arm, x, Vec::Zero(2)).tail(2);
    const Mat M = manipulator_inertia(arm, q);
    Vec tau = M * (qdd - free_acc) - J.transpose() * (lambda * wall.normal);
    controls.push_back(tau);
  }
  return controls;
}

ContinuousProblem make_contact_problem(const ContactTask& task) {
  if (task.steps <= 0 || task.horizon <= 0.0)
    throw ConfigError("contact task needs positive steps and horizon");
  const double dt = task.horizon / task.steps;
  const ManipulatorParams arm = task.arm;
  const WallContact wall = task.wall;

  struct ViaGrid {
    int index;
    Eigen::Vector4d target;
    double weight;
  };
  std::vector<ViaGrid> vias;
  for (const auto& v : task.viapoints)
    vias.push_back({grid_index(v.time, dt, task.steps), v.target, v.weight});

  ContinuousProblem p;
  p.state_dim = 5;
  p.control_dim = 2;
  p.measurement_dim = 5;
  const bool full_state_noise = task.process_noise == "full_state";
  p.process_noise_dim = full_state_noise ? 5 : 3;
  p.measurement_noise_dim = 5;
  p.horizon = task.horizon;

  // State: (q1, q2, qd1, qd2, xp). The distance coordinate xp carries the
  // believed gap; the spring reads xp (not the kinematic gap), so state
  // uncertainty in xp directly perturbs the contact force.
  auto force_mag = [arm, wall](const Vec& x) {
    const Vec qd = x.segment(2, 2);
    const Vec pdot = end_effector_velocity(arm, x.head(2), qd);
    const double gap_rate = wall.normal.dot(Eigen::Vector2d(pdot[0], pdot[1]));
    return contact_force_magnitude(wall, x[4], gap_rate);
  };

  p.drift = [arm, wall, force_mag](const Vec& x, const Vec& u, double) {
    const double lambda = force_mag(x);
    const Eigen::Vector2d force = lambda * wall.normal;
    const Vec joint = manipulator_dynamics_forced(arm, x.head(4), u, force);
    const Vec pdot = end_effector_velocity(arm, x.head(2), x.segment(2, 2));
    Vec out(5);
    out.head(4) = joint;
    out[4] = wall.normal.dot(Eigen::Vector2d(pdot[0], pdot[1]));
    return out;
  };
  if (full_state_noise) {
    p.diffusion = [](const Vec&, const Vec&, double) { return Mat::Identity(5, 5); };
  } else {
    const double xp_scale = task.xp_process_scale;
    p.diffusion = [xp_scale](const Vec&, const Vec&, double) {
      Mat M = Mat::Zero(5, 3);
      M(2, 0) = 1.0;
      M(3, 1) = 1.0;
      M(4, 2) = xp_scale;
      return M;
    };
  }
  p.measurement = [](const Vec& x, const Vec&, double) { return x; };
  const double scale_free = task.xp_meas_scale_free;
  const double scale_contact = task.xp_meas_scale_contact;
  p.measurement_diffusion = [scale_free, scale_contact](const Vec& x, const Vec&, double) {
    Mat N = Mat::Identity(5, 5);
    N(4, 4) = x[4] < 0.0 ? scale_contact : scale_free;
    return N;
  };

  const double t0 = task.force_window_start;
  const double t1 = task.force_window_end;
  const double fdes = task.desired_force;
  const double fw = task.force_weight;
  const double gapw = task.gap_weight;
  const double agw = task.approach_gap_weight;
  const double cw = task.control_weight;
  const double kw = wall.stiffness;
  // Decelerating gap reference: starts at the initial gap and settles, with
  // zero slope, at the penetration the desired force needs just as the window
  // opens. Aiming at the surface instead leaves the nominal hovering on the
  // contact boundary, where the local models are worthless and the press never
  // gets organized.
  const double gap0 = wall_gap(wall, end_effector_position(arm, task.x0.head(2)));
  // Penetration at which the (possibly blended) spring exerts the desired
  // force; inside the boundary layer the spring is quadratic in depth.
  const double layer = std::max(0.0, wall.smoothing);
  const double pen_mag = fdes / kw >= 0.5 * layer ? fdes / kw + 0.5 * layer
                                                  : std::sqrt(2.0 * layer * fdes / kw);
  const double pen_des = -pen_mag;
  // The tolerance sets the curvature of the force tracking term, and with it
  // the feedback the law asks for around the press. Quoted in force units.
  const double pen_scale = std::max(5e-3, task.force_tolerance / kw);
  p.running_cost = [arm, vias, dt, t0, t1, fw, gapw, agw, cw, gap0, pen_des, pen_scale](
                       const Vec& x, const Vec& u, double t) {
    double cost = cw * u.squaredNorm();
    for (const auto& v : vias) {
      if (!at_index(t, dt, v.index)) continue;
      double ee[4], d[4];
      const double qv[2] = {x[0], x[1]};
      const double qdv[2] = {x[2], x[3]};
      end_effector_state_t(arm, qv, qdv, ee);
      for (int i = 0; i < 4; ++i) d[i] = ee[i] - v.target[i];
      cost += v.weight * soft_norm(d, 4) / dt;
    }
    if (t >= t0 && t <= t1) {
      // Track the penetration that makes the spring exert the desired force.
      // The optimum matches force tracking exactly (the spring model is part
      // of the dynamics), but the gradient reaches out of contact and the
      // curvature stays of order fw instead of fw*k^2.
      cost += fw * soft_abs((x[4] - pen_des) / pen_scale);
      cost += gapw * soft_abs(x[4]);
    } else if (t < t0 && agw > 0.0) {
      const double s = (t0 - t) / t0;
      cost += agw * soft_abs(x[4] - (pen_des + (gap0 - pen_des) * s * s));
    }
    return cost;
  };
  const double tvw = task.terminal_velocity_weight;
  p.terminal_cost = [arm, tvw](const Vec& x) {
    if (tvw == 0.0) return 0.0;
    const Vec vel = end_effector_velocity(arm, x.head(2), x.segment(2, 2));
    const double v[2] = {vel[0], vel[1]};
    return tvw * soft_norm(v, 2);
  };

  p.probe = [wall, force_mag, t0, t1, fdes](const Vec& x, const Vec&, double t) {
    const double lambda = force_mag(x);
    const Eigen::Vector2d f = lambda * wall.normal;
    Vec out(5);
    out << f[0], f[1], lambda, (t >= t0 && t <= t1) ? fdes : 0.0, x[4];
    return out;
  };
  p.probe_labels = {"lambda_x", "lambda_y", "lambda_norm", "lambda_des_norm", "phi"};
  return p;
}

}  // namespace rsoc
