#include "rsoc/config.hpp"

#include <fstream>
#include <sstream>

namespace rsoc {

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError("config: " + what); }

double num(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path + " must be a number");
  return j.get<double>();
}

double num_or(const Json& obj, const std::string& key, double fallback,
              const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return num(obj.at(key), path + "." + key);
}

int int_or(const Json& obj, const std::string& key, int fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const Json& j = obj.at(key);
  if (!j.is_number_integer()) fail(path + "." + key + " must be an integer");
  return j.get<int>();
}

Vec vec_of(const Json& j, const std::string& path, int expect = -1) {
  if (!j.is_array()) fail(path + " must be an array of numbers");
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = num(j[i], path);
  if (expect >= 0 && v.size() != expect)
    fail(path + " must have length " + std::to_string(expect));
  return v;
}

Mat mat_of(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path + " must be a non-empty array of rows");
  const size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) fail(path + " rows must be non-empty arrays");
  Mat m(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(path + " rows must have equal length");
    for (size_t c = 0; c < cols; ++c) m(static_cast<int>(r), static_cast<int>(c)) =
        num(j[r][c], path);
  }
  return m;
}

// scale*I, diag, or a full matrix
Mat covariance_of(const Json& j, int dim, const std::string& path) {
  if (j.is_number()) return j.get<double>() * Mat::Identity(dim, dim);
  if (j.is_object()) {
    if (j.contains("scale")) return num(j.at("scale"), path + ".scale") * Mat::Identity(dim, dim);
    if (j.contains("diag")) {
      Vec d = vec_of(j.at("diag"), path + ".diag", dim);
      return d.asDiagonal();
    }
    if (j.contains("matrix")) {
      Mat m = mat_of(j.at("matrix"), path + ".matrix");
      if (m.rows() != dim || m.cols() != dim)
        fail(path + ".matrix must be " + std::to_string(dim) + "x" + std::to_string(dim));
      return m;
    }
  }
  fail(path + " must be a number, {scale}, {diag} or {matrix}");
}

Json covariance_json(const Mat& m) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return Json{{"matrix", rows}};
}

ManipulatorParams arm_of(const Json& j, const std::string& path) {
  ManipulatorParams p;
  if (!j.is_object()) fail(path + " must be an object");
  p.l1 = num_or(j, "l1", p.l1, path);
  p.l2 = num_or(j, "l2", p.l2, path);
  p.m1 = num_or(j, "m1", p.m1, path);
  p.m2 = num_or(j, "m2", p.m2, path);
  p.gravity = num_or(j, "gravity", p.gravity, path);
  if (j.contains("damping")) {
    const Json& d = j.at("damping");
    if (d.is_number()) {
      p.damping1 = p.damping2 = d.get<double>();
    } else {
      Vec v = vec_of(d, path + ".damping", 2);
      p.damping1 = v[0];
      p.damping2 = v[1];
    }
  }
  return p;
}

Json arm_json(const ManipulatorParams& p) {
  return Json{{"l1", p.l1},      {"l2", p.l2},
              {"m1", p.m1},      {"m2", p.m2},
              {"gravity", p.gravity}, {"damping", Json::array({p.damping1, p.damping2})}};
}

std::vector<ViapointSpec> vias_of(const Json& j, const std::string& path) {
  std::vector<ViapointSpec> out;
  if (!j.is_array()) fail(path + " must be an array");
  for (size_t i = 0; i < j.size(); ++i) {
    const Json& v = j[i];
    const std::string p = path + "[" + std::to_string(i) + "]";
    ViapointSpec spec;
    if (!v.is_object() || !v.contains("time") || !v.contains("target") || !v.contains("weight"))
      fail(p + " needs time, target and weight");
    spec.time = num(v.at("time"), p + ".time");
    // Position-only targets get zero desired velocity.
    Vec t = vec_of(v.at("target"), p + ".target");
    if (t.size() == 2) {
      spec.target = Eigen::Vector4d(t[0], t[1], 0.0, 0.0);
    } else if (t.size() == 4) {
      spec.target = Eigen::Vector4d(t[0], t[1], t[2], t[3]);
    } else {
      fail(p + ".target must have length 2 or 4");
    }
    spec.weight = num(v.at("weight"), p + ".weight");
    out.push_back(spec);
  }
  return out;
}

Json vias_json(const std::vector<ViapointSpec>& vias) {
  Json out = Json::array();
  for (const auto& v : vias)
    out.push_back(
        Json{{"time", v.time},
             {"target", Json::array({v.target[0], v.target[1], v.target[2], v.target[3]})},
             {"weight", v.weight}});
  return out;
}

SolverConfig solver_of(const Json& j) {
  SolverConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) fail("solver must be an object");
  c.sigma = num_or(j, "sigma", c.sigma, "solver");
  if (j.contains("sigma_stages")) {
    Vec s = vec_of(j.at("sigma_stages"), "solver.sigma_stages");
    c.sigma_stages.assign(s.data(), s.data() + s.size());
  }
  c.max_iterations = int_or(j, "max_iterations", c.max_iterations, "solver");
  c.cost_tolerance = num_or(j, "cost_tolerance", c.cost_tolerance, "solver");
  if (j.contains("regularization")) {
    const Json& r = j.at("regularization");
    c.regularization_init = num_or(r, "init", c.regularization_init, "solver.regularization");
    c.regularization_min = num_or(r, "min", c.regularization_min, "solver.regularization");
    c.regularization_max = num_or(r, "max", c.regularization_max, "solver.regularization");
    c.regularization_factor =
        num_or(r, "factor", c.regularization_factor, "solver.regularization");
  }
  if (j.contains("line_search_alphas")) {
    Vec a = vec_of(j.at("line_search_alphas"), "solver.line_search_alphas");
    c.line_search_alphas.assign(a.data(), a.data() + a.size());
  }
  if (j.contains("initial_error_cov")) {
    const Json& s = j.at("initial_error_cov");
    if (s.is_number()) {
      // scale; materialized once the state dimension is known
      c.initial_error_cov = Mat();
    } else {
      c.initial_error_cov = mat_of(s, "solver.initial_error_cov");
    }
  }
  if (j.contains("rng_seed")) {
    const Json& s = j.at("rng_seed");
    if (!s.is_number_unsigned() && !s.is_number_integer()) fail("solver.rng_seed must be integral");
    c.rng_seed = s.get<std::uint64_t>();
  }
  c.fd_epsilon = num_or(j, "fd_epsilon", c.fd_epsilon, "solver");
  if (j.contains("project_cost_hessians")) {
    const Json& b = j.at("project_cost_hessians");
    if (!b.is_boolean()) fail("solver.project_cost_hessians must be a boolean");
    c.project_cost_hessians = b.get<bool>();
  }
  return c;
}

Json solver_json(const SolverConfig& c) {
  Json alphas = Json::array();
  for (double a : (c.line_search_alphas.empty() ? default_alphas() : c.line_search_alphas))
    alphas.push_back(a);
  Json stages = Json::array();
  for (double s : c.sigma_stages) stages.push_back(s);
  Json j{{"sigma", c.sigma},
         {"sigma_stages", stages},
         {"max_iterations", c.max_iterations},
         {"cost_tolerance", c.cost_tolerance},
         {"regularization",
          Json{{"init", c.regularization_init},
               {"min", c.regularization_min},
               {"max", c.regularization_max},
               {"factor", c.regularization_factor}}},
         {"line_search_alphas", alphas},
         {"rng_seed", c.rng_seed},
         {"fd_epsilon", c.fd_epsilon},
         {"project_cost_hessians", c.project_cost_hessians}};
  return j;
}

}  // namespace

Json parse_json_text(const std::string& text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("not valid JSON");
  return j;
}

Setup load_setup(const Json& config) {
  if (!config.is_object()) fail("top level must be an object");
  if (!config.contains("problem")) fail("missing problem section");
  const Json& prob = config.at("problem");
  if (!prob.is_object() || !prob.contains("model")) fail("problem.model is required");
  const std::string model = prob.at("model").get<std::string>();

  Setup setup;
  setup.model = model;
  setup.solver = solver_of(config.contains("solver") ? config.at("solver") : Json());

  if (model == "viapoint") {
    ViapointTask task;
    task.arm = arm_of(prob.contains("arm") ? prob.at("arm") : Json::object(), "problem.arm");
    task.horizon = num_or(prob, "horizon", task.horizon, "problem");
    task.steps = int_or(prob, "steps", task.steps, "problem");
    if (!prob.contains("x0")) fail("problem.x0 is required");
    task.x0 = vec_of(prob.at("x0"), "problem.x0", 4);
    if (prob.contains("viapoints")) task.viapoints = vias_of(prob.at("viapoints"),
                                                             "problem.viapoints");
    if (prob.contains("goal")) {
      Vec g = vec_of(prob.at("goal"), "problem.goal");
      if (g.size() == 2) {
        task.goal = Eigen::Vector4d(g[0], g[1], 0.0, 0.0);
      } else if (g.size() == 4) {
        task.goal = Eigen::Vector4d(g[0], g[1], g[2], g[3]);
      } else {
        fail("problem.goal must have length 2 or 4");
      }
    }
    task.goal_weight = num_or(prob, "goal_weight", task.goal_weight, "problem");
    task.goal_velocity_weight =
        num_or(prob, "goal_velocity_weight", task.goal_velocity_weight, "problem");
    task.control_weight = num_or(prob, "control_weight", task.control_weight, "problem");
    if (prob.contains("process_noise"))
      task.process_noise = prob.at("process_noise").get<std::string>();
    if (prob.contains("measurement"))
      task.measurement = prob.at("measurement").get<std::string>();
    if (task.measurement != "full_state" && task.measurement != "positions")
      fail("problem.measurement must be \"full_state\" or \"positions\"");
    setup.problem = make_viapoint_problem(task);
    setup.x0 = task.x0;
    setup.steps = task.steps;
    setup.dt = task.horizon / task.steps;
    setup.viapoint = task;
  } else if (model == "contact") {
    ContactTask task;
    task.arm = arm_of(prob.contains("arm") ? prob.at("arm") : Json::object(), "problem.arm");
    task.horizon = num_or(prob, "horizon", task.horizon, "problem");
    task.steps = int_or(prob, "steps", task.steps, "problem");
    if (!prob.contains("x0")) fail("problem.x0 is required");
    task.x0 = vec_of(prob.at("x0"), "problem.x0", 4);
    if (prob.contains("wall")) {
      const Json& w = prob.at("wall");
      if (w.contains("point")) {
        Vec pt = vec_of(w.at("point"), "problem.wall.point", 2);
        task.wall.point = Eigen::Vector2d(pt[0], pt[1]);
      }
      if (w.contains("normal")) {
        Vec nm = vec_of(w.at("normal"), "problem.wall.normal", 2);
        task.wall.normal = Eigen::Vector2d(nm[0], nm[1]).normalized();
      }
      task.wall.stiffness = num_or(w, "stiffness", task.wall.stiffness, "problem.wall");
      task.wall.damping = num_or(w, "damping", task.wall.damping, "problem.wall");
      task.wall.smoothing = num_or(w, "smoothing", task.wall.smoothing, "problem.wall");
    }
    if (prob.contains("viapoints")) task.viapoints = vias_of(prob.at("viapoints"),
                                                             "problem.viapoints");
    if (prob.contains("force_window")) {
      Vec w = vec_of(prob.at("force_window"), "problem.force_window", 2);
      task.force_window_start = w[0];
      task.force_window_end = w[1];
    }
    task.desired_force = num_or(prob, "desired_force", task.desired_force, "problem");
    task.force_weight = num_or(prob, "force_weight", task.force_weight, "problem");
    task.force_tolerance = num_or(prob, "force_tolerance", task.force_tolerance, "problem");
    task.gap_weight = num_or(prob, "gap_weight", task.gap_weight, "problem");
    task.approach_gap_weight =
        num_or(prob, "approach_gap_weight", task.approach_gap_weight, "problem");
    task.control_weight = num_or(prob, "control_weight", task.control_weight, "problem");
    task.terminal_velocity_weight =
        num_or(prob, "terminal_velocity_weight", task.terminal_velocity_weight, "problem");
    if (prob.contains("process_noise"))
      task.process_noise = prob.at("process_noise").get<std::string>();
    task.xp_process_scale =
        num_or(prob, "xp_process_scale", task.xp_process_scale, "problem");
    task.xp_meas_scale_free =
        num_or(prob, "xp_meas_scale_free", task.xp_meas_scale_free, "problem");
    task.xp_meas_scale_contact =
        num_or(prob, "xp_meas_scale_contact", task.xp_meas_scale_contact, "problem");
    setup.problem = make_contact_problem(task);
    // A nonzero shift starts the distance coordinate off the believed gap,
    // which is how a misjudged wall position enters a rollout world.
    setup.xp_shift = num_or(prob, "xp_shift", 0.0, "problem");
    setup.x0 = contact_initial_state(task, setup.xp_shift);
    setup.steps = task.steps;
    setup.dt = task.horizon / task.steps;
    setup.contact = task;
  } else {
    fail("unknown problem.model '" + model + "'");
  }

  if (!config.contains("noise")) fail("missing noise section");
  const Json& noise = config.at("noise");
  if (!noise.is_object() || !noise.contains("process") || !noise.contains("measurement"))
    fail("noise needs process and measurement entries");
  setup.noise.process_cov =
      covariance_of(noise.at("process"), setup.problem.process_noise_dim, "noise.process");
  setup.noise.measurement_cov = covariance_of(noise.at("measurement"),
                                              setup.problem.measurement_noise_dim,
                                              "noise.measurement");

  // initial_error_cov given as a plain scale needs the state dimension
  if (config.contains("solver") && config.at("solver").contains("initial_error_cov")) {
    const Json& s = config.at("solver").at("initial_error_cov");
    if (s.is_number())
      setup.solver.initial_error_cov =
          s.get<double>() * Mat::Identity(setup.problem.state_dim, setup.problem.state_dim);
  }

  // Resolved copy with defaults materialized
  Json resolved = config;
  resolved["solver"] = solver_json(setup.solver);
  if (setup.solver.initial_error_cov.size() > 0)
    resolved["solver"]["initial_error_cov"] = covariance_json(setup.solver.initial_error_cov);
  resolved["noise"] = Json{{"process", covariance_json(setup.noise.process_cov)},
                           {"measurement", covariance_json(setup.noise.measurement_cov)}};
  if (setup.viapoint) {
    const auto& t = *setup.viapoint;
    resolved["problem"] =
        Json{{"model", "viapoint"},
             {"arm", arm_json(t.arm)},
             {"horizon", t.horizon},
             {"steps", t.steps},
             {"x0", Json::array({t.x0[0], t.x0[1], t.x0[2], t.x0[3]})},
             {"viapoints", vias_json(t.viapoints)},
             {"goal", Json::array({t.goal[0], t.goal[1], t.goal[2], t.goal[3]})},
             {"goal_weight", t.goal_weight},
             {"goal_velocity_weight", t.goal_velocity_weight},
             {"control_weight", t.control_weight},
             {"process_noise", t.process_noise},
             {"measurement", t.measurement}};
  } else if (setup.contact) {
    const auto& t = *setup.contact;
    resolved["problem"] =
        Json{{"model", "contact"},
             {"arm", arm_json(t.arm)},
             {"horizon", t.horizon},
             {"steps", t.steps},
             {"x0", Json::array({t.x0[0], t.x0[1], t.x0[2], t.x0[3]})},
             {"wall", Json{{"point", Json::array({t.wall.point[0], t.wall.point[1]})},
                           {"normal", Json::array({t.wall.normal[0], t.wall.normal[1]})},
                           {"stiffness", t.wall.stiffness},
                           {"damping", t.wall.damping},
                           {"smoothing", t.wall.smoothing}}},
             {"viapoints", vias_json(t.viapoints)},
             {"force_window", Json::array({t.force_window_start, t.force_window_end})},
             {"desired_force", t.desired_force},
             {"force_weight", t.force_weight},
             {"force_tolerance", t.force_tolerance},
             {"gap_weight", t.gap_weight},
             {"approach_gap_weight", t.approach_gap_weight},
             {"control_weight", t.control_weight},
             {"terminal_velocity_weight", t.terminal_velocity_weight},
             {"process_noise", t.process_noise},
             {"xp_process_scale", t.xp_process_scale},
             {"xp_meas_scale_free", t.xp_meas_scale_free},
             {"xp_meas_scale_contact", t.xp_meas_scale_contact},
             {"xp_shift", setup.xp_shift}};
  }
  if (config.contains("experiment")) resolved["experiment"] = config.at("experiment");
  setup.resolved = resolved;
  return setup;
}

Setup load_setup_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_setup(parse_json_text(ss.str()));
}

std::vector<Vec> initial_controls(const Setup& setup) {
  if (setup.resolved.contains("initial_controls")) {
    const Json& j = setup.resolved.at("initial_controls");
    if (j.is_string()) {
      const std::string mode = j.get<std::string>();
      if (mode == "zeros") return std::vector<Vec>(setup.steps, Vec::Zero(setup.problem.control_dim));
      if (mode == "reference") {
        if (!setup.contact) fail("initial_controls \"reference\" needs the contact model");
        return contact_reference_controls(*setup.contact);
      }
      fail("initial_controls must be \"zeros\", \"reference\", or an array");
    }
    if (!j.is_array() || static_cast<int>(j.size()) != setup.steps)
      fail("initial_controls must be an array with one entry per step");
    std::vector<Vec> out;
    out.reserve(setup.steps);
    for (int k = 0; k < setup.steps; ++k)
      out.push_back(vec_of(j[k], "initial_controls", setup.problem.control_dim));
    return out;
  }
  // Contact solves default to the feedforward reference; a cold start tends to
  // slam the wall and stall. Everything else starts from zero torque.
  if (setup.contact) return contact_reference_controls(*setup.contact);
  return std::vector<Vec>(setup.steps, Vec::Zero(setup.problem.control_dim));
}

}  // namespace rsoc
