#include "plp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "plp/model.hpp"
#include "plp/reference_export.hpp"
#include "plp/rng.hpp"
#include "plp/yaml_io.hpp"

namespace plp::harness {

namespace {

constexpr const char* kVersion = "0.1.0";

double now_minus(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void append_num(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

YAML::Node obstacle_to_yaml(const world::Obstacle& o) {
  YAML::Node n;
  switch (o.shape) {
    case world::Obstacle::Shape::Sphere:
      n["shape"] = "sphere";
      n["radius"] = o.radius;
      break;
    case world::Obstacle::Shape::Box:
      n["shape"] = "box";
      n["half_extents"] = vec3_to_yaml(o.half_extents);
      break;
    case world::Obstacle::Shape::Cylinder:
      n["shape"] = "cylinder";
      n["radius"] = o.radius;
      n["half_height"] = o.half_height;
      break;
  }
  n["center"] = vec3_to_yaml(o.center);
  return n;
}

world::Obstacle obstacle_from_yaml(const YAML::Node& n) {
  const auto kind = n["shape"].as<std::string>();
  const Vec3 c = vec3_from_yaml(n["center"]);
  if (kind == "sphere") return world::Obstacle::sphere(c, n["radius"].as<double>());
  if (kind == "box") return world::Obstacle::box(c, vec3_from_yaml(n["half_extents"]));
  if (kind == "cylinder")
    return world::Obstacle::cylinder(c, n["radius"].as<double>(), n["half_height"].as<double>());
  throw std::invalid_argument("unknown obstacle shape: " + kind);
}

YAML::Node endpoint_to_yaml(const EndpointSpec& e) {
  YAML::Node n;
  n["p0"] = vec3_to_yaml(e.p0);
  if (!e.cables.empty()) {
    for (const auto& c : e.cables) {
      YAML::Node cn;
      cn.SetStyle(YAML::EmitterStyle::Flow);
      cn["azimuth"] = c.azimuth;
      cn["elevation"] = c.elevation;
      n["cables"].push_back(cn);
    }
  }
  return n;
}

EndpointSpec endpoint_from_yaml(const YAML::Node& n) {
  EndpointSpec e;
  e.p0 = vec3_from_yaml(n["p0"]);
  if (n["cables"])
    for (const auto& cn : n["cables"])
      e.cables.push_back(CableAngles{cn["azimuth"].as<double>(), cn["elevation"].as<double>()});
  return e;
}

const char* sampler_name(geom::PlannerConfig::Sampler s) {
  return s == geom::PlannerConfig::Sampler::Witness ? "witness" : "uniform";
}

geom::PlannerConfig::Sampler sampler_from_name(const std::string& s) {
  if (s == "witness") return geom::PlannerConfig::Sampler::Witness;
  if (s == "uniform") return geom::PlannerConfig::Sampler::Uniform;
  throw std::invalid_argument("unknown sampler: " + s);
}

FullState chart_midpoint(const FullState& a, const FullState& b) {
  return model::retract(a, 0.5 * model::local_diff(b, a));
}

double max_motor_violation(const SystemParams& p, const Control& u) {
  double v = 0.0;
  for (int i = 0; i < u.n(); ++i)
    for (int r = 0; r < 4; ++r) {
      v = std::max(v, u.motors[i](r) - p.uavs[i].motor_max);
      v = std::max(v, p.uavs[i].motor_min - u.motors[i](r));
    }
  return std::max(v, 0.0);
}

constexpr unsigned kObstaclePairs = world::pair_bit(world::PairKind::UavObstacle) |
                                    world::pair_bit(world::PairKind::PayloadObstacle) |
                                    world::pair_bit(world::PairKind::CableObstacle);

// Clearance between a formation and the obstacle set alone; the formation's
// own structural proximities (cables sharing the payload attachment) are not
// the obstacles' fault.
double obstacle_clearance(const GeomState& s, const world::Environment& env,
                          const SystemParams& p, double cutoff) {
  return world::min_contact(world::body_geometries(s, p), env, cutoff, kObstaclePairs).dist;
}

// Cables must sit more than 60 degrees apart once capsules are shrunk at the
// shared attachment, so wider teams hang in flatter cones; six robots need a
// vertical cable inside a flat five-ring.
void default_formation(std::vector<CableAngles>& cables, int n) {
  cables.resize(static_cast<std::size_t>(n));
  const int ring = n >= 6 ? n - 1 : n;
  const double elevation = n <= 3 ? M_PI / 4.0 : (n == 4 ? 0.6 : (n == 5 ? 0.45 : 0.2));
  for (int i = 0; i < ring; ++i) {
    cables[i].azimuth = 2.0 * M_PI * i / ring;
    cables[i].elevation = elevation;
  }
  if (ring < n) cables[n - 1] = CableAngles{0.0, M_PI / 2.0};
}

}  // namespace

void Problem::validate() const {
  params.validate();
  const int n = params.n();
  if (static_cast<int>(start.cables.size()) != n)
    throw std::invalid_argument("start needs one cable angle pair per robot");
  if (!goal.cables.empty() && static_cast<int>(goal.cables.size()) != n)
    throw std::invalid_argument("goal cable count does not match the robot count");
  if ((env.workspace_lo.array() >= env.workspace_hi.array()).any())
    throw std::invalid_argument("workspace bounds out of order");
  if (!env.in_workspace(start.p0)) throw std::invalid_argument("start outside the workspace");
  if (!env.in_workspace(goal.p0)) throw std::invalid_argument("goal outside the workspace");
  if (!(reference_dt > 0.0) || !(reference_speed > 0.0))
    throw std::invalid_argument("reference step and speed must be positive");
  world::ValidityConfig vcfg;
  vcfg.min_elevation = std::asin(planner.eps_tilt);
  vcfg.resolution = planner.resolution;
  if (!world::is_state_valid(start_state(), env, params, vcfg))
    throw std::invalid_argument("start state is not collision-free");
}

void save_problem(const Problem& pb, const std::string& path) {
  YAML::Node root;
  root["params"] = params_to_yaml(pb.params);

  YAML::Node env;
  env["workspace_lo"] = vec3_to_yaml(pb.env.workspace_lo);
  env["workspace_hi"] = vec3_to_yaml(pb.env.workspace_hi);
  for (const auto& o : pb.env.obstacles) env["obstacles"].push_back(obstacle_to_yaml(o));
  root["environment"] = env;

  root["start"] = endpoint_to_yaml(pb.start);
  root["goal"] = endpoint_to_yaml(pb.goal);

  YAML::Node pl;
  pl["seed"] = pb.seed;
  pl["timeout"] = pb.planner.timeout_s;
  pl["max_iters"] = pb.planner.max_iters;
  pl["witness_count"] = pb.planner.witness_count;
  pl["witness_attempts_per"] = pb.planner.witness_attempts_per;
  pl["sigma"] = pb.planner.sigma;
  pl["goal_bias"] = pb.planner.goal_bias;
  pl["goal_tolerance"] = pb.planner.goal_tolerance;
  pl["max_step"] = pb.planner.max_step;
  pl["rewire_gamma"] = pb.planner.rewire_gamma;
  pl["angle_weight"] = pb.planner.angle_weight;
  pl["eps_tilt"] = pb.planner.eps_tilt;
  pl["resolution"] = pb.planner.resolution;
  pl["beta"] = pb.planner.beta;
  pl["sampler"] = sampler_name(pb.planner.sampler);
  pl["payload_only"] = pb.planner.payload_only;
  pl["reference_dt"] = pb.reference_dt;
  pl["reference_speed"] = pb.reference_speed;
  root["planner"] = pl;

  YAML::Node op;
  op["dt0"] = pb.optimizer.dt0;
  op["beta1"] = pb.optimizer.beta1;
  op["beta2"] = pb.optimizer.beta2;
  op["w_goal"] = pb.optimizer.w_goal;
  op["w_bound"] = pb.optimizer.w_bound;
  op["w_coll"] = pb.optimizer.w_coll;
  op["margin"] = pb.optimizer.margin;
  op["n_iters"] = pb.optimizer.n_iters;
  op["shrink"] = pb.optimizer.shrink;
  op["max_iters"] = pb.optimizer.max_iters;
  op["tol"] = pb.optimizer.tol;
  root["optimizer"] = op;

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << root << '\n';
}

Problem load_problem(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument("cannot parse " + path + ": " + e.what());
  }

  Problem pb;
  pb.params = params_from_yaml(root["params"]);

  const auto env = root["environment"];
  if (env) {
    if (env["workspace_lo"]) pb.env.workspace_lo = vec3_from_yaml(env["workspace_lo"]);
    if (env["workspace_hi"]) pb.env.workspace_hi = vec3_from_yaml(env["workspace_hi"]);
    if (env["obstacles"])
      for (const auto& on : env["obstacles"]) pb.env.obstacles.push_back(obstacle_from_yaml(on));
  }

  pb.start = endpoint_from_yaml(root["start"]);
  pb.goal = endpoint_from_yaml(root["goal"]);

  const auto pl = root["planner"];
  if (pl) {
    auto& c = pb.planner;
    if (pl["seed"]) pb.seed = pl["seed"].as<std::uint64_t>();
    if (pl["timeout"]) c.timeout_s = pl["timeout"].as<double>();
    if (pl["max_iters"]) c.max_iters = pl["max_iters"].as<std::uint64_t>();
    if (pl["witness_count"]) c.witness_count = pl["witness_count"].as<int>();
    if (pl["witness_attempts_per"])
      c.witness_attempts_per = pl["witness_attempts_per"].as<std::uint64_t>();
    if (pl["sigma"]) c.sigma = pl["sigma"].as<double>();
    if (pl["goal_bias"]) c.goal_bias = pl["goal_bias"].as<double>();
    if (pl["goal_tolerance"]) c.goal_tolerance = pl["goal_tolerance"].as<double>();
    if (pl["max_step"]) c.max_step = pl["max_step"].as<double>();
    if (pl["rewire_gamma"]) c.rewire_gamma = pl["rewire_gamma"].as<double>();
    if (pl["angle_weight"]) c.angle_weight = pl["angle_weight"].as<double>();
    if (pl["eps_tilt"]) c.eps_tilt = pl["eps_tilt"].as<double>();
    if (pl["resolution"]) c.resolution = pl["resolution"].as<double>();
    if (pl["beta"]) c.beta = pl["beta"].as<double>();
    if (pl["sampler"]) c.sampler = sampler_from_name(pl["sampler"].as<std::string>());
    if (pl["payload_only"]) c.payload_only = pl["payload_only"].as<bool>();
    if (pl["reference_dt"]) pb.reference_dt = pl["reference_dt"].as<double>();
    if (pl["reference_speed"]) pb.reference_speed = pl["reference_speed"].as<double>();
  }

  const auto op = root["optimizer"];
  if (op) {
    auto& o = pb.optimizer;
    if (op["dt0"]) o.dt0 = op["dt0"].as<double>();
    if (op["beta1"]) o.beta1 = op["beta1"].as<double>();
    if (op["beta2"]) o.beta2 = op["beta2"].as<double>();
    if (op["w_goal"]) o.w_goal = op["w_goal"].as<double>();
    if (op["w_bound"]) o.w_bound = op["w_bound"].as<double>();
    if (op["w_coll"]) o.w_coll = op["w_coll"].as<double>();
    if (op["margin"]) o.margin = op["margin"].as<double>();
    if (op["n_iters"]) o.n_iters = op["n_iters"].as<int>();
    if (op["shrink"]) o.shrink = op["shrink"].as<double>();
    if (op["max_iters"]) o.max_iters = op["max_iters"].as<int>();
    if (op["tol"]) o.tol = op["tol"].as<double>();
  }

  pb.validate();
  return pb;
}

ScenarioKind scenario_from_string(const std::string& s) {
  if (s == "empty") return ScenarioKind::Empty;
  if (s == "forest") return ScenarioKind::Forest;
  if (s == "window") return ScenarioKind::Window;
  throw std::invalid_argument("unknown scenario: " + s);
}

Problem generate_scenario(ScenarioKind kind, int n, std::uint64_t seed) {
  if (n < 2 || n > 6) throw std::invalid_argument("robot count must be between 2 and 6");

  Problem pb;
  pb.params = SystemParams::defaults(n);
  pb.env.workspace_lo = Vec3(-2.0, -1.5, 0.2);
  pb.env.workspace_hi = Vec3(2.0, 1.5, 2.0);
  pb.seed = seed;

  pb.start.p0 = Vec3(-0.75, 0.0, 0.5);
  pb.goal.p0 = Vec3(0.75, 0.0, 0.5);
  pb.start.cables.resize(n);
  for (int i = 0; i < n; ++i) {
    pb.start.cables[i].azimuth = 2.0 * M_PI * i / n;
    pb.start.cables[i].elevation = M_PI / 4.0;
  }
  // Goal formation stays free; the planner only has to reach the position.

  if (kind == ScenarioKind::Window) {
    // Slot between two full-height columns, tighter for smaller teams.
    const double gap = 0.4 + 0.025 * (n - 2);
    const double zc = 0.5 * (pb.env.workspace_lo.z() + pb.env.workspace_hi.z());
    const double zh = 0.5 * (pb.env.workspace_hi.z() - pb.env.workspace_lo.z());
    const double yh = 0.5 * (pb.env.workspace_hi.y() - gap);
    pb.env.obstacles.push_back(
        world::Obstacle::box(Vec3(0.0, gap + yh, zc), Vec3(0.1, yh, zh)));
    pb.env.obstacles.push_back(
        world::Obstacle::box(Vec3(0.0, -gap - yh, zc), Vec3(0.1, yh, zh)));
  } else if (kind == ScenarioKind::Forest) {
    const Vec3 span = pb.env.workspace_hi - pb.env.workspace_lo;
    const int count = static_cast<int>(std::lround(8.0 * span.x() * span.y() / 16.0));
    const double r = 0.1;
    const double zc = 0.5 * (pb.env.workspace_lo.z() + pb.env.workspace_hi.z());
    const double zh = 0.5 * (pb.env.workspace_hi.z() - pb.env.workspace_lo.z());
    const GeomState s0 = pb.start_state();
    GeomState s1 = s0;
    s1.payload_pos = pb.goal.p0;
    Rng rng(seed);
    for (int k = 0; k < count; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const double x = rng.uniform(pb.env.workspace_lo.x() + r, pb.env.workspace_hi.x() - r);
        const double y = rng.uniform(pb.env.workspace_lo.y() + r, pb.env.workspace_hi.y() - r);
        pb.env.obstacles.push_back(world::Obstacle::cylinder(Vec3(x, y, zc), r, zh));
        // Keep both endpoint formations clear of the trunk with room to move.
        if (world::signed_distance(s0, pb.env, pb.params) >= 0.05 &&
            world::signed_distance(s1, pb.env, pb.params) >= 0.05)
          placed = true;
        else
          pb.env.obstacles.pop_back();
      }
      if (!placed) throw std::runtime_error("could not place forest obstacles");
    }
  }

  pb.validate();
  return pb;
}

std::vector<FullState> rollout(const SystemParams& p, const FullState& x0,
                               const std::vector<Control>& U, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  std::vector<FullState> X;
  X.reserve(U.size() + 1);
  X.push_back(x0);
  for (const auto& u : U) {
    if (u.n() != x0.n()) throw std::invalid_argument("control width does not match the state");
    X.push_back(model::step(p, X.back(), u, dt));
  }
  return X;
}

double energy(double dt, const std::vector<Control>& U, const PowerModel& pm) {
  if (pm.p_idle < 0.0 || pm.p_slope < 0.0)
    throw std::invalid_argument("power model must be nonnegative");
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  double wh = 0.0;
  for (const auto& u : U) {
    double watts = 0.0;
    for (int i = 0; i < u.n(); ++i)
      for (int r = 0; r < 4; ++r) watts += pm.p_idle + pm.p_slope * u.motors[i](r);
    wh += dt * watts / 3600.0;
  }
  return wh;
}

double energy(const opt::Trajectory& traj, const PowerModel& pm) {
  return energy(traj.dt, traj.U, pm);
}

ValidationReport validate_trajectory(const opt::Trajectory& traj, const Problem& pb,
                                     const PowerModel& pm) {
  if (traj.X.size() < 2 || traj.U.size() + 1 != traj.X.size())
    throw std::invalid_argument("trajectory needs k states and k-1 controls, k >= 2");
  if (!(traj.dt > 0.0)) throw std::invalid_argument("time step must be positive");
  for (const auto& x : traj.X)
    if (x.n() != pb.params.n()) throw std::invalid_argument("state width does not match problem");

  ValidationReport rep;
  rep.duration_s = traj.dt * static_cast<double>(traj.U.size());
  rep.energy_wh = energy(traj.dt, traj.U, pm);

  const auto Xr = rollout(pb.params, traj.X.front(), traj.U, traj.dt);
  for (std::size_t k = 1; k < traj.X.size(); ++k)
    rep.max_defect = std::max(
        rep.max_defect, model::local_diff(traj.X[k], Xr[k]).lpNorm<Eigen::Infinity>());

  rep.min_distance = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.X.size(); ++k) {
    rep.min_distance =
        std::min(rep.min_distance, world::signed_distance(traj.X[k], pb.env, pb.params));
    if (k + 1 < traj.X.size()) {
      const FullState mid = chart_midpoint(traj.X[k], traj.X[k + 1]);
      rep.min_distance = std::min(rep.min_distance, world::signed_distance(mid, pb.env, pb.params));
    }
  }

  for (const auto& u : traj.U)
    rep.max_bound_violation = std::max(rep.max_bound_violation, max_motor_violation(pb.params, u));

  rep.goal_error = (traj.X.back().payload_pos - pb.goal.p0).norm();
  rep.success = rep.max_defect <= kDefectTol && rep.min_distance >= 0.0 &&
                rep.max_bound_violation <= kBoundTol &&
                rep.goal_error <= pb.planner.goal_tolerance;
  return rep;
}

ValidationReport validate_reference(const geom::ReferenceTrajectory& ref, const Problem& pb,
                                    const PowerModel& pm) {
  if (ref.states.empty()) throw std::invalid_argument("empty reference");
  for (const auto& x : ref.states)
    if (x.n() != pb.params.n()) throw std::invalid_argument("state width does not match problem");

  ValidationReport rep;
  rep.reference_only = true;
  const std::size_t T = ref.states.size() - 1;
  rep.duration_s = ref.dt * static_cast<double>(T);

  const Control hover = model::hover_control(pb.params);
  const std::vector<Control> U(T, hover);
  rep.energy_wh = T > 0 ? energy(ref.dt, U, pm) : 0.0;
  for (const auto& u : U)
    rep.max_bound_violation = std::max(rep.max_bound_violation, max_motor_violation(pb.params, u));

  rep.min_distance = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < ref.states.size(); ++k) {
    rep.min_distance =
        std::min(rep.min_distance, world::signed_distance(ref.states[k], pb.env, pb.params));
    if (k + 1 < ref.states.size()) {
      const FullState mid = chart_midpoint(ref.states[k], ref.states[k + 1]);
      rep.min_distance = std::min(rep.min_distance, world::signed_distance(mid, pb.env, pb.params));
    }
  }

  // What open-loop hover thrust would actually do, for the defect/goal
  // diagnostics: the reference itself makes no dynamic claim.
  const auto Xr = rollout(pb.params, ref.states.front(), U, ref.dt > 0.0 ? ref.dt : 1.0);
  for (std::size_t k = 1; k < ref.states.size(); ++k)
    rep.max_defect = std::max(
        rep.max_defect, model::local_diff(ref.states[k], Xr[k]).lpNorm<Eigen::Infinity>());
  rep.goal_error = (Xr.back().payload_pos - pb.goal.p0).norm();

  rep.success = rep.min_distance >= 0.0 && rep.max_bound_violation <= kBoundTol;
  return rep;
}

Mode mode_from_string(const std::string& s) {
  if (s == "payload") return Mode::Payload;
  if (s == "geom") return Mode::Geom;
  if (s == "opt") return Mode::Opt;
  throw std::invalid_argument("unknown mode: " + s);
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Payload: return "payload";
    case Mode::Geom: return "geom";
    default: return "opt";
  }
}

PipelineResult run_pipeline(const Problem& pb, Mode mode) {
  pb.validate();
  PipelineResult r;
  r.mode = mode;

  geom::PlannerConfig cfg = pb.planner;
  if (mode == Mode::Payload) cfg.payload_only = true;

  const auto t0 = std::chrono::steady_clock::now();
  r.plan = geom::plan_geometric(pb.start_state(), pb.goal.p0, pb.env, pb.params, cfg, pb.seed);
  r.plan_wall_s = now_minus(t0);
  r.plan_found = r.plan.solved;
  if (!r.plan_found) {
    r.report.reference_only = mode != Mode::Opt;
    return r;
  }

  geom::GeomPath path = r.plan.path;
  if (mode == Mode::Payload)
    for (auto& s : path.states)
      s.cables.assign(static_cast<std::size_t>(pb.params.n()), CableAngles{0.0, M_PI / 2.0});

  r.reference =
      geom::path_to_reference(path, pb.reference_dt, pb.reference_speed, pb.planner.angle_weight);

  if (mode != Mode::Opt) {
    r.report = validate_reference(r.reference, pb);
    return r;
  }

  // A degenerate two-point reference still needs two control intervals.
  while (r.reference.states.size() < 3) r.reference.states.push_back(r.reference.states.back());

  opt::Guess guess = opt::build_initial_guess(r.reference, pb.params);

  opt::OptProblem op;
  op.params = pb.params;
  op.env = pb.env;
  op.x_start = guess.X.front();
  GeomState goal_state{pb.goal.p0, pb.goal.cables.empty() ? path.states.back().cables
                                                          : pb.goal.cables};
  op.x_goal = full_state_from_geom(goal_state);
  op.steps = static_cast<int>(guess.U.size());
  op.dt0 = pb.optimizer.dt0;
  op.beta1 = pb.optimizer.beta1;
  op.beta2 = pb.optimizer.beta2;
  op.w_goal = pb.optimizer.w_goal;
  op.w_bound = pb.optimizer.w_bound;
  op.w_coll = pb.optimizer.w_coll;
  op.margin = pb.optimizer.margin;
  op.goal_tolerance = pb.planner.goal_tolerance;

  opt::SolveOptions so;
  so.max_iters = pb.optimizer.max_iters;
  so.tol = pb.optimizer.tol;

  const auto t1 = std::chrono::steady_clock::now();
  if (pb.optimizer.n_iters <= 1)
    r.iterates.push_back(opt::optimize(op, guess, so));
  else
    r.iterates = opt::iterative_refine(op, guess, pb.optimizer.n_iters, pb.optimizer.shrink, so);
  r.opt_wall_s = now_minus(t1);

  r.report = validate_trajectory(r.iterates.back(), pb);
  return r;
}

std::string report_json(const PipelineResult& r, const Problem& pb, bool include_timing) {
  nlohmann::json j;
  j["definition"] =
      "success means the validator thresholds hold: dynamic trajectories must "
      "keep defect, clearance, control bounds, and goal error inside their "
      "limits; reference-only runs gate on clearance and bounds, with defect "
      "and goal reported from an open-loop hover rollout";
  j["mode"] = to_string(r.mode);
  j["robots"] = pb.params.n();
  j["seed"] = pb.seed;

  j["plan"] = {
      {"solved", r.plan.solved},
      {"iterations", r.plan.iterations},
      {"nodes", r.plan.node_count},
      {"path_cost", r.plan.solved ? r.plan.path.cost : -1.0},
      {"path_states", r.plan.path.states.size()},
      {"first_solution_iter", r.plan.first_solution_iter},
      {"witness_complete", r.plan.witness_complete},
  };

  if (!r.reference.states.empty())
    j["reference"] = {
        {"dt", r.reference.dt},
        {"states", r.reference.states.size()},
        {"duration_s", r.reference.dt * static_cast<double>(r.reference.states.size() - 1)},
    };

  if (!r.iterates.empty()) {
    auto rounds = nlohmann::json::array();
    for (const auto& t : r.iterates)
      rounds.push_back({
          {"dt", t.dt},
          {"steps", t.U.size()},
          {"cost", t.diag.total_cost},
          {"goal_error", t.diag.goal_error},
          {"min_distance", t.diag.min_distance},
          {"duration_s", t.dt * static_cast<double>(t.U.size())},
          {"energy_wh", energy(t)},
      });
    j["optimizer"]["rounds"] = std::move(rounds);
  }

  j["validation"] = {
      {"success", r.report.success},
      {"reference_only", r.report.reference_only},
      {"max_defect", r.report.max_defect},
      {"min_distance", r.report.min_distance},
      {"max_bound_violation", r.report.max_bound_violation},
      {"goal_error", r.report.goal_error},
      {"duration_s", r.report.duration_s},
      {"energy_wh", r.report.energy_wh},
  };

  if (include_timing)
    j["timing"] = {
        {"plan_wall_s", r.plan_wall_s},
        {"opt_wall_s", r.opt_wall_s},
        {"first_solution_wall_s", r.plan.first_solution_s},
        {"plan_wall_total_s", r.plan.wall_time_s},
    };

  return j.dump(2);
}

void export_pipeline(const PipelineResult& r, const Problem& pb, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream f(fs::path(dir) / "report.json");
    if (!f) throw std::runtime_error("cannot write report.json in " + dir);
    f << report_json(r, pb, true) << '\n';
  }

  {
    std::string csv = "iter,best_cost,t_wall_s\n";
    for (const auto& t : r.plan.trace) {
      csv += std::to_string(t.iter);
      csv += ',';
      append_num(csv, t.best_cost);
      csv += ',';
      append_num(csv, t.t_wall_s);
      csv += '\n';
    }
    std::ofstream f(fs::path(dir) / "plan_trace.csv");
    if (!f) throw std::runtime_error("cannot write plan_trace.csv in " + dir);
    f << csv;
  }

  if (!r.plan_found) return;

  ctrlref::ExportMeta meta;
  meta.seed = pb.seed;
  meta.version = kVersion;
  ctrlref::ControllerReference cr;
  if (r.mode == Mode::Opt && !r.iterates.empty()) {
    meta.source = "optimizer";
    cr = ctrlref::reference_cable_forces(r.iterates.back(), pb.params);
  } else {
    meta.source = "geometric";
    cr = ctrlref::reference_cable_forces(r.reference, pb.params);
  }
  ctrlref::export_trajectory(cr, pb.params, (fs::path(dir) / "trajectory.csv").string(), meta);
}

BenchResult bench_sampler(const Problem& pb, int n_seeds, int workers) {
  if (n_seeds < 2) throw std::invalid_argument("sampler benchmark needs at least two seeds");
  pb.validate();

  BenchResult out;
  out.runs.resize(2 * static_cast<std::size_t>(n_seeds));
  for (int s = 0; s < 2; ++s)
    for (int j = 0; j < n_seeds; ++j) {
      auto& run = out.runs[static_cast<std::size_t>(s) * n_seeds + j];
      run.sampler = s == 0 ? geom::PlannerConfig::Sampler::Witness
                           : geom::PlannerConfig::Sampler::Uniform;
      run.seed = pb.seed + static_cast<std::uint64_t>(j);
    }

  const GeomState start = pb.start_state();
  auto run_cell = [&](BenchRun& run) {
    geom::PlannerConfig cfg = pb.planner;
    cfg.sampler = run.sampler;
    cfg.payload_only = false;
    const auto res = geom::plan_geometric(start, pb.goal.p0, pb.env, pb.params, cfg, run.seed);
    run.solved = res.solved;
    run.ttfs_wall_s = res.first_solution_s;
    run.ttfs_iter = res.first_solution_iter;
    run.final_cost = res.solved ? res.path.cost : std::numeric_limits<double>::infinity();
    run.trace = res.trace;
  };

  const int nthreads = std::clamp(workers, 1, static_cast<int>(out.runs.size()));
  if (nthreads <= 1) {
    for (auto& run : out.runs) run_cell(run);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < out.runs.size(); i = next.fetch_add(1))
          run_cell(out.runs[i]);
      });
    for (auto& t : pool) t.join();
  }

  auto summarize = [&](geom::PlannerConfig::Sampler s) {
    BenchSummary sum;
    std::vector<double> ttfs, costs;
    for (const auto& run : out.runs) {
      if (run.sampler != s) continue;
      ++sum.runs;
      if (!run.solved) continue;
      ++sum.solved;
      ttfs.push_back(run.ttfs_wall_s);
      costs.push_back(run.final_cost);
    }
    if (!ttfs.empty()) {
      std::sort(ttfs.begin(), ttfs.end());
      const std::size_t m = ttfs.size() / 2;
      sum.ttfs_median_s = ttfs.size() % 2 == 1 ? ttfs[m] : 0.5 * (ttfs[m - 1] + ttfs[m]);
    }
    if (!costs.empty()) {
      double mean = 0.0;
      for (double c : costs) mean += c;
      mean /= static_cast<double>(costs.size());
      sum.final_cost_mean = mean;
      if (costs.size() > 1) {
        double ss = 0.0;
        for (double c : costs) ss += (c - mean) * (c - mean);
        sum.final_cost_std = std::sqrt(ss / static_cast<double>(costs.size() - 1));
      }
    }
    return sum;
  };
  out.witness = summarize(geom::PlannerConfig::Sampler::Witness);
  out.uniform = summarize(geom::PlannerConfig::Sampler::Uniform);
  return out;
}

void export_bench(const BenchResult& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::string traces = "sampler,seed,iter,best_cost,t_wall_s\n";
  for (const auto& run : b.runs)
    for (const auto& t : run.trace) {
      traces += sampler_name(run.sampler);
      traces += ',';
      traces += std::to_string(run.seed);
      traces += ',';
      traces += std::to_string(t.iter);
      traces += ',';
      append_num(traces, t.best_cost);
      traces += ',';
      append_num(traces, t.t_wall_s);
      traces += '\n';
    }
  {
    std::ofstream f(fs::path(dir) / "traces.csv");
    if (!f) throw std::runtime_error("cannot write traces.csv in " + dir);
    f << traces;
  }

  std::string summary =
      "sampler,runs,solved,final_cost_mean,final_cost_std,ttfs_median_wall_s\n";
  auto row = [&](const char* name, const BenchSummary& s) {
    summary += name;
    summary += ',';
    summary += std::to_string(s.runs);
    summary += ',';
    summary += std::to_string(s.solved);
    summary += ',';
    append_num(summary, s.final_cost_mean);
    summary += ',';
    append_num(summary, s.final_cost_std);
    summary += ',';
    append_num(summary, s.ttfs_median_s);
    summary += '\n';
  };
  row("witness", b.witness);
  row("uniform", b.uniform);
  {
    std::ofstream f(fs::path(dir) / "summary.csv");
    if (!f) throw std::runtime_error("cannot write summary.csv in " + dir);
    f << summary;
  }
}

opt::Trajectory trajectory_from_file(const std::string& path) {
  const auto cr = ctrlref::load_trajectory(path);
  if (cr.steps.size() < 2)
    throw std::invalid_argument("trajectory file has fewer than two rows");

  opt::Trajectory t;
  t.dt = cr.dt;
  t.X.reserve(cr.steps.size());
  t.U.reserve(cr.steps.size() - 1);
  for (const auto& s : cr.steps) {
    FullState x;
    x.payload_pos = s.p0;
    x.payload_vel = s.v0;
    x.cables.resize(static_cast<std::size_t>(cr.n));
    x.uavs.resize(static_cast<std::size_t>(cr.n));
    for (int i = 0; i < cr.n; ++i) {
      x.cables[i].dir = s.q[i];
      x.cables[i].ang_vel = s.w[i];
      x.uavs[i].orientation = s.rot[i];
      x.uavs[i].body_rate = s.omega[i];
    }
    t.X.push_back(std::move(x));
  }
  for (std::size_t k = 0; k + 1 < cr.steps.size(); ++k) {
    Control u;
    u.motors = cr.steps[k].motors;
    t.U.push_back(std::move(u));
  }
  return t;
}

}  // namespace plp::harness
