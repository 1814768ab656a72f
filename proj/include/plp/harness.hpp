#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plp/geom_planner.hpp"
#include "plp/traj_opt.hpp"
#include "plp/types.hpp"
#include "plp/world.hpp"

namespace plp::harness {

struct EndpointSpec {
  Vec3 p0 = Vec3::Zero();
  std::vector<CableAngles> cables;  // goal may leave this empty (free formation)
};

struct OptimizerSettings {
  double dt0 = 0.009;
  double beta1 = 0.02;
  double beta2 = 5e-4;
  double w_goal = 1e3;
  double w_bound = 1e2;
  double w_coll = 1e3;
  double margin = 0.02;
  int n_iters = 1;      // refinement rounds; 1 means a single optimize pass
  double shrink = 0.9;  // dt0 multiplier per extra round
  int max_iters = 500;
  double tol = 1e-6;
};

// A full experiment description: system, environment, endpoints, and the
// budgets of both solver stages. Round-trips through YAML exactly.
struct Problem {
  SystemParams params = SystemParams::defaults(2);
  world::Environment env;
  EndpointSpec start;
  EndpointSpec goal;
  geom::PlannerConfig planner;
  std::uint64_t seed = 1;
  double reference_dt = 0.01;     // s, resampling step of geometric references
  double reference_speed = 0.5;   // m/s along the path
  OptimizerSettings optimizer;

  GeomState start_state() const { return GeomState{start.p0, start.cables}; }

  // Throws std::invalid_argument unless endpoints are inside the workspace,
  // cable counts match the robot count, and the start state is collision-free.
  void validate() const;
};

void save_problem(const Problem& pb, const std::string& path);
Problem load_problem(const std::string& path);

enum class ScenarioKind { Empty, Forest, Window };
ScenarioKind scenario_from_string(const std::string& s);

// Benchmark worlds on a fixed 4 x 3 x 1.8 m workspace with the payload
// travelling 1.5 m in x. Forest obstacles are seeded; two calls with the
// same arguments build identical problems.
Problem generate_scenario(ScenarioKind kind, int n, std::uint64_t seed);

std::vector<FullState> rollout(const SystemParams& p, const FullState& x0,
                               const std::vector<Control>& U, double dt);

struct PowerModel {
  double p_idle = 1.8;   // W per rotor at zero force
  double p_slope = 20.0;  // W per N of rotor force
};

// Wh over the whole trajectory, accumulated step by step so concatenation
// adds exactly.
double energy(double dt, const std::vector<Control>& U, const PowerModel& pm = {});
double energy(const opt::Trajectory& traj, const PowerModel& pm = {});

struct ValidationReport {
  bool success = false;
  // Dynamic trajectories must satisfy every threshold below. A reference-only
  // report gates success on clearance and bounds alone; its defect and goal
  // fields describe what open-loop hover controls would do and are
  // informational.
  bool reference_only = false;
  double max_defect = 0.0;            // vs. re-rollout of the stored controls
  double min_distance = 0.0;          // m, over states and half-step midpoints
  double max_bound_violation = 0.0;   // N
  double goal_error = 0.0;            // m, final payload position
  double duration_s = 0.0;
  double energy_wh = 0.0;
};

inline constexpr double kDefectTol = 1e-6;
inline constexpr double kBoundTol = 1e-3;

ValidationReport validate_trajectory(const opt::Trajectory& traj, const Problem& pb,
                                     const PowerModel& pm = {});
ValidationReport validate_reference(const geom::ReferenceTrajectory& ref, const Problem& pb,
                                    const PowerModel& pm = {});

enum class Mode { Payload, Geom, Opt };
Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct PipelineResult {
  Mode mode = Mode::Opt;
  bool plan_found = false;
  geom::PlanResult plan;
  geom::ReferenceTrajectory reference;    // payload mode carries vertical cables
  std::vector<opt::Trajectory> iterates;  // opt mode only; final solution last
  ValidationReport report;
  double plan_wall_s = 0.0;
  double opt_wall_s = 0.0;
};

// Payload mode plans the payload sphere alone and lifts the path with
// vertical cables; geom mode plans the full formation; opt mode feeds the
// geometric reference through the trajectory optimizer.
PipelineResult run_pipeline(const Problem& pb, Mode mode);

// report.json content, serialized. Wall-clock readings live under the
// "timing" key and can be dropped for reproducibility comparisons; every
// other field is reproducible bit for bit from the problem file.
std::string report_json(const PipelineResult& r, const Problem& pb,
                        bool include_timing = true);

// Writes report.json, plan_trace.csv, and (when a reference or solution
// exists) trajectory.csv with its metadata sidecar.
void export_pipeline(const PipelineResult& r, const Problem& pb, const std::string& dir);

struct BenchRun {
  geom::PlannerConfig::Sampler sampler = geom::PlannerConfig::Sampler::Witness;
  std::uint64_t seed = 0;
  bool solved = false;
  double ttfs_wall_s = -1.0;
  std::uint64_t ttfs_iter = 0;
  double final_cost = 0.0;
  std::vector<geom::TracePoint> trace;
};

struct BenchSummary {
  int runs = 0;
  int solved = 0;
  double ttfs_median_s = -1.0;  // over solved runs
  double final_cost_mean = 0.0;
  double final_cost_std = 0.0;  // sample deviation over solved runs
};

struct BenchResult {
  std::vector<BenchRun> runs;  // witness then uniform, seeds ascending
  BenchSummary witness;
  BenchSummary uniform;
};

// Runs the geometric planner with both samplers over consecutive seeds
// starting at pb.seed. Cells run independently across `workers` threads;
// results are ordered by (sampler, seed) regardless of scheduling.
// Throws std::invalid_argument for fewer than two seeds.
BenchResult bench_sampler(const Problem& pb, int n_seeds, int workers = 1);

// traces.csv (per improvement event) and summary.csv (per sampler).
void export_bench(const BenchResult& b, const std::string& dir);

// Rebuilds a dynamic trajectory from an exported CSV for re-validation.
opt::Trajectory trajectory_from_file(const std::string& path);

}  // namespace plp::harness
