#pragma once

#include <cstdint>
#include <vector>

#include "plp/rng.hpp"
#include "plp/types.hpp"
#include "plp/world.hpp"

namespace plp::geom {

// Load-sharing effort of a formation: mean over cables of the inverse
// alignment with straight-down. 1 when every cable hangs vertical, growing
// without bound as cables approach horizontal. Throws std::domain_error when
// any cable's alignment falls below eps_tilt. An empty formation scores 1.
double formation_force(const std::vector<Vec3>& cable_dirs, double eps_tilt = 0.1);
double formation_force(const GeomState& s, double eps_tilt = 0.1);

// Inverse of azel_to_unit on the lower hemisphere; at the straight-down pole
// the azimuth is fixed to 0.
void unit_to_azel(const Vec3& q, double& azimuth, double& elevation);

// Force-weighted travel of payload and robots between two formations.
double edge_cost(const GeomState& a, const GeomState& b, const SystemParams& p,
                 double beta = 0.5, double eps_tilt = 0.1);

// Nearest-neighbor metric: payload translation plus weighted angular travel.
double geom_distance(const GeomState& a, const GeomState& b, double angle_weight);

struct WitnessSet {
  std::vector<GeomState> formations;  // all share the start payload position
  bool complete = true;
};

struct PlannerConfig {
  double timeout_s = 60.0;
  std::uint64_t max_iters = 60000;
  int witness_count = 10;
  std::uint64_t witness_attempts_per = 1000;  // budget = this * witness_count
  double sigma = 0.2;                         // rad
  double goal_bias = 0.1;
  double goal_tolerance = 0.05;  // m, payload position
  double max_step = 0.6;         // composite-metric steering cap
  double rewire_gamma = 2.0;
  double angle_weight = 0.5;
  double eps_tilt = 0.1;
  double resolution = 0.02;
  double beta = 0.5;
  enum class Sampler { Witness, Uniform } sampler = Sampler::Witness;
  bool payload_only = false;
};

WitnessSet preprocess_witnesses(int count, const GeomState& start,
                                const world::Environment& env, const SystemParams& p,
                                Rng& rng, const PlannerConfig& cfg = {});

GeomState sample_state(const WitnessSet& witnesses, double sigma,
                       const world::Environment& env, Rng& rng);
GeomState sample_goal(const WitnessSet& witnesses, double sigma, const Vec3& p0_goal,
                      Rng& rng);

struct GeomPath {
  std::vector<GeomState> states;
  double cost = 0.0;
};

struct TracePoint {
  double t_wall_s = 0.0;
  double best_cost = 0.0;
  std::uint64_t iter = 0;
};

struct PlanResult {
  bool solved = false;
  GeomPath path;
  std::vector<TracePoint> trace;  // appended whenever the best cost improves
  std::uint64_t iterations = 0;
  std::uint64_t node_count = 0;
  double wall_time_s = 0.0;
  double first_solution_s = -1.0;       // wall clock; depends on machine load
  std::uint64_t first_solution_iter = 0;  // deterministic counterpart
  bool witness_complete = true;
};

// Rewiring tree search over formations; deterministic for a fixed seed up to
// the wall-clock fields. Stops at max_iters or timeout, whichever first.
PlanResult plan_geometric(const GeomState& start, const Vec3& goal_payload,
                          const world::Environment& env, const SystemParams& p,
                          const PlannerConfig& cfg, std::uint64_t seed);

// Zero-attitude reference: robots level, cable rates zero, payload velocity
// by central differences of the sampled positions.
struct ReferenceTrajectory {
  double dt = 0.01;
  std::vector<FullState> states;
};

ReferenceTrajectory path_to_reference(const GeomPath& path, double dt, double speed,
                                      double angle_weight = 0.5);

}  // namespace plp::geom
