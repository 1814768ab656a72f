#pragma once

#include <limits>
#include <vector>

#include "plp/geom_planner.hpp"
#include "plp/model.hpp"
#include "plp/world.hpp"

namespace plp::opt {

struct OptProblem {
  SystemParams params;
  world::Environment env;
  FullState x_start;
  FullState x_goal;
  int steps = 2;      // control intervals; states run 0..steps
  double dt0 = 0.009; // proximal time step the duration term pulls toward
  double beta1 = 0.02;
  double beta2 = 5e-4;
  double w_goal = 1e3;
  double w_bound = 1e2;
  double w_coll = 1e3;
  double margin = 0.02;  // collision penalty turns on below this clearance
  double goal_tolerance = 0.05;

  void validate() const;
};

struct Diagnostics {
  double total_cost = 0.0;
  double max_defect = 0.0;
  double min_distance = std::numeric_limits<double>::infinity();
  double goal_error = std::numeric_limits<double>::infinity();
};

struct Trajectory {
  double dt = 0.0;
  std::vector<FullState> X;  // steps + 1 states
  std::vector<Control> U;    // steps controls
  Diagnostics diag;
};

struct Guess {
  std::vector<FullState> X;
  std::vector<Control> U;
};

// Positions and cable directions from the reference; every velocity zeroed,
// robots level, hover forces everywhere.
Guess build_initial_guess(const geom::ReferenceTrajectory& ref, const SystemParams& p);

// Running objective: time-step proximity, control effort, body accelerations.
double stage_cost(const OptProblem& pb, const FullState& x, const Control& u, double dt);

// State-space penalties: clearance and workspace bounds at every step, plus
// the goal residual (payload position/velocity, cable directions) at k == steps.
double penalty_cost(const OptProblem& pb, const FullState& x, int k);

// Squared motor-limit violations. Kept apart from penalty_cost so the
// state-only penalty signature stays clean.
double control_penalty(const OptProblem& pb, const Control& u);

double total_cost(const OptProblem& pb, const std::vector<FullState>& X,
                  const std::vector<Control>& U, double dt);

struct CostDerivs {
  VecX lx, lu;
  MatX lxx, luu, lux;
};

// Tangent-space derivatives of the per-step cost, Gauss-Newton Hessians.
// k == steps gives the terminal cost; u is ignored there.
CostDerivs cost_derivatives(const OptProblem& pb, const FullState& x, const Control& u,
                            double dt, int k);

struct IterLog {
  int iter = 0;
  double cost = 0.0;
  double defect = 0.0;
  double min_dist = 0.0;
  double dt = 0.0;
};

struct SolveOptions {
  int max_iters = 500;
  double tol = 1e-6;  // relative cost decrease
  std::vector<IterLog>* log = nullptr;
};

// Regularized backward/forward sweeps at a fixed time step. Every accepted
// iterate is an exact rollout, so dynamics hold by construction; accepted
// costs never increase. A non-finite excursion keeps the last finite iterate.
Trajectory solve_ddp(const OptProblem& pb, const Guess& guess, double dt,
                     const SolveOptions& opts = {});

// Coordinate descent between solve_ddp and a golden-section search over the
// time step in [0.2, 5] x dt0, plus one penalty-weight escalation round if
// the goal is missed.
Trajectory optimize(const OptProblem& pb, const Guess& guess, const SolveOptions& opts = {});

// Re-optimizes with dt0 shrunk by `shrink` each round, warm-starting from the
// previous solution. Returns every iterate, first to last.
std::vector<Trajectory> iterative_refine(const OptProblem& pb, const Guess& guess,
                                         int n_iters, double shrink,
                                         const SolveOptions& opts = {});

}  // namespace plp::opt
