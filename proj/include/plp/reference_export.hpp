#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plp/geom_planner.hpp"
#include "plp/traj_opt.hpp"
#include "plp/types.hpp"

namespace plp::ctrlref {

// One controller reference row. mu0_i = -T_i q_i by construction.
struct RefStep {
  double t = 0.0;
  Vec3 p0 = Vec3::Zero();
  Vec3 v0 = Vec3::Zero();
  std::vector<Vec3> q;       // cable directions
  std::vector<Vec3> w;       // cable angular velocities
  std::vector<Quat> rot;     // robot orientations
  std::vector<Vec3> omega;   // robot body rates
  std::vector<Vec4> motors;  // per-rotor forces
  std::vector<Vec3> mu0;     // reference cable forces
  std::vector<double> tension;
};

struct ControllerReference {
  double dt = 0.0;
  int n = 0;
  std::vector<RefStep> steps;
};

// Robot acceleration implied by the payload acceleration and the cable rates.
Vec3 uav_reference_acceleration(const Vec3& payload_acc, const Vec3& q, const Vec3& w,
                                const Vec3& wdot, const Vec3& qdot, double cable_length);

// Tension recovered from the force balance on robot i: the part of the
// required force its thrust does not provide must come through the cable.
double cable_tension(const SystemParams& p, int i, const Vec3& uav_acc,
                     double collective_thrust, const Quat& rot);

// Tensions and reference cable forces for every step. The geometric variant
// keeps robots level with static hover thrust; cable angular accelerations
// then follow from the payload acceleration alone, so a resting reference
// yields resting robots.
ControllerReference reference_cable_forces(const geom::ReferenceTrajectory& ref,
                                           const SystemParams& p);
ControllerReference reference_cable_forces(const opt::Trajectory& traj, const SystemParams& p);

// Force-allocation tracking objective,
// c = 1/2 sum_i ||mu_d_i||^2 + lambda sum_i ||mu0_i - mu_d_i||^2.
double qp_tracking_cost(const std::vector<Vec3>& mu_d, const std::vector<Vec3>& mu0,
                        double lambda = 100.0);

struct ExportMeta {
  std::string source;  // "geometric" or "optimizer"
  std::uint64_t seed = 0;
  std::string version;
};

// Column-oriented CSV plus a YAML sidecar at <path>.meta.yaml carrying dt, n,
// the system parameters, and provenance. Values print with 17 significant
// digits so a load reproduces them exactly.
void export_trajectory(const ControllerReference& ref, const SystemParams& p,
                       const std::string& path, const ExportMeta& meta);

ControllerReference load_trajectory(const std::string& path, SystemParams* params_out = nullptr,
                                    ExportMeta* meta_out = nullptr);

}  // namespace plp::ctrlref
