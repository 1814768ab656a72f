#pragma once

#include "plp/types.hpp"

namespace plp::model {

// Motor forces map to a body wrench (collective thrust, body torques) through
// a fixed X-configuration mixer. Row order: thrust, roll, pitch, yaw.
Eigen::Matrix4d mixing_matrix(const UavParams& uav);

struct Wrench {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();
};

Wrench wrench_from_motors(const UavParams& uav, const Vec4& motors);

// Equal motor forces that hold the rigidly hanging system still: each robot
// carries its own weight plus an equal share of the payload through a vertical
// cable. Throws std::domain_error if that force is outside the motor limits.
Control hover_control(const SystemParams& p);

// Collective thrust robot i needs at that hover.
double hover_thrust(const SystemParams& p, int i);

// Continuous-time accelerations of the coupled payload/cable/robot system.
Accel continuous_accel(const SystemParams& p, const FullState& x, const Control& u);

// Tangent-space dimensions: 3 coordinates per rotation and per cable
// direction, so the chart stays square and free of unit-norm constraints.
inline int tangent_dim(int n) { return 6 + 12 * n; }
inline int control_dim(int n) { return 4 * n; }

// Chart around x: additive on vectors, normalize(q + d) on cable directions,
// right-multiplied exponential on orientations.
FullState retract(const FullState& x, const VecX& delta);

// Chart coordinates of a around b. Inverse of retract in the sense
// retract(b, local_diff(a, b)) == a (exactly, up to floating point).
VecX local_diff(const FullState& a, const FullState& b);

// One explicit Euler step. Positions integrate the pre-step velocity; cable
// directions and orientations advance along the exact flow of their current
// angular velocity, which keeps them on their manifolds to machine precision.
FullState step(const SystemParams& p, const FullState& x, const Control& u, double dt);

struct AccelJacobian {
  MatX d_dx;  // (3 + 6n) x tangent_dim
  MatX d_du;  // (3 + 6n) x control_dim
};

AccelJacobian accel_jacobian(const SystemParams& p, const FullState& x, const Control& u);

struct StepJacobians {
  MatX A;  // tangent_dim x tangent_dim
  MatX B;  // tangent_dim x control_dim
};

// Analytic chart-to-chart derivatives of step().
StepJacobians step_jacobians(const SystemParams& p, const FullState& x, const Control& u,
                             double dt);

// Central-difference reference for the same derivatives.
StepJacobians step_jacobians_fd(const SystemParams& p, const FullState& x, const Control& u,
                                double dt, double h = 1e-6);

}  // namespace plp::model
