#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>
#include <vector>

#include "plp/so3.hpp"

namespace plp {

using Vec4 = Eigen::Vector4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

struct UavParams {
  double mass = 0.034;
  Vec3 inertia_diag = Vec3(16.571710e-6, 16.655602e-6, 29.261652e-6);
  double cable_length = 0.5;
  double arm_length = 0.046;
  double torque_coeff = 0.006;
  double motor_min = 0.0;
  double motor_max = 0.14;
  double radius = 0.1;
};

struct SystemParams {
  double payload_mass = 0.01;
  double payload_radius = 0.01;
  double cable_radius = 0.005;
  double gravity = 9.81;
  std::vector<UavParams> uavs;

  int n() const { return static_cast<int>(uavs.size()); }

  double total_mass() const {
    double m = payload_mass;
    for (const auto& u : uavs) m += u.mass;
    return m;
  }

  // n identical quadrotors on equal-length cables.
  static SystemParams defaults(int n) {
    SystemParams p;
    p.uavs.assign(static_cast<std::size_t>(n), UavParams{});
    p.validate();
    return p;
  }

  void validate() const {
    if (uavs.size() < 2) throw std::invalid_argument("need at least two robots");
    if (payload_mass <= 0.0) throw std::invalid_argument("payload mass must be positive");
    if (gravity <= 0.0) throw std::invalid_argument("gravity must be positive");
    for (const auto& u : uavs) {
      if (u.mass <= 0.0) throw std::invalid_argument("robot mass must be positive");
      if (u.cable_length <= 0.0) throw std::invalid_argument("cable length must be positive");
      if (u.motor_max <= u.motor_min || u.motor_min < 0.0)
        throw std::invalid_argument("motor force limits out of order");
      if ((u.inertia_diag.array() <= 0.0).any())
        throw std::invalid_argument("inertia must be positive definite");
    }
  }
};

// Cable i: unit vector from the robot toward the payload plus its angular rate.
struct CableState {
  Vec3 dir = -Vec3::UnitZ();
  Vec3 ang_vel = Vec3::Zero();
};

struct UavState {
  Quat orientation = Quat::Identity();
  Vec3 body_rate = Vec3::Zero();
};

struct FullState {
  Vec3 payload_pos = Vec3::Zero();
  Vec3 payload_vel = Vec3::Zero();
  std::vector<CableState> cables;
  std::vector<UavState> uavs;

  int n() const { return static_cast<int>(cables.size()); }
};

// Robot i hangs at the far end of its cable.
inline Vec3 uav_position(const FullState& x, const SystemParams& p, int i) {
  return x.payload_pos - p.uavs[i].cable_length * x.cables[i].dir;
}

// Four motor forces per robot.
struct Control {
  std::vector<Vec4> motors;

  int n() const { return static_cast<int>(motors.size()); }

  static Control zeros(int n) {
    Control c;
    c.motors.assign(static_cast<std::size_t>(n), Vec4::Zero());
    return c;
  }

  VecX stacked() const {
    VecX u(4 * motors.size());
    for (std::size_t i = 0; i < motors.size(); ++i) u.segment<4>(4 * i) = motors[i];
    return u;
  }

  static Control from_stacked(const VecX& u) {
    Control c;
    c.motors.resize(static_cast<std::size_t>(u.size() / 4));
    for (std::size_t i = 0; i < c.motors.size(); ++i) c.motors[i] = u.segment<4>(4 * i);
    return c;
  }
};

// Second-order terms of the coupled dynamics.
struct Accel {
  Vec3 payload_acc = Vec3::Zero();
  std::vector<Vec3> cable_ang_acc;
  std::vector<Vec3> uav_ang_acc;

  VecX stacked() const {
    const std::size_t n = cable_ang_acc.size();
    VecX a(3 + 6 * n);
    a.segment<3>(0) = payload_acc;
    for (std::size_t i = 0; i < n; ++i) a.segment<3>(3 + 3 * i) = cable_ang_acc[i];
    for (std::size_t i = 0; i < n; ++i) a.segment<3>(3 + 3 * n + 3 * i) = uav_ang_acc[i];
    return a;
  }
};

// Planner-level state: payload position plus one (azimuth, elevation) pair per
// cable. Elevation 0 is horizontal, pi/2 points the cable straight down, and
// the direction convention matches CableState::dir (robot toward payload).
struct CableAngles {
  double azimuth = 0.0;
  double elevation = M_PI / 4.0;
};

struct GeomState {
  Vec3 payload_pos = Vec3::Zero();
  std::vector<CableAngles> cables;

  int n() const { return static_cast<int>(cables.size()); }
};

inline Vec3 azel_to_unit(double azimuth, double elevation) {
  const double cg = std::cos(elevation);
  return Vec3(-std::cos(azimuth) * cg, -std::sin(azimuth) * cg, -std::sin(elevation));
}

// Zero-velocity hover lift of a planner state.
inline FullState full_state_from_geom(const GeomState& g) {
  FullState x;
  x.payload_pos = g.payload_pos;
  x.cables.resize(g.cables.size());
  x.uavs.resize(g.cables.size());
  for (std::size_t i = 0; i < g.cables.size(); ++i)
    x.cables[i].dir = azel_to_unit(g.cables[i].azimuth, g.cables[i].elevation);
  return x;
}

}  // namespace plp
