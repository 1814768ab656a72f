#include "plp/model.hpp"

#include <cmath>
#include <stdexcept>

namespace plp::model {

Eigen::Matrix4d mixing_matrix(const UavParams& uav) {
  const double a = uav.arm_length / std::sqrt(2.0);
  const double k = uav.torque_coeff;
  Eigen::Matrix4d b;
  b << 1.0, 1.0, 1.0, 1.0,
      -a, -a, a, a,
      -a, a, a, -a,
      -k, k, -k, k;
  return b;
}

Wrench wrench_from_motors(const UavParams& uav, const Vec4& motors) {
  const Vec4 eta = mixing_matrix(uav) * motors;
  Wrench w;
  w.thrust = eta(0);
  w.torque = eta.tail<3>();
  return w;
}

double hover_thrust(const SystemParams& p, int i) {
  return (p.uavs[i].mass + p.payload_mass / p.n()) * p.gravity;
}

Control hover_control(const SystemParams& p) {
  Control u;
  u.motors.resize(p.uavs.size());
  for (int i = 0; i < p.n(); ++i) {
    const double per_motor = hover_thrust(p, i) / 4.0;
    if (per_motor < p.uavs[i].motor_min || per_motor > p.uavs[i].motor_max)
      throw std::domain_error("hover thrust outside motor limits");
    u.motors[i].setConstant(per_motor);
  }
  return u;
}

Accel continuous_accel(const SystemParams& p, const FullState& x, const Control& u) {
  const int n = p.n();
  const double mt = p.total_mass();
  const Vec3 ge3(0.0, 0.0, p.gravity);

  Accel a;
  a.cable_ang_acc.resize(n);
  a.uav_ang_acc.resize(n);

  Vec3 rhs = Vec3::Zero();
  std::vector<double> fc(n);
  std::vector<Vec3> zdir(n);
  for (int i = 0; i < n; ++i) {
    const auto& uav = p.uavs[i];
    fc[i] = u.motors[i].sum();
    zdir[i] = x.uavs[i].orientation * Vec3::UnitZ();
    const Vec3& q = x.cables[i].dir;
    rhs += fc[i] * zdir[i] - uav.mass * uav.cable_length * x.cables[i].ang_vel.squaredNorm() * q;
  }
  a.payload_acc = rhs / mt - ge3;

  const Vec3 c = a.payload_acc + ge3;
  for (int i = 0; i < n; ++i) {
    const auto& uav = p.uavs[i];
    const Mat3 qh = skew(x.cables[i].dir);
    a.cable_ang_acc[i] = qh * c / uav.cable_length -
                         (fc[i] / (uav.mass * uav.cable_length)) * (qh * zdir[i]);

    const Vec3 J = uav.inertia_diag;
    const Vec3& om = x.uavs[i].body_rate;
    const Vec3 jom(J.x() * om.x(), J.y() * om.y(), J.z() * om.z());
    const Vec3 torque = wrench_from_motors(uav, u.motors[i]).torque;
    const Vec3 rot = jom.cross(om) + torque;
    a.uav_ang_acc[i] = Vec3(rot.x() / J.x(), rot.y() / J.y(), rot.z() / J.z());
  }
  return a;
}

FullState retract(const FullState& x, const VecX& delta) {
  const int n = x.n();
  FullState y = x;
  y.payload_pos += delta.segment<3>(0);
  y.payload_vel += delta.segment<3>(3);
  for (int i = 0; i < n; ++i) {
    const int o = 6 + 12 * i;
    y.cables[i].dir = (x.cables[i].dir + delta.segment<3>(o)).normalized();
    y.cables[i].ang_vel += delta.segment<3>(o + 3);
    y.uavs[i].orientation = x.uavs[i].orientation * quat_exp(delta.segment<3>(o + 6));
    y.uavs[i].orientation.normalize();
    y.uavs[i].body_rate += delta.segment<3>(o + 9);
  }
  return y;
}

VecX local_diff(const FullState& a, const FullState& b) {
  const int n = a.n();
  VecX d(tangent_dim(n));
  d.segment<3>(0) = a.payload_pos - b.payload_pos;
  d.segment<3>(3) = a.payload_vel - b.payload_vel;
  for (int i = 0; i < n; ++i) {
    const int o = 6 + 12 * i;
    d.segment<3>(o) = a.cables[i].dir - b.cables[i].dir;
    d.segment<3>(o + 3) = a.cables[i].ang_vel - b.cables[i].ang_vel;
    const Mat3 rel = b.uavs[i].orientation.toRotationMatrix().transpose() *
                     a.uavs[i].orientation.toRotationMatrix();
    d.segment<3>(o + 6) = log_so3(rel);
    d.segment<3>(o + 9) = a.uavs[i].body_rate - b.uavs[i].body_rate;
  }
  return d;
}

FullState step(const SystemParams& p, const FullState& x, const Control& u, double dt) {
  const int n = p.n();
  const Accel a = continuous_accel(p, x, u);

  FullState y = x;
  y.payload_pos = x.payload_pos + dt * x.payload_vel;
  y.payload_vel = x.payload_vel + dt * a.payload_acc;
  for (int i = 0; i < n; ++i) {
    const Vec3& w = x.cables[i].ang_vel;
    y.cables[i].dir = (exp_so3(dt * w) * x.cables[i].dir).normalized();
    y.cables[i].ang_vel = w + dt * a.cable_ang_acc[i];
    y.uavs[i].orientation = x.uavs[i].orientation * quat_exp(dt * x.uavs[i].body_rate);
    y.uavs[i].orientation.normalize();
    y.uavs[i].body_rate = x.uavs[i].body_rate + dt * a.uav_ang_acc[i];
  }
  return y;
}

AccelJacobian accel_jacobian(const SystemParams& p, const FullState& x, const Control& u) {
  const int n = p.n();
  const double mt = p.total_mass();
  const int nx = tangent_dim(n);
  const int nu = control_dim(n);
  const int na = 3 + 6 * n;
  const Vec3 ge3(0.0, 0.0, p.gravity);

  AccelJacobian jac;
  jac.d_dx = MatX::Zero(na, nx);
  jac.d_du = MatX::Zero(na, nu);

  std::vector<double> fc(n);
  std::vector<Vec3> zdir(n);
  std::vector<Mat3> rot(n), proj(n);
  for (int i = 0; i < n; ++i) {
    fc[i] = u.motors[i].sum();
    rot[i] = x.uavs[i].orientation.toRotationMatrix();
    zdir[i] = rot[i].col(2);
    const Vec3& q = x.cables[i].dir;
    proj[i] = Mat3::Identity() - q * q.transpose();
  }

  const Accel acc = continuous_accel(p, x, u);
  const Vec3 c = acc.payload_acc + ge3;

  // Payload acceleration block, with chart projection folded into the cable
  // direction columns.
  std::vector<Mat3> da_dq(n), da_dw(n), da_dR(n);
  std::vector<Eigen::Matrix<double, 3, 4>> da_du(n);
  const Mat3 e3h = skew(Vec3::UnitZ());
  for (int j = 0; j < n; ++j) {
    const auto& uav = p.uavs[j];
    const double ml = uav.mass * uav.cable_length;
    da_dq[j] = (-(ml * x.cables[j].ang_vel.squaredNorm()) / mt) * proj[j];
    da_dw[j] = (-2.0 * ml / mt) * x.cables[j].dir * x.cables[j].ang_vel.transpose();
    da_dR[j] = (-fc[j] / mt) * rot[j] * e3h;
    da_du[j] = (zdir[j] / mt) * Eigen::RowVector4d::Ones();

    const int o = 6 + 12 * j;
    jac.d_dx.block<3, 3>(0, o) = da_dq[j];
    jac.d_dx.block<3, 3>(0, o + 3) = da_dw[j];
    jac.d_dx.block<3, 3>(0, o + 6) = da_dR[j];
    jac.d_du.block<3, 4>(0, 4 * j) = da_du[j];
  }

  // Cable angular accelerations: each row couples to every state through the
  // shared payload acceleration, plus direct terms for its own cable and robot.
  for (int i = 0; i < n; ++i) {
    const auto& uav = p.uavs[i];
    const double l = uav.cable_length;
    const double ml = uav.mass * l;
    const Mat3 qh = skew(x.cables[i].dir);
    const int r = 3 + 3 * i;

    for (int j = 0; j < n; ++j) {
      const int o = 6 + 12 * j;
      jac.d_dx.block<3, 3>(r, o) = qh * da_dq[j] / l;
      jac.d_dx.block<3, 3>(r, o + 3) = qh * da_dw[j] / l;
      jac.d_dx.block<3, 3>(r, o + 6) = qh * da_dR[j] / l;
      jac.d_du.block<3, 4>(r, 4 * j) = qh * da_du[j] / l;
    }
    // Direct dependence on the own cable direction; projected onto the chart.
    const Mat3 own = -skew(c) / l + (fc[i] / ml) * skew(zdir[i]);
    jac.d_dx.block<3, 3>(r, 6 + 12 * i) += own * proj[i];
    // Direct dependence on the own thrust direction and motor forces.
    jac.d_dx.block<3, 3>(r, 6 + 12 * i + 6) += (fc[i] / ml) * qh * rot[i] * e3h;
    jac.d_du.block<3, 4>(r, 4 * i) += (-1.0 / ml) * (qh * zdir[i]) * Eigen::RowVector4d::Ones();
  }

  // Rotational dynamics are decoupled per robot.
  for (int i = 0; i < n; ++i) {
    const auto& uav = p.uavs[i];
    const Vec3 J = uav.inertia_diag;
    const Mat3 Jm = J.asDiagonal();
    const Mat3 Jinv = J.cwiseInverse().asDiagonal();
    const Vec3& om = x.uavs[i].body_rate;
    const Vec3 jom = Jm * om;
    const int r = 3 + 3 * n + 3 * i;
    jac.d_dx.block<3, 3>(r, 6 + 12 * i + 9) = Jinv * (skew(jom) - skew(om) * Jm);
    jac.d_du.block<3, 4>(r, 4 * i) = Jinv * mixing_matrix(uav).bottomRows<3>();
  }
  return jac;
}

StepJacobians step_jacobians(const SystemParams& p, const FullState& x, const Control& u,
                             double dt) {
  const int n = p.n();
  const int nx = tangent_dim(n);
  const int nu = control_dim(n);
  const AccelJacobian jac = accel_jacobian(p, x, u);

  StepJacobians s;
  s.A = MatX::Zero(nx, nx);
  s.B = MatX::Zero(nx, nu);

  s.A.block<3, 3>(0, 0) = Mat3::Identity();
  s.A.block<3, 3>(0, 3) = dt * Mat3::Identity();
  s.A.block<3, 3>(3, 3) = Mat3::Identity();
  s.A.block(3, 0, 3, nx) += dt * jac.d_dx.topRows<3>();
  s.B.block(3, 0, 3, nu) = dt * jac.d_du.topRows<3>();

  for (int i = 0; i < n; ++i) {
    const int o = 6 + 12 * i;
    const Vec3& q = x.cables[i].dir;
    const Vec3& w = x.cables[i].ang_vel;
    const Mat3 proj = Mat3::Identity() - q * q.transpose();
    const Mat3 flow = exp_so3(dt * w);
    s.A.block<3, 3>(o, o) = flow * proj;
    s.A.block<3, 3>(o, o + 3) = -dt * flow * skew(q) * right_jacobian_so3(dt * w);

    s.A.block<3, 3>(o + 3, o + 3) = Mat3::Identity();
    s.A.block(o + 3, 0, 3, nx) += dt * jac.d_dx.middleRows<3>(3 + 3 * i);
    s.B.block(o + 3, 0, 3, nu) = dt * jac.d_du.middleRows<3>(3 + 3 * i);

    const Vec3& om = x.uavs[i].body_rate;
    s.A.block<3, 3>(o + 6, o + 6) = exp_so3(dt * om).transpose();
    s.A.block<3, 3>(o + 6, o + 9) = dt * right_jacobian_so3(dt * om);

    s.A.block<3, 3>(o + 9, o + 9) = Mat3::Identity();
    s.A.block(o + 9, 0, 3, nx) += dt * jac.d_dx.middleRows<3>(3 + 3 * n + 3 * i);
    s.B.block(o + 9, 0, 3, nu) = dt * jac.d_du.middleRows<3>(3 + 3 * n + 3 * i);
  }
  return s;
}

StepJacobians step_jacobians_fd(const SystemParams& p, const FullState& x, const Control& u,
                                double dt, double h) {
  const int n = p.n();
  const int nx = tangent_dim(n);
  const int nu = control_dim(n);

  StepJacobians s;
  s.A.resize(nx, nx);
  s.B.resize(nx, nu);

  for (int k = 0; k < nx; ++k) {
    VecX d = VecX::Zero(nx);
    d(k) = h;
    const FullState xp = step(p, retract(x, d), u, dt);
    d(k) = -h;
    const FullState xm = step(p, retract(x, d), u, dt);
    s.A.col(k) = local_diff(xp, xm) / (2.0 * h);
  }
  const VecX u0 = u.stacked();
  for (int k = 0; k < nu; ++k) {
    VecX up = u0, um = u0;
    up(k) += h;
    um(k) -= h;
    const FullState xp = step(p, x, Control::from_stacked(up), dt);
    const FullState xm = step(p, x, Control::from_stacked(um), dt);
    s.B.col(k) = local_diff(xp, xm) / (2.0 * h);
  }
  return s;
}

}  // namespace plp::model
