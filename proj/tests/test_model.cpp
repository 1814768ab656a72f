#include <doctest.h>

#include <cmath>

#include "plp/model.hpp"
#include "plp/rng.hpp"

using namespace plp;

namespace {

Vec3 random_vec(Rng& r, double scale) {
  return Vec3(r.uniform(-scale, scale), r.uniform(-scale, scale), r.uniform(-scale, scale));
}

Quat random_quat(Rng& r) {
  Quat q(r.gaussian(), r.gaussian(), r.gaussian(), r.gaussian());
  q.normalize();
  return q;
}

FullState random_state(Rng& r, int n) {
  FullState x;
  x.payload_pos = random_vec(r, 1.0);
  x.payload_vel = random_vec(r, 1.0);
  x.cables.resize(n);
  x.uavs.resize(n);
  for (int i = 0; i < n; ++i) {
    Vec3 q = random_vec(r, 1.0);
    while (q.norm() < 1e-3) q = random_vec(r, 1.0);
    x.cables[i].dir = q.normalized();
    x.cables[i].ang_vel = random_vec(r, 3.0);
    x.uavs[i].orientation = random_quat(r);
    x.uavs[i].body_rate = random_vec(r, 4.0);
  }
  return x;
}

Control random_control(Rng& r, const SystemParams& p) {
  Control u;
  u.motors.resize(p.uavs.size());
  for (int i = 0; i < p.n(); ++i)
    for (int k = 0; k < 4; ++k)
      u.motors[i](k) = r.uniform(p.uavs[i].motor_min, p.uavs[i].motor_max);
  return u;
}

FullState hang_equilibrium(int n) {
  FullState x;
  x.payload_pos = Vec3(0.2, -0.1, 0.7);
  x.cables.resize(n);
  x.uavs.resize(n);
  return x;  // defaults: vertical cables, identity orientations, zero rates
}

}  // namespace

TEST_CASE("hover force matches the hanging weight split") {
  const SystemParams p = SystemParams::defaults(2);
  // Robot weight plus half the payload: (0.034 + 0.005) * 9.81.
  CHECK(model::hover_thrust(p, 0) == doctest::Approx(0.38259).epsilon(1e-12));
  const Control u = model::hover_control(p);
  for (int k = 0; k < 4; ++k)
    CHECK(u.motors[0](k) == doctest::Approx(0.38259 / 4.0).epsilon(1e-12));
  CHECK(u.motors[0](0) == doctest::Approx(0.09565).epsilon(1e-3));

  SystemParams weak = p;
  for (auto& uav : weak.uavs) uav.motor_max = 0.05;
  CHECK_THROWS_AS((void)model::hover_control(weak), std::domain_error);
}

TEST_CASE("mixer: equal motors give pure thrust, wrench is linear") {
  const UavParams uav;
  const Vec4 u = Vec4::Constant(0.02);
  const auto w = model::wrench_from_motors(uav, u);
  CHECK(w.thrust == doctest::Approx(0.08));
  CHECK(w.torque.norm() < 1e-18);

  Rng r(3);
  for (int k = 0; k < 20; ++k) {
    Vec4 a, b;
    for (int j = 0; j < 4; ++j) {
      a(j) = r.uniform(0.0, 0.1);
      b(j) = r.uniform(0.0, 0.1);
    }
    const auto wa = model::wrench_from_motors(uav, a);
    const auto wb = model::wrench_from_motors(uav, b);
    const auto wab = model::wrench_from_motors(uav, a + b);
    CHECK(wab.thrust == doctest::Approx(wa.thrust + wb.thrust));
    CHECK((wab.torque - wa.torque - wb.torque).norm() < 1e-15);
  }

  // Sign conventions: front pair (0,1) vs back pair (2,3) tilts about x.
  const auto roll = model::wrench_from_motors(uav, Vec4(0.0, 0.0, 0.05, 0.05));
  CHECK(roll.torque.x() > 0.0);
  CHECK(roll.torque.y() == doctest::Approx(0.0));
  const auto yaw = model::wrench_from_motors(uav, Vec4(0.0, 0.05, 0.0, 0.05));
  CHECK(yaw.torque.z() > 0.0);
}

TEST_CASE("hanging equilibrium is a fixed point of step") {
  for (int n : {2, 3}) {
    const SystemParams p = SystemParams::defaults(n);
    const FullState x = hang_equilibrium(n);
    const Control u = model::hover_control(p);
    FullState y = model::step(p, x, u, 0.01);
    CHECK(model::local_diff(y, x).lpNorm<Eigen::Infinity>() < 1e-12);
    // Stays put over many steps too.
    for (int k = 0; k < 1000; ++k) y = model::step(p, y, u, 0.01);
    CHECK(model::local_diff(y, x).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("zero thrust, still cables: payload free-falls") {
  const SystemParams p = SystemParams::defaults(2);
  FullState x = hang_equilibrium(2);
  x.cables[0].dir = Vec3(0.3, 0.1, -1.0).normalized();
  const Accel a = model::continuous_accel(p, x, Control::zeros(2));
  CHECK((a.payload_acc - Vec3(0.0, 0.0, -p.gravity)).norm() < 1e-12);
}

TEST_CASE("position integrates the pre-step velocity") {
  const SystemParams p = SystemParams::defaults(2);
  FullState x = hang_equilibrium(2);
  x.payload_vel = Vec3(1.0, -2.0, 0.5);
  const FullState y = model::step(p, x, Control::zeros(2), 0.1);
  CHECK((y.payload_pos - (x.payload_pos + 0.1 * x.payload_vel)).norm() < 1e-15);
}

TEST_CASE("retract and local_diff are consistent charts") {
  Rng r(9);
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + (k % 2);
    const FullState a = random_state(r, n);
    const FullState b = random_state(r, n);
    const VecX d = model::local_diff(a, b);
    const FullState a2 = model::retract(b, d);
    CHECK(model::local_diff(a2, a).lpNorm<Eigen::Infinity>() < 1e-9);
  }
  // Zero increment is the identity.
  const FullState x = random_state(r, 2);
  const FullState y = model::retract(x, VecX::Zero(model::tangent_dim(2)));
  CHECK(model::local_diff(y, x).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("manifold norms survive long rollouts") {
  const SystemParams p = SystemParams::defaults(2);
  Rng r(17);
  FullState x = hang_equilibrium(2);
  x.cables[0].dir = Vec3(0.2, 0.0, -1.0).normalized();
  x.cables[1].dir = Vec3(-0.2, 0.1, -1.0).normalized();
  const Control hover = model::hover_control(p);
  for (int k = 0; k < 10000; ++k) {
    Control u = hover;
    // Wiggle the motors so the rotations actually move.
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j)
        u.motors[i](j) += 0.003 * std::sin(0.01 * k + i + j) + 0.001 * r.uniform();
    x = model::step(p, x, u, 1e-3);
    if (k % 1000 == 0 || k == 9999) {
      for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(x.cables[i].dir.norm() - 1.0) < 1e-9);
        CHECK(std::abs(x.uavs[i].orientation.norm() - 1.0) < 1e-9);
      }
    }
  }
  CHECK(x.payload_pos.allFinite());
}

TEST_CASE("analytic step jacobians match central differences") {
  Rng r(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = (trial % 3 == 0) ? 3 : 2;
    const SystemParams p = SystemParams::defaults(n);
    const FullState x = random_state(r, n);
    const Control u = random_control(r, p);
    const double dt = (trial % 2 == 0) ? 0.01 : 0.05;

    const auto an = model::step_jacobians(p, x, u, dt);
    const auto fd = model::step_jacobians_fd(p, x, u, dt);

    const double sa = std::max(1.0, fd.A.cwiseAbs().maxCoeff());
    const double sb = std::max(1.0, fd.B.cwiseAbs().maxCoeff());
    const double ea = (an.A - fd.A).cwiseAbs().maxCoeff() / sa;
    const double eb = (an.B - fd.B).cwiseAbs().maxCoeff() / sb;
    CAPTURE(trial);
    CHECK(ea < 1e-4);
    CHECK(eb < 1e-4);
  }
}

TEST_CASE("zero dt jacobian is the chart projection") {
  // At dt=0 the step is the identity map; its derivative through the charts
  // is the identity except on cable-direction blocks, where the chart itself
  // projects increments onto the tangent plane.
  const SystemParams p = SystemParams::defaults(2);
  Rng r(31);
  const FullState x = random_state(r, 2);
  const Control u = random_control(r, p);
  const auto an = model::step_jacobians(p, x, u, 0.0);
  MatX expected = MatX::Identity(model::tangent_dim(2), model::tangent_dim(2));
  for (int i = 0; i < 2; ++i) {
    const Vec3& q = x.cables[i].dir;
    expected.block<3, 3>(6 + 12 * i, 6 + 12 * i) = Mat3::Identity() - q * q.transpose();
  }
  CHECK((an.A - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(an.B.cwiseAbs().maxCoeff() < 1e-12);
  const auto fd = model::step_jacobians_fd(p, x, u, 0.0);
  CHECK((fd.A - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("accel jacobian dimensions and decoupled rotation rows") {
  const SystemParams p = SystemParams::defaults(3);
  Rng r(37);
  const FullState x = random_state(r, 3);
  const Control u = random_control(r, p);
  const auto j = model::accel_jacobian(p, x, u);
  CHECK(j.d_dx.rows() == 3 + 6 * 3);
  CHECK(j.d_dx.cols() == model::tangent_dim(3));
  CHECK(j.d_du.cols() == 12);
  // Body-rate dynamics of robot i depend only on its own rate and motors.
  for (int i = 0; i < 3; ++i) {
    const int row = 3 + 9 + 3 * i;
    for (int j2 = 0; j2 < 3; ++j2) {
      if (j2 == i) continue;
      CHECK(j.d_dx.block<3, 3>(row, 6 + 12 * j2 + 9).cwiseAbs().maxCoeff() == 0.0);
      CHECK(j.d_du.block<3, 4>(row, 4 * j2).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}
