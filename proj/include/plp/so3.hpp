#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace plp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Rodrigues formula, series fallback below 1e-8 rad.
inline Mat3 exp_so3(const Vec3& w) {
  const double t = w.norm();
  const Mat3 W = skew(w);
  if (t < 1e-8) return Mat3::Identity() + W + 0.5 * W * W;
  const double a = std::sin(t) / t;
  const double b = (1.0 - std::cos(t)) / (t * t);
  return Mat3::Identity() + a * W + b * W * W;
}

inline Vec3 log_so3(const Mat3& R) {
  const double c = std::min(1.0, std::max(-1.0, 0.5 * (R.trace() - 1.0)));
  const double t = std::acos(c);
  const Vec3 v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (t < 1e-8) return 0.5 * v;
  if (t > M_PI - 1e-3) {
    // The skew part vanishes near pi; the symmetric part stays well
    // conditioned: (R + R^T)/2 - cos(t) I = (1 - cos(t)) axis axis^T.
    const Mat3 M = 0.5 * (R + R.transpose()) - c * Mat3::Identity();
    int k = 0;
    M.diagonal().maxCoeff(&k);
    Vec3 ax = M.col(k).normalized();
    // Sign is ambiguous at exactly pi; pick the branch matching v.
    if (ax.dot(v) < 0.0) ax = -ax;
    return t * ax;
  }
  return (0.5 * t / std::sin(t)) * v;
}

// Right Jacobian of exp_so3: exp(w + d) ~= exp(w) exp(Jr(w) d).
inline Mat3 right_jacobian_so3(const Vec3& w) {
  const double t = w.norm();
  const Mat3 W = skew(w);
  if (t < 1e-6) return Mat3::Identity() - 0.5 * W + (1.0 / 6.0) * W * W;
  const double t2 = t * t;
  const double c1 = (1.0 - std::cos(t)) / t2;
  const double c2 = (t - std::sin(t)) / (t2 * t);
  return Mat3::Identity() - c1 * W + c2 * W * W;
}

inline Quat quat_exp(const Vec3& w) {
  const double t = w.norm();
  if (t < 1e-10) {
    Quat q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    q.normalize();
    return q;
  }
  const double half = 0.5 * t;
  const double s = std::sin(half) / t;
  return Quat(std::cos(half), s * w.x(), s * w.y(), s * w.z());
}

// Shortest rotation taking unit vector a onto unit vector b.
inline Mat3 minimal_rotation(const Vec3& a, const Vec3& b) {
  const double d = a.dot(b);
  if (d < -1.0 + 1e-12) {
    // Opposite vectors: rotate pi about any axis orthogonal to a.
    Vec3 axis = a.cross(Vec3::UnitX());
    if (axis.squaredNorm() < 1e-12) axis = a.cross(Vec3::UnitY());
    axis.normalize();
    return exp_so3(M_PI * axis);
  }
  const Vec3 c = a.cross(b);
  const double s = 1.0 / (1.0 + d);
  const Mat3 C = skew(c);
  return Mat3::Identity() + C + s * C * C;
}

// Smallest signed difference a-b on the circle, result in (-pi, pi].
inline double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * M_PI);
  if (d > M_PI) d -= 2.0 * M_PI;
  if (d <= -M_PI) d += 2.0 * M_PI;
  return d;
}

}  // namespace plp
