#include "plp/world.hpp"

#include <algorithm>
#include <cmath>

namespace plp::world {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower bound on the distance between two axis-aligned boxes.
double aabb_gap(const Vec3& lo1, const Vec3& hi1, const Vec3& lo2, const Vec3& hi2) {
  const Vec3 g = (lo1 - hi2).cwiseMax(lo2 - hi1).cwiseMax(0.0);
  return g.norm();
}

void segment_aabb(const Vec3& a, const Vec3& b, Vec3& lo, Vec3& hi) {
  lo = a.cwiseMin(b);
  hi = a.cwiseMax(b);
}

}  // namespace

Obstacle Obstacle::sphere(const Vec3& c, double r) {
  Obstacle o;
  o.shape = Shape::Sphere;
  o.center = c;
  o.radius = r;
  return o;
}

Obstacle Obstacle::box(const Vec3& c, const Vec3& half) {
  Obstacle o;
  o.shape = Shape::Box;
  o.center = c;
  o.half_extents = half;
  return o;
}

Obstacle Obstacle::cylinder(const Vec3& c, double r, double half_h) {
  Obstacle o;
  o.shape = Shape::Cylinder;
  o.center = c;
  o.radius = r;
  o.half_height = half_h;
  return o;
}

void Obstacle::aabb(Vec3& lo, Vec3& hi) const {
  Vec3 ext;
  switch (shape) {
    case Shape::Sphere: ext = Vec3::Constant(radius); break;
    case Shape::Box: ext = half_extents; break;
    case Shape::Cylinder: ext = Vec3(radius, radius, half_height); break;
  }
  lo = center - ext;
  hi = center + ext;
}

double obstacle_sdf(const Obstacle& o, const Vec3& p) {
  switch (o.shape) {
    case Obstacle::Shape::Sphere:
      return (p - o.center).norm() - o.radius;
    case Obstacle::Shape::Box: {
      const Vec3 d = (p - o.center).cwiseAbs() - o.half_extents;
      const double outside = d.cwiseMax(0.0).norm();
      const double inside = std::min(d.maxCoeff(), 0.0);
      return outside + inside;
    }
    case Obstacle::Shape::Cylinder: {
      const Vec3 r = p - o.center;
      const double dr = std::hypot(r.x(), r.y()) - o.radius;
      const double dz = std::abs(r.z()) - o.half_height;
      const double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
      const double inside = std::min(std::max(dr, dz), 0.0);
      return outside + inside;
    }
  }
  return kInf;
}

Vec3 obstacle_sdf_grad(const Obstacle& o, const Vec3& p) {
  switch (o.shape) {
    case Obstacle::Shape::Sphere: {
      const Vec3 d = p - o.center;
      const double n = d.norm();
      return n > 1e-12 ? Vec3(d / n) : Vec3::UnitZ();
    }
    case Obstacle::Shape::Box: {
      const Vec3 r = p - o.center;
      const Vec3 d = r.cwiseAbs() - o.half_extents;
      if ((d.array() > 0.0).any()) {
        Vec3 g = d.cwiseMax(0.0);
        const double n = g.norm();
        for (int k = 0; k < 3; ++k) g(k) = std::copysign(g(k), r(k));
        return n > 1e-12 ? Vec3(g / n) : Vec3::UnitZ();
      }
      int k = 0;
      d.maxCoeff(&k);
      Vec3 g = Vec3::Zero();
      g(k) = std::copysign(1.0, r(k));
      return g;
    }
    case Obstacle::Shape::Cylinder: {
      const Vec3 r = p - o.center;
      const double rn = std::hypot(r.x(), r.y());
      const Vec3 radial = rn > 1e-12 ? Vec3(r.x() / rn, r.y() / rn, 0.0) : Vec3::UnitX();
      const double dr = rn - o.radius;
      const double dz = std::abs(r.z()) - o.half_height;
      const Vec3 vertical(0.0, 0.0, std::copysign(1.0, r.z()));
      if (dr > 0.0 || dz > 0.0) {
        const Vec3 g = std::max(dr, 0.0) * radial + std::max(dz, 0.0) * vertical;
        const double n = g.norm();
        return n > 1e-12 ? Vec3(g / n) : Vec3::UnitZ();
      }
      return dr > dz ? radial : vertical;
    }
  }
  return Vec3::UnitZ();
}

double swept_obstacle_sdf(const Obstacle& o, const Vec3& a, const Vec3& b, double* t_min) {
  const double len = (b - a).norm();
  if (len < 1e-12) {
    if (t_min) *t_min = 0.0;
    return obstacle_sdf(o, a);
  }
  // The sdf of a convex shape is convex, so its restriction to the segment is
  // convex in t: bracket the minimizer with coarse samples, then refine.
  constexpr int K = 9;
  double ft[K];
  int best = 0;
  for (int k = 0; k < K; ++k) {
    const double t = static_cast<double>(k) / (K - 1);
    ft[k] = obstacle_sdf(o, a + t * (b - a));
    if (ft[k] < ft[best]) best = k;
  }
  double lo = static_cast<double>(std::max(0, best - 1)) / (K - 1);
  double hi = static_cast<double>(std::min(K - 1, best + 1)) / (K - 1);
  double flo = obstacle_sdf(o, a + lo * (b - a));
  double fhi = obstacle_sdf(o, a + hi * (b - a));
  double bt = static_cast<double>(best) / (K - 1);
  double fb = ft[best];
  for (int it = 0; it < 40 && hi - lo > 1e-10; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    const double f1 = obstacle_sdf(o, a + m1 * (b - a));
    const double f2 = obstacle_sdf(o, a + m2 * (b - a));
    if (f1 < fb) { fb = f1; bt = m1; }
    if (f2 < fb) { fb = f2; bt = m2; }
    if (f1 <= f2) {
      hi = m2;
      fhi = f2;
    } else {
      lo = m1;
      flo = f1;
    }
  }
  (void)flo;
  (void)fhi;
  if (t_min) *t_min = bt;
  return fb;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b, double* t) {
  const Vec3 ab = b - a;
  const double den = ab.squaredNorm();
  double u = den > 1e-18 ? (p - a).dot(ab) / den : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  if (t) *t = u;
  return (p - (a + u * ab)).norm();
}

double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2, double* s_out, double* t_out) {
  const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  constexpr double eps = 1e-18;
  if (a <= eps && e <= eps) {
    // Both segments are points.
  } else if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  if (s_out) *s_out = s;
  if (t_out) *t_out = t;
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

BodySet body_geometries(const FullState& x, const SystemParams& p) {
  BodySet bs;
  bs.payload = Sphere{x.payload_pos, p.payload_radius};
  const int n = x.n();
  bs.uavs.resize(n);
  bs.cables.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& uav = p.uavs[i];
    const Vec3 pos = uav_position(x, p, i);
    bs.uavs[i] = Sphere{pos, uav.radius};
    const Vec3& q = x.cables[i].dir;
    Vec3 top = pos + uav.radius * q;
    Vec3 bottom = x.payload_pos - p.payload_radius * q;
    if (uav.cable_length <= uav.radius + p.payload_radius) top = bottom;
    bs.cables[i] = Capsule{top, bottom, p.cable_radius};
  }
  return bs;
}

BodySet body_geometries(const GeomState& x, const SystemParams& p) {
  if (x.cables.empty()) return payload_body(x.payload_pos, p);
  return body_geometries(full_state_from_geom(x), p);
}

BodySet payload_body(const Vec3& p0, const SystemParams& p) {
  BodySet bs;
  bs.payload = Sphere{p0, p.payload_radius};
  return bs;
}

Contact min_contact(const BodySet& bodies, const Environment& env, double cutoff,
                    unsigned kinds) {
  Contact best;
  double pruned_bound = kInf;
  const int n = static_cast<int>(bodies.uavs.size());
  const int nobs = static_cast<int>(env.obstacles.size());

  std::vector<Vec3> olo(nobs), ohi(nobs);
  for (int j = 0; j < nobs; ++j) env.obstacles[j].aabb(olo[j], ohi[j]);

  auto consider_sphere = [&](const Sphere& s, PairKind kind, int i) {
    for (int j = 0; j < nobs; ++j) {
      const double lb = aabb_gap(s.center, s.center, olo[j], ohi[j]) - s.radius;
      if (lb >= best.dist) continue;  // cannot lower the minimum
      if (lb > cutoff) {
        pruned_bound = std::min(pruned_bound, lb);
        continue;
      }
      const double d = obstacle_sdf(env.obstacles[j], s.center) - s.radius;
      if (d < best.dist) {
        best.dist = d;
        best.kind = kind;
        best.i = i;
        best.j = j;
        best.normal = obstacle_sdf_grad(env.obstacles[j], s.center);
        best.t_i = best.t_j = 0.0;
      }
    }
  };

  if (kinds & pair_bit(PairKind::PayloadObstacle))
    consider_sphere(bodies.payload, PairKind::PayloadObstacle, 0);
  if (kinds & pair_bit(PairKind::UavObstacle))
    for (int i = 0; i < n; ++i) consider_sphere(bodies.uavs[i], PairKind::UavObstacle, i);

  for (int i = 0; (kinds & pair_bit(PairKind::CableObstacle)) &&
                  i < static_cast<int>(bodies.cables.size());
       ++i) {
    const Capsule& c = bodies.cables[i];
    Vec3 slo, shi;
    segment_aabb(c.a, c.b, slo, shi);
    for (int j = 0; j < nobs; ++j) {
      const double lb = aabb_gap(slo, shi, olo[j], ohi[j]) - c.radius;
      if (lb >= best.dist) continue;
      if (lb > cutoff) {
        pruned_bound = std::min(pruned_bound, lb);
        continue;
      }
      double t = 0.0;
      const double d = swept_obstacle_sdf(env.obstacles[j], c.a, c.b, &t) - c.radius;
      if (d < best.dist) {
        best.dist = d;
        best.kind = PairKind::CableObstacle;
        best.i = i;
        best.j = j;
        best.normal = obstacle_sdf_grad(env.obstacles[j], c.a + t * (c.b - c.a));
        best.t_i = t;
        best.t_j = 0.0;
      }
    }
  }

  for (int i = 0; (kinds & pair_bit(PairKind::UavUav)) && i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec3 diff = bodies.uavs[i].center - bodies.uavs[j].center;
      const double d = diff.norm() - bodies.uavs[i].radius - bodies.uavs[j].radius;
      if (d < best.dist) {
        best.dist = d;
        best.kind = PairKind::UavUav;
        best.i = i;
        best.j = j;
        best.normal = diff.norm() > 1e-12 ? Vec3(diff.normalized()) : Vec3::UnitZ();
        best.t_i = best.t_j = 0.0;
      }
    }
  }

  const int nc = static_cast<int>(bodies.cables.size());
  for (int i = 0; (kinds & pair_bit(PairKind::CableCable)) && i < nc; ++i) {
    for (int j = i + 1; j < nc; ++j) {
      const Capsule& ci = bodies.cables[i];
      const Capsule& cj = bodies.cables[j];
      double s = 0.0, t = 0.0;
      const double raw = segment_segment_distance(ci.a, ci.b, cj.a, cj.b, &s, &t);
      const double d = raw - ci.radius - cj.radius;
      if (d < best.dist) {
        best.dist = d;
        best.kind = PairKind::CableCable;
        best.i = i;
        best.j = j;
        const Vec3 pi = ci.a + s * (ci.b - ci.a);
        const Vec3 pj = cj.a + t * (cj.b - cj.a);
        const Vec3 diff = pi - pj;
        best.normal = diff.norm() > 1e-12 ? Vec3(diff.normalized()) : Vec3::UnitZ();
        best.t_i = s;
        best.t_j = t;
      }
    }
  }
  // Skipped pairs were all beyond the cutoff; keep the result a sound lower
  // bound by folding their best bound in when it undercuts the exact minimum.
  if (pruned_bound < best.dist) {
    best.dist = pruned_bound;
    best.kind = PairKind::None;
  }
  return best;
}

double signed_distance(const BodySet& bodies, const Environment& env) {
  return min_contact(bodies, env).dist;
}

double signed_distance(const FullState& x, const Environment& env, const SystemParams& p) {
  return signed_distance(body_geometries(x, p), env);
}

double signed_distance(const GeomState& x, const Environment& env, const SystemParams& p) {
  return signed_distance(body_geometries(x, p), env);
}

namespace {

bool common_valid(const BodySet& bodies, const Environment& env, const ValidityConfig& cfg) {
  if (!env.in_workspace(bodies.payload.center)) return false;
  for (const auto& s : bodies.uavs)
    if (!env.in_workspace(s.center)) return false;
  return min_contact(bodies, env, cfg.margin).dist > cfg.margin;
}

}  // namespace

bool is_state_valid(const GeomState& x, const Environment& env, const SystemParams& p,
                    const ValidityConfig& cfg) {
  for (const auto& c : x.cables)
    if (c.elevation < cfg.min_elevation - 1e-12 || c.elevation > cfg.max_elevation + 1e-12)
      return false;
  return common_valid(body_geometries(x, p), env, cfg);
}

bool is_state_valid(const FullState& x, const Environment& env, const SystemParams& p,
                    const ValidityConfig& cfg) {
  const double min_dz = std::sin(cfg.min_elevation);
  for (const auto& c : x.cables)
    if (-c.dir.z() < min_dz - 1e-12) return false;
  return common_valid(body_geometries(x, p), env, cfg);
}

GeomState interpolate_geom(const GeomState& a, const GeomState& b, double u) {
  GeomState s;
  s.payload_pos = (1.0 - u) * a.payload_pos + u * b.payload_pos;
  s.cables.resize(a.cables.size());
  for (std::size_t i = 0; i < a.cables.size(); ++i) {
    double az = a.cables[i].azimuth + u * angle_diff(b.cables[i].azimuth, a.cables[i].azimuth);
    az = std::fmod(az, 2.0 * M_PI);
    if (az < 0.0) az += 2.0 * M_PI;
    s.cables[i].azimuth = az;
    s.cables[i].elevation =
        (1.0 - u) * a.cables[i].elevation + u * b.cables[i].elevation;
  }
  return s;
}

double max_body_displacement(const GeomState& a, const GeomState& b, const SystemParams& p) {
  double d = (a.payload_pos - b.payload_pos).norm();
  double ang = 0.0;
  for (std::size_t i = 0; i < a.cables.size(); ++i) {
    const double da = std::abs(angle_diff(a.cables[i].azimuth, b.cables[i].azimuth));
    const double dg = std::abs(a.cables[i].elevation - b.cables[i].elevation);
    ang = std::max(ang, p.uavs[i].cable_length * (da + dg));
  }
  return d + ang;
}

bool is_motion_valid(const GeomState& a, const GeomState& b, const Environment& env,
                     const SystemParams& p, const ValidityConfig& cfg) {
  if (!is_state_valid(a, env, p, cfg)) return false;
  const double disp = max_body_displacement(a, b, p);
  const int m = std::max(1, static_cast<int>(std::ceil(disp / cfg.resolution)));
  for (int k = 1; k <= m; ++k) {
    const GeomState s = interpolate_geom(a, b, static_cast<double>(k) / m);
    if (!is_state_valid(s, env, p, cfg)) return false;
  }
  return true;
}

}  // namespace plp::world
