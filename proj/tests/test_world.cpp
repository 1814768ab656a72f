#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "plp/rng.hpp"
#include "plp/world.hpp"

using namespace plp;
using namespace plp::world;

namespace {

Vec3 random_vec(Rng& r, double scale) {
  return Vec3(r.uniform(-scale, scale), r.uniform(-scale, scale), r.uniform(-scale, scale));
}

// Independent point-to-box distance: clamp for the outside, face gaps inside.
double oracle_box_sdf(const Vec3& center, const Vec3& half, const Vec3& p) {
  const Vec3 lo = center - half, hi = center + half;
  const Vec3 q(std::clamp(p.x(), lo.x(), hi.x()), std::clamp(p.y(), lo.y(), hi.y()),
               std::clamp(p.z(), lo.z(), hi.z()));
  if ((p - q).norm() > 0.0) return (p - q).norm();
  double m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) m = std::min({m, p(k) - lo(k), hi(k) - p(k)});
  return -m;
}

double oracle_cylinder_sdf(const Vec3& center, double radius, double hh, const Vec3& p) {
  const double rad = std::hypot(p.x() - center.x(), p.y() - center.y());
  const double dr = rad - radius;
  const double dz = std::abs(p.z() - center.z()) - hh;
  if (dr <= 0.0 && dz <= 0.0) return std::max(dr, dz);
  return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
}

// Dense-grid segment-segment distance with alternating 1-D refinement.
double oracle_segseg(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
  auto at1 = [&](double s) { return Vec3(p1 + s * (q1 - p1)); };
  auto at2 = [&](double t) { return Vec3(p2 + t * (q2 - p2)); };
  double bs = 0.0, bt = 0.0, best = std::numeric_limits<double>::infinity();
  const int K = 41;
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) {
      const double s = a / double(K - 1), t = b / double(K - 1);
      const double d = (at1(s) - at2(t)).norm();
      if (d < best) {
        best = d;
        bs = s;
        bt = t;
      }
    }
  auto refine = [&](auto f, double x) {
    double lo = std::max(0.0, x - 0.05), hi = std::min(1.0, x + 0.05);
    for (int it = 0; it < 70; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (f(m1) <= f(m2)) hi = m2; else lo = m1;
    }
    return 0.5 * (lo + hi);
  };
  for (int round = 0; round < 25; ++round) {
    bs = refine([&](double s) { return (at1(s) - at2(bt)).norm(); }, bs);
    bt = refine([&](double t) { return (at1(bs) - at2(t)).norm(); }, bt);
  }
  return std::min(best, (at1(bs) - at2(bt)).norm());
}

GeomState spread_formation(const Vec3& p0, int n, double elevation) {
  GeomState g;
  g.payload_pos = p0;
  g.cables.resize(n);
  for (int i = 0; i < n; ++i) {
    g.cables[i].azimuth = 2.0 * M_PI * i / n;
    g.cables[i].elevation = elevation;
  }
  return g;
}

}  // namespace

TEST_CASE("point sdf of the three obstacle shapes") {
  const auto s = Obstacle::sphere(Vec3(1, 0, 0), 0.5);
  CHECK(obstacle_sdf(s, Vec3(3, 0, 0)) == doctest::Approx(1.5));
  CHECK(obstacle_sdf(s, Vec3(1, 0, 0)) == doctest::Approx(-0.5));

  const auto b = Obstacle::box(Vec3(0, 0, 0), Vec3(1, 2, 3));
  CHECK(obstacle_sdf(b, Vec3(2, 0, 0)) == doctest::Approx(1.0));
  CHECK(obstacle_sdf(b, Vec3(0, 0, 0)) == doctest::Approx(-1.0));
  CHECK(obstacle_sdf(b, Vec3(2, 3, 4)) == doctest::Approx(std::sqrt(3.0)));

  const auto c = Obstacle::cylinder(Vec3(0, 0, 1), 0.25, 1.0);
  CHECK(obstacle_sdf(c, Vec3(1, 0, 1)) == doctest::Approx(0.75));
  CHECK(obstacle_sdf(c, Vec3(0, 0, 2.5)) == doctest::Approx(0.5));
  CHECK(obstacle_sdf(c, Vec3(0, 0, 1)) == doctest::Approx(-0.25));
  CHECK(obstacle_sdf(c, Vec3(1, 0, 3)) == doctest::Approx(std::hypot(0.75, 1.0)));
}

TEST_CASE("sdf matches independently written formulas on random points") {
  Rng r(101);
  for (int k = 0; k < 500; ++k) {
    const Vec3 c = random_vec(r, 1.0);
    const Vec3 p = random_vec(r, 3.0);
    const Vec3 half(r.uniform(0.1, 1.0), r.uniform(0.1, 1.0), r.uniform(0.1, 1.0));
    const auto box = Obstacle::box(c, half);
    CHECK(obstacle_sdf(box, p) == doctest::Approx(oracle_box_sdf(c, half, p)).epsilon(1e-12));
    const double rad = r.uniform(0.1, 1.0), hh = r.uniform(0.1, 1.0);
    const auto cyl = Obstacle::cylinder(c, rad, hh);
    CHECK(obstacle_sdf(cyl, p) ==
          doctest::Approx(oracle_cylinder_sdf(c, rad, hh, p)).epsilon(1e-12));
  }
}

TEST_CASE("sdf gradient is a unit ascent direction") {
  Rng r(102);
  int bad = 0;
  for (int k = 0; k < 300; ++k) {
    Obstacle o;
    const int shape = k % 3;
    if (shape == 0) o = Obstacle::sphere(random_vec(r, 0.5), r.uniform(0.2, 0.8));
    if (shape == 1)
      o = Obstacle::box(random_vec(r, 0.5),
                        Vec3(r.uniform(0.2, 1.0), r.uniform(0.2, 1.0), r.uniform(0.2, 1.0)));
    if (shape == 2) o = Obstacle::cylinder(random_vec(r, 0.5), r.uniform(0.2, 0.8), r.uniform(0.2, 0.8));
    const Vec3 p = random_vec(r, 2.0);
    const Vec3 g = obstacle_sdf_grad(o, p);
    if (std::abs(g.norm() - 1.0) > 1e-9) {
      ++bad;
      continue;
    }
    const double h = 1e-6;
    const double up = obstacle_sdf(o, p + h * g) - obstacle_sdf(o, p);
    if (std::abs(up / h - 1.0) > 2e-3) ++bad;  // kink neighborhoods tolerated
  }
  CHECK(bad <= 6);
}

TEST_CASE("swept sdf equals dense sampling") {
  Rng r(103);
  for (int k = 0; k < 100; ++k) {
    Obstacle o;
    if (k % 2 == 0)
      o = Obstacle::box(random_vec(r, 0.5),
                        Vec3(r.uniform(0.2, 1.0), r.uniform(0.2, 1.0), r.uniform(0.2, 1.0)));
    else
      o = Obstacle::cylinder(random_vec(r, 0.5), r.uniform(0.2, 0.8), r.uniform(0.2, 1.0));
    const Vec3 a = random_vec(r, 2.0), b = random_vec(r, 2.0);
    double dense = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 4000; ++i)
      dense = std::min(dense, obstacle_sdf(o, a + (i / 4000.0) * (b - a)));
    // The refined value may only undercut the grid by up to one grid spacing.
    const double mine = swept_obstacle_sdf(o, a, b);
    CHECK(mine <= dense + 1e-12);
    CHECK(mine >= dense - (b - a).norm() / 4000.0 - 1e-12);
  }
}

TEST_CASE("segment-segment distance matches grid oracle") {
  Rng r(104);
  for (int k = 0; k < 120; ++k) {
    const Vec3 p1 = random_vec(r, 1.5), q1 = p1 + random_vec(r, 1.0);
    const Vec3 p2 = random_vec(r, 1.5), q2 = p2 + random_vec(r, 1.0);
    const double mine = segment_segment_distance(p1, q1, p2, q2);
    const double oracle = oracle_segseg(p1, q1, p2, q2);
    CHECK(mine == doctest::Approx(oracle).epsilon(1e-5));
  }
  // Degenerate: point vs segment and point vs point.
  CHECK(segment_segment_distance(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(1, -1, 0), Vec3(1, 1, 0)) ==
        doctest::Approx(1.0));
  CHECK(segment_segment_distance(Vec3(0, 0, 0), Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(2, 0, 0)) ==
        doctest::Approx(2.0));
}

TEST_CASE("body set construction") {
  SystemParams p = SystemParams::defaults(2);

  FullState x;
  x.payload_pos = Vec3(0, 0, 1);
  x.cables.resize(2);
  x.uavs.resize(2);
  const BodySet vertical = body_geometries(x, p);
  CHECK((vertical.uavs[0].center - Vec3(0, 0, 1.5)).norm() < 1e-15);
  CHECK((vertical.uavs[1].center - Vec3(0, 0, 1.5)).norm() < 1e-15);
  CHECK(vertical.uavs[0].radius == doctest::Approx(0.1));
  CHECK(vertical.payload.radius == doctest::Approx(0.01));
  CHECK((vertical.cables[0].a - Vec3(0, 0, 1.4)).norm() < 1e-15);
  CHECK((vertical.cables[0].b - Vec3(0, 0, 1.01)).norm() < 1e-15);

  FullState single;
  single.payload_pos = Vec3(0, 0, 1);
  single.cables.resize(1);
  single.uavs.resize(1);
  single.cables[0].dir = Vec3(-1, 0, 0);
  const BodySet horiz = body_geometries(single, p);
  CHECK((horiz.uavs[0].center - Vec3(0.5, 0, 1)).norm() < 1e-15);
  CHECK((horiz.cables[0].a - Vec3(0.4, 0, 1)).norm() < 1e-15);
  CHECK((horiz.cables[0].b - Vec3(0.01, 0, 1)).norm() < 1e-15);

  const BodySet solo = payload_body(Vec3(1, 2, 0.5), p);
  CHECK(solo.uavs.empty());
  CHECK(solo.cables.empty());
  CHECK(solo.payload.radius == doctest::Approx(0.01));

  GeomState g;
  g.payload_pos = Vec3(1, 2, 0.5);
  CHECK(body_geometries(g, p).uavs.empty());
}

TEST_CASE("signed distance pair bookkeeping") {
  const Environment empty;

  BodySet two;
  two.payload = Sphere{Vec3(100, 100, 1), 0.01};
  two.uavs = {Sphere{Vec3(0, 0, 1), 0.1}, Sphere{Vec3(0.5, 0, 1), 0.1}};
  CHECK(signed_distance(two, empty) == doctest::Approx(0.3).epsilon(1e-12));

  // Tangency with an obstacle.
  Environment env;
  env.obstacles.push_back(Obstacle::sphere(Vec3(0.3, 0, 1), 0.2));
  BodySet one;
  one.payload = Sphere{Vec3(100, 100, 1), 0.01};
  one.uavs = {Sphere{Vec3(0, 0, 1), 0.1}};
  CHECK(signed_distance(one, env) == doctest::Approx(0.0).epsilon(1e-12));

  // Cable vs own robot and cable vs payload never register even when the
  // formation hangs straight down (the capsule touches both spheres).
  SystemParams p = SystemParams::defaults(2);
  const GeomState spread = spread_formation(Vec3(0, 0, 1), 2, M_PI / 4.0);
  const Contact c = min_contact(body_geometries(spread, p), empty);
  CHECK(c.kind == PairKind::CableCable);
  CHECK(c.dist == doctest::Approx(0.02 * std::sin(M_PI / 4.0) - 0.01).epsilon(1e-9));
}

TEST_CASE("min_contact with cutoff stays a sound bound") {
  SystemParams p = SystemParams::defaults(2);
  Environment env;
  env.obstacles.push_back(Obstacle::cylinder(Vec3(1.0, 0, 1), 0.1, 1.0));
  const GeomState g = spread_formation(Vec3(0, 0, 1), 2, M_PI / 4.0);
  const BodySet bodies = body_geometries(g, p);
  const double exact = min_contact(bodies, env).dist;
  const double bounded = min_contact(bodies, env, 0.001).dist;
  CHECK(bounded <= exact + 1e-12);
  // The exact minimum here is the cable pinch, below any positive cutoff.
  const double atcut = min_contact(bodies, env, 0.05).dist;
  CHECK(atcut == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("state validity") {
  SystemParams p = SystemParams::defaults(2);
  Environment env;

  CHECK(is_state_valid(spread_formation(Vec3(0, 0, 1), 2, M_PI / 4.0), env, p));

  // Both cables vertical: robots coincide.
  GeomState stacked = spread_formation(Vec3(0, 0, 1), 2, M_PI / 2.0);
  CHECK_FALSE(is_state_valid(stacked, env, p));

  // Near-horizontal cable rejected by the elevation gate.
  GeomState flat = spread_formation(Vec3(0, 0, 1), 2, M_PI / 4.0);
  flat.cables[0].elevation = 0.05;
  CHECK_FALSE(is_state_valid(flat, env, p));

  // Outside the workspace.
  GeomState outside = spread_formation(Vec3(0, 0, 10.0), 2, M_PI / 4.0);
  CHECK_FALSE(is_state_valid(outside, env, p));

  // A small obstacle pierced by one cable while both robots stay clear.
  GeomState g = spread_formation(Vec3(0, 0, 1), 2, M_PI / 4.0);
  const BodySet bodies = body_geometries(g, p);
  const Vec3 mid = 0.5 * (bodies.cables[0].a + bodies.cables[0].b);
  Environment blocked;
  blocked.obstacles.push_back(Obstacle::sphere(mid, 0.03));
  CHECK_FALSE(is_state_valid(g, blocked, p));
  for (const auto& uav : bodies.uavs)
    CHECK(obstacle_sdf(blocked.obstacles[0], uav.center) - uav.radius > 0.0);
}

TEST_CASE("motion validity") {
  SystemParams p = SystemParams::defaults(2);
  Environment env;

  const GeomState a = spread_formation(Vec3(-0.5, 0, 1), 2, M_PI / 4.0);
  GeomState b = a;
  b.payload_pos = Vec3(0.5, 0, 1);
  CHECK(is_motion_valid(a, b, env, p));
  CHECK(is_motion_valid(a, a, env, p));

  // A cylinder in the middle of the sweep; the formation spreads in y and
  // translates along x, so the endpoints stay clear but the payload sweeps
  // straight through the obstacle.
  GeomState ya = spread_formation(Vec3(-0.8, 0, 1), 2, M_PI / 4.0);
  ya.cables[0].azimuth = M_PI / 2.0;
  ya.cables[1].azimuth = 3.0 * M_PI / 2.0;
  GeomState yb = ya;
  yb.payload_pos = Vec3(0.8, 0, 1);
  Environment mid;
  mid.obstacles.push_back(Obstacle::cylinder(Vec3(0, 0, 1), 0.12, 1.0));
  CHECK(is_state_valid(ya, mid, p));
  CHECK(is_state_valid(yb, mid, p));
  CHECK_FALSE(is_motion_valid(ya, yb, mid, p));

  // Consistency with state validity on a degenerate edge.
  GeomState invalid = spread_formation(Vec3(0, 0, 1), 2, M_PI / 2.0);
  CHECK(is_motion_valid(invalid, invalid, env, p) == is_state_valid(invalid, env, p));
}

TEST_CASE("interpolation takes the short angular arc and wraps") {
  GeomState a = spread_formation(Vec3(0, 0, 1), 1, 0.8);
  GeomState b = a;
  a.cables[0].azimuth = 0.1;
  b.cables[0].azimuth = 6.2;
  b.payload_pos = Vec3(1, 0, 1);
  const GeomState m = interpolate_geom(a, b, 0.5);
  const double expect = 0.1 + 0.5 * angle_diff(6.2, 0.1);
  const double wrapped = expect < 0.0 ? expect + 2.0 * M_PI : expect;
  CHECK(m.cables[0].azimuth == doctest::Approx(wrapped));
  CHECK(m.payload_pos.x() == doctest::Approx(0.5));
  CHECK(interpolate_geom(a, b, 0.0).cables[0].azimuth == doctest::Approx(0.1));
  CHECK(interpolate_geom(a, b, 1.0).cables[0].azimuth == doctest::Approx(6.2));
}

TEST_CASE("displacement bound dominates true body motion") {
  Rng r(105);
  SystemParams p = SystemParams::defaults(3);
  for (int k = 0; k < 200; ++k) {
    GeomState a = spread_formation(random_vec(r, 1.0), 3, r.uniform(0.3, 1.4));
    GeomState b = spread_formation(random_vec(r, 1.0), 3, r.uniform(0.3, 1.4));
    for (int i = 0; i < 3; ++i) {
      a.cables[i].azimuth = r.uniform(0.0, 2.0 * M_PI);
      b.cables[i].azimuth = r.uniform(0.0, 2.0 * M_PI);
    }
    const double bound = max_body_displacement(a, b, p);
    const FullState fa = full_state_from_geom(a), fb = full_state_from_geom(b);
    CHECK((a.payload_pos - b.payload_pos).norm() <= bound + 1e-12);
    for (int i = 0; i < 3; ++i)
      CHECK((uav_position(fa, p, i) - uav_position(fb, p, i)).norm() <= bound + 1e-9);
  }
}

TEST_CASE("scene translation symmetry and inflation monotonicity") {
  Rng r(106);
  SystemParams p = SystemParams::defaults(2);
  for (int k = 0; k < 30; ++k) {
    GeomState g = spread_formation(random_vec(r, 0.8), 2, r.uniform(0.3, 1.3));
    Environment env;
    env.workspace_lo = Vec3(-50, -50, -50);
    env.workspace_hi = Vec3(50, 50, 50);
    env.obstacles.push_back(Obstacle::box(random_vec(r, 1.5), Vec3(0.2, 0.3, 0.4)));
    env.obstacles.push_back(Obstacle::cylinder(random_vec(r, 1.5), 0.15, 0.8));
    const double g0 = signed_distance(g, env, p);

    const Vec3 t = random_vec(r, 5.0);
    GeomState gt = g;
    gt.payload_pos += t;
    Environment envt = env;
    for (auto& o : envt.obstacles) o.center += t;
    CHECK(signed_distance(gt, envt, p) == doctest::Approx(g0).epsilon(1e-9));

    Environment fat = env;
    fat.obstacles[0].half_extents.array() += 0.05;
    fat.obstacles[1].radius += 0.05;
    CHECK(signed_distance(g, fat, p) <= g0 + 1e-12);
  }
}
