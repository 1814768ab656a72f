#pragma once

#include <limits>
#include <vector>

#include "plp/types.hpp"

namespace plp::world {

struct Obstacle {
  enum class Shape { Sphere, Box, Cylinder };
  Shape shape = Shape::Sphere;
  Vec3 center = Vec3::Zero();
  double radius = 0.0;                // sphere, cylinder
  Vec3 half_extents = Vec3::Zero();   // box, axis-aligned
  double half_height = 0.0;           // cylinder, vertical axis

  static Obstacle sphere(const Vec3& c, double r);
  static Obstacle box(const Vec3& c, const Vec3& half);
  static Obstacle cylinder(const Vec3& c, double r, double half_h);

  void aabb(Vec3& lo, Vec3& hi) const;
};

struct Environment {
  Vec3 workspace_lo = Vec3(-2.0, -1.5, 0.0);
  Vec3 workspace_hi = Vec3(2.0, 1.5, 2.0);
  std::vector<Obstacle> obstacles;

  bool in_workspace(const Vec3& p) const {
    return (p.array() >= workspace_lo.array()).all() &&
           (p.array() <= workspace_hi.array()).all();
  }
};

// Signed distance from a point to an obstacle surface; negative inside.
double obstacle_sdf(const Obstacle& o, const Vec3& p);
Vec3 obstacle_sdf_grad(const Obstacle& o, const Vec3& p);

// Minimum of obstacle_sdf over the segment a-b. Exact for these convex
// shapes: coarse samples bracket the minimizer, ternary search refines it.
// If t_min is given it receives the minimizing segment parameter.
double swept_obstacle_sdf(const Obstacle& o, const Vec3& a, const Vec3& b,
                          double* t_min = nullptr);

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                              double* t = nullptr);
double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2, double* s = nullptr, double* t = nullptr);

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

// Collision proxy of one system state: a sphere per robot, a payload sphere,
// and a capsule per cable. Cable capsules are shortened by the robot radius
// at the top and the payload radius at the bottom so the always-touching
// attachment pairs do not register. A payload-only set has empty vectors.
struct BodySet {
  std::vector<Sphere> uavs;
  Sphere payload;
  std::vector<Capsule> cables;
};

BodySet body_geometries(const FullState& x, const SystemParams& p);
BodySet body_geometries(const GeomState& x, const SystemParams& p);
BodySet payload_body(const Vec3& p0, const SystemParams& p);

enum class PairKind { None, UavObstacle, PayloadObstacle, CableObstacle, UavUav, CableCable };

struct Contact {
  double dist = std::numeric_limits<double>::infinity();
  PairKind kind = PairKind::None;
  int i = -1;  // body index
  int j = -1;  // obstacle index or second body index
  // Moving the body point along +normal increases the distance; for
  // body-body pairs the second body sees -normal.
  Vec3 normal = Vec3::UnitZ();
  double t_i = 0.0;  // segment parameter on body i's capsule
  double t_j = 0.0;  // segment parameter on body j's capsule
};

constexpr unsigned pair_bit(PairKind k) { return 1u << static_cast<int>(k); }
constexpr unsigned kAllPairs = pair_bit(PairKind::UavObstacle) |
                               pair_bit(PairKind::PayloadObstacle) |
                               pair_bit(PairKind::CableObstacle) |
                               pair_bit(PairKind::UavUav) | pair_bit(PairKind::CableCable);

// Closest pair over: each body vs each obstacle, robot vs robot, cable vs
// cable. Cable i vs robot i, cable i vs payload, and robot vs payload pairs
// are never formed. Pairs provably farther than `cutoff` may be skipped or
// reported with a lower bound, so the result is exact whenever
// result.dist <= cutoff and a valid lower bound otherwise. `kinds` restricts
// the scan to the masked pair categories.
Contact min_contact(const BodySet& bodies, const Environment& env,
                    double cutoff = std::numeric_limits<double>::infinity(),
                    unsigned kinds = kAllPairs);

double signed_distance(const BodySet& bodies, const Environment& env);
double signed_distance(const FullState& x, const Environment& env, const SystemParams& p);
double signed_distance(const GeomState& x, const Environment& env, const SystemParams& p);

struct ValidityConfig {
  double margin = 0.0;
  double min_elevation = 0.100167421161560;  // asin(0.1), matches the tilt gate
  double max_elevation = M_PI / 2.0;
  double resolution = 0.02;
};

bool is_state_valid(const GeomState& x, const Environment& env, const SystemParams& p,
                    const ValidityConfig& cfg = {});
bool is_state_valid(const FullState& x, const Environment& env, const SystemParams& p,
                    const ValidityConfig& cfg = {});

// Straight-segment interpolation in planner coordinates; azimuths take the
// shortest arc. u in [0,1].
GeomState interpolate_geom(const GeomState& a, const GeomState& b, double u);

// Conservative bound on how far any body point moves between a and b.
double max_body_displacement(const GeomState& a, const GeomState& b, const SystemParams& p);

bool is_motion_valid(const GeomState& a, const GeomState& b, const Environment& env,
                     const SystemParams& p, const ValidityConfig& cfg = {});

}  // namespace plp::world
