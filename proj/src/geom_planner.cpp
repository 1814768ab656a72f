#include "plp/geom_planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "plp/assignment.hpp"

namespace plp::geom {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double wrap_azimuth(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a < 0.0) a += 2.0 * M_PI;
  return a;
}

double elevation_cap() { return std::nextafter(M_PI / 2.0, 0.0); }

}  // namespace

double formation_force(const std::vector<Vec3>& cable_dirs, double eps_tilt) {
  if (cable_dirs.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& q : cable_dirs) {
    const double align = -q.z();  // dot with straight-down
    if (align < eps_tilt) throw std::domain_error("cable too close to horizontal");
    sum += 1.0 / align;
  }
  return sum / static_cast<double>(cable_dirs.size());
}

double formation_force(const GeomState& s, double eps_tilt) {
  if (s.cables.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& c : s.cables) {
    const double align = std::sin(c.elevation);
    if (align < eps_tilt) throw std::domain_error("cable too close to horizontal");
    sum += 1.0 / align;
  }
  return sum / static_cast<double>(s.cables.size());
}

void unit_to_azel(const Vec3& q, double& azimuth, double& elevation) {
  elevation = std::asin(std::clamp(-q.z(), -1.0, 1.0));
  const double cx = -q.x(), cy = -q.y();
  if (std::hypot(cx, cy) < 1e-12) {
    azimuth = 0.0;
    return;
  }
  azimuth = wrap_azimuth(std::atan2(cy, cx));
}

double edge_cost(const GeomState& a, const GeomState& b, const SystemParams& p,
                 double beta, double eps_tilt) {
  const double fmean = 0.5 * (formation_force(a, eps_tilt) + formation_force(b, eps_tilt));
  double travel = beta * (a.payload_pos - b.payload_pos).norm();
  double robots = 0.0;
  for (int i = 0; i < a.n(); ++i) {
    const double l = p.uavs[i].cable_length;
    const Vec3 pa = a.payload_pos - l * azel_to_unit(a.cables[i].azimuth, a.cables[i].elevation);
    const Vec3 pb = b.payload_pos - l * azel_to_unit(b.cables[i].azimuth, b.cables[i].elevation);
    robots += (pa - pb).norm();
  }
  return fmean * (travel + (1.0 - beta) * robots);
}

double geom_distance(const GeomState& a, const GeomState& b, double angle_weight) {
  double d = (a.payload_pos - b.payload_pos).norm();
  for (std::size_t i = 0; i < a.cables.size(); ++i) {
    d += angle_weight * (std::abs(angle_diff(a.cables[i].azimuth, b.cables[i].azimuth)) +
                         std::abs(a.cables[i].elevation - b.cables[i].elevation));
  }
  return d;
}

WitnessSet preprocess_witnesses(int count, const GeomState& start,
                                const world::Environment& env, const SystemParams& p,
                                Rng& rng, const PlannerConfig& cfg) {
  if (count < 1) throw std::invalid_argument("witness count must be at least 1");
  world::ValidityConfig vcfg;
  vcfg.min_elevation = std::asin(cfg.eps_tilt);
  vcfg.resolution = cfg.resolution;

  WitnessSet out;
  out.formations.push_back(start);
  const int n = start.n();
  if (n == 0) return out;

  const std::uint64_t budget = cfg.witness_attempts_per * static_cast<std::uint64_t>(count);
  std::vector<Vec3> base_pos(n), cand_pos(n);
  MatX cost(n, n);
  for (std::uint64_t attempt = 0;
       attempt < budget && out.formations.size() < static_cast<std::size_t>(count); ++attempt) {
    const GeomState& base =
        out.formations[rng.uniform_int(static_cast<int>(out.formations.size()))];

    GeomState cand;
    cand.payload_pos = start.payload_pos;
    cand.cables.resize(n);
    for (int i = 0; i < n; ++i) {
      cand.cables[i].azimuth = rng.uniform(0.0, 2.0 * M_PI);
      cand.cables[i].elevation = rng.uniform(0.0, elevation_cap());
    }

    // Relabel the sampled cables so each base cable keeps its nearest robot
    // position; anchored at the start payload position.
    for (int i = 0; i < n; ++i) {
      base_pos[i] = start.payload_pos -
                    p.uavs[i].cable_length *
                        azel_to_unit(base.cables[i].azimuth, base.cables[i].elevation);
      cand_pos[i] = start.payload_pos -
                    p.uavs[i].cable_length *
                        azel_to_unit(cand.cables[i].azimuth, cand.cables[i].elevation);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = (base_pos[i] - cand_pos[j]).norm();
    const auto perm = optimal_assignment(cost);
    GeomState relabeled = cand;
    for (int i = 0; i < n; ++i) relabeled.cables[i] = cand.cables[perm[i]];

    if (!world::is_state_valid(relabeled, env, p, vcfg)) continue;
    if (!world::is_motion_valid(base, relabeled, env, p, vcfg)) continue;
    out.formations.push_back(relabeled);
  }
  out.complete = out.formations.size() == static_cast<std::size_t>(count);
  return out;
}

GeomState sample_state(const WitnessSet& witnesses, double sigma,
                       const world::Environment& env, Rng& rng) {
  GeomState s = sample_goal(witnesses, sigma, Vec3::Zero(), rng);
  for (int k = 0; k < 3; ++k)
    s.payload_pos(k) = rng.uniform(env.workspace_lo(k), env.workspace_hi(k));
  return s;
}

GeomState sample_goal(const WitnessSet& witnesses, double sigma, const Vec3& p0_goal,
                      Rng& rng) {
  if (witnesses.formations.empty()) throw std::invalid_argument("empty witness set");
  const GeomState& w =
      witnesses.formations[rng.uniform_int(static_cast<int>(witnesses.formations.size()))];
  GeomState s;
  s.payload_pos = p0_goal;
  s.cables.resize(w.cables.size());
  for (std::size_t i = 0; i < w.cables.size(); ++i) {
    s.cables[i].azimuth = wrap_azimuth(w.cables[i].azimuth + sigma * rng.gaussian());
    s.cables[i].elevation =
        std::clamp(w.cables[i].elevation + sigma * rng.gaussian(), 0.0, elevation_cap());
  }
  return s;
}

namespace {

// Hash grid over payload positions. The composite metric dominates the
// payload displacement, so grid distance is a valid lower bound for pruning.
class P0Grid {
 public:
  explicit P0Grid(double cell) : cell_(cell) {}

  void insert(const Vec3& p, int idx) { map_[key_of(p)].push_back(idx); }

  template <class F>
  void visit_cube(const Vec3& p, double radius, F&& fn) const {
    int lo[3], hi[3];
    for (int k = 0; k < 3; ++k) {
      lo[k] = coord(p(k) - radius);
      hi[k] = coord(p(k) + radius);
    }
    for (int ix = lo[0]; ix <= hi[0]; ++ix)
      for (int iy = lo[1]; iy <= hi[1]; ++iy)
        for (int iz = lo[2]; iz <= hi[2]; ++iz) {
          const auto it = map_.find(pack(ix, iy, iz));
          if (it == map_.end()) continue;
          for (int idx : it->second) fn(idx);
        }
  }

 private:
  int coord(double v) const { return static_cast<int>(std::floor(v / cell_)); }
  std::uint64_t key_of(const Vec3& p) const {
    return pack(coord(p.x()), coord(p.y()), coord(p.z()));
  }
  static std::uint64_t pack(int x, int y, int z) {
    const auto u = [](int v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1fffff; };
    return u(x) | (u(y) << 21) | (u(z) << 42);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<int>> map_;
};

struct Node {
  GeomState state;
  int parent = -1;
  double cost = 0.0;
  double force = 1.0;
  std::vector<int> children;
};

// Bisection ordering: coarse midpoints first so deep collisions fail fast.
void bisection_order(int m, std::vector<int>& order) {
  order.clear();
  std::size_t head = 0;
  std::vector<std::pair<int, int>> queue{{1, m - 1}};
  while (head < queue.size()) {
    auto [lo, hi] = queue[head++];
    if (lo > hi) continue;
    const int mid = (lo + hi) / 2;
    order.push_back(mid);
    queue.emplace_back(lo, mid - 1);
    queue.emplace_back(mid + 1, hi);
  }
}

}  // namespace

PlanResult plan_geometric(const GeomState& start, const Vec3& goal_payload,
                          const world::Environment& env, const SystemParams& p,
                          const PlannerConfig& cfg, std::uint64_t seed) {
  world::ValidityConfig vcfg;
  vcfg.min_elevation = std::asin(cfg.eps_tilt);
  vcfg.resolution = cfg.resolution;

  GeomState start_used = start;
  if (cfg.payload_only) start_used.cables.clear();

  if (!world::is_state_valid(start_used, env, p, vcfg))
    throw std::invalid_argument("start state is not collision-free");

  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  Rng rng(seed);
  PlanResult res;

  const bool use_witness = cfg.sampler == PlannerConfig::Sampler::Witness && !cfg.payload_only;
  WitnessSet witnesses;
  if (use_witness) {
    witnesses = preprocess_witnesses(cfg.witness_count, start_used, env, p, rng, cfg);
    res.witness_complete = witnesses.complete;
  }

  const int n = start_used.n();
  const int dim = cfg.payload_only ? 3 : 3 + 2 * n;

  std::vector<Node> nodes;
  nodes.push_back(Node{start_used, -1, 0.0, formation_force(start_used, cfg.eps_tilt), {}});
  P0Grid grid(0.25);
  grid.insert(start_used.payload_pos, 0);

  std::vector<int> goal_nodes;
  double best_cost = kInf;
  int best_goal = -1;
  std::uint64_t iter = 0;

  auto note_best = [&] {
    double cur = kInf;
    int arg = -1;
    for (int gi : goal_nodes) {
      if (nodes[gi].cost < cur) {
        cur = nodes[gi].cost;
        arg = gi;
      }
    }
    if (arg >= 0 && cur < best_cost - 1e-12) {
      best_cost = cur;
      best_goal = arg;
      const double t = elapsed();
      if (res.first_solution_s < 0.0) {
        res.first_solution_s = t;
        res.first_solution_iter = iter;
      }
      res.trace.push_back(TracePoint{t, cur, iter});
    }
  };

  if ((start_used.payload_pos - goal_payload).norm() <= cfg.goal_tolerance) {
    // Cost 0 cannot be improved on; skip the search.
    goal_nodes.push_back(0);
    note_best();
    res.node_count = 1;
    res.wall_time_s = elapsed();
    res.solved = true;
    res.path.cost = 0.0;
    res.path.states.push_back(start_used);
    return res;
  }

  auto free_sample = [&]() {
    GeomState s;
    if (cfg.payload_only || !use_witness) {
      s.payload_pos = Vec3(rng.uniform(env.workspace_lo.x(), env.workspace_hi.x()),
                           rng.uniform(env.workspace_lo.y(), env.workspace_hi.y()),
                           rng.uniform(env.workspace_lo.z(), env.workspace_hi.z()));
      if (!cfg.payload_only) {
        s.cables.resize(n);
        for (int i = 0; i < n; ++i) {
          s.cables[i].azimuth = rng.uniform(0.0, 2.0 * M_PI);
          s.cables[i].elevation = rng.uniform(0.0, elevation_cap());
        }
      }
      return s;
    }
    return sample_state(witnesses, cfg.sigma, env, rng);
  };

  auto goal_sample = [&]() {
    GeomState s;
    if (cfg.payload_only || !use_witness) {
      s.payload_pos = goal_payload;
      if (!cfg.payload_only) {
        s.cables.resize(n);
        for (int i = 0; i < n; ++i) {
          s.cables[i].azimuth = rng.uniform(0.0, 2.0 * M_PI);
          s.cables[i].elevation = rng.uniform(0.0, elevation_cap());
        }
      }
      return s;
    }
    return sample_goal(witnesses, cfg.sigma, goal_payload, rng);
  };

  auto metric = [&](const GeomState& a, const GeomState& b) {
    return geom_distance(a, b, cfg.angle_weight);
  };

  // Two-pass nearest neighbor: the grid prunes on the payload part, which
  // lower-bounds the composite metric.
  auto nearest = [&](const GeomState& s) {
    double radius = 0.5;
    int best = -1;
    double bd = kInf;
    for (int pass = 0; pass < 64; ++pass) {
      grid.visit_cube(s.payload_pos, radius, [&](int idx) {
        const double d = metric(s, nodes[idx].state);
        if (d < bd || (d == bd && idx < best)) {
          bd = d;
          best = idx;
        }
      });
      if (best >= 0 && bd <= radius) break;
      radius = best >= 0 ? bd : radius * 2.0;
    }
    return best;
  };

  auto edge = [&](const Node& a, const GeomState& sb, double fb) {
    double travel = cfg.beta * (a.state.payload_pos - sb.payload_pos).norm();
    double robots = 0.0;
    for (int i = 0; i < n; ++i) {
      const double l = p.uavs[i].cable_length;
      const Vec3 pa = a.state.payload_pos -
                      l * azel_to_unit(a.state.cables[i].azimuth, a.state.cables[i].elevation);
      const Vec3 pb = sb.payload_pos - l * azel_to_unit(sb.cables[i].azimuth, sb.cables[i].elevation);
      robots += (pa - pb).norm();
    }
    return 0.5 * (a.force + fb) * (travel + (1.0 - cfg.beta) * robots);
  };

  std::vector<int> order;
  auto motion_ok = [&](const GeomState& a, const GeomState& b) {
    if (!world::is_state_valid(b, env, p, vcfg)) return false;
    const double disp = world::max_body_displacement(a, b, p);
    const int m = std::max(1, static_cast<int>(std::ceil(disp / cfg.resolution)));
    bisection_order(m, order);
    for (int k : order) {
      const GeomState s = world::interpolate_geom(a, b, static_cast<double>(k) / m);
      if (!world::is_state_valid(s, env, p, vcfg)) return false;
    }
    return true;
  };

  std::vector<int> nbrs;
  std::vector<std::pair<double, int>> parent_cands;
  std::vector<int> stack;

  for (; iter < cfg.max_iters; ++iter) {
    if ((iter & 63) == 0 && elapsed() > cfg.timeout_s) break;

    const bool to_goal = rng.uniform() < cfg.goal_bias;
    const GeomState x_rand = to_goal ? goal_sample() : free_sample();

    const int near = nearest(x_rand);
    const double d = metric(nodes[near].state, x_rand);
    if (d < 1e-12) continue;
    const GeomState x_new = d <= cfg.max_step
                                ? x_rand
                                : world::interpolate_geom(nodes[near].state, x_rand,
                                                          cfg.max_step / d);
    if (!world::is_state_valid(x_new, env, p, vcfg)) continue;
    const double f_new = formation_force(x_new, cfg.eps_tilt);

    const double N = static_cast<double>(nodes.size());
    const double ball =
        std::min(cfg.max_step,
                 cfg.rewire_gamma * std::pow(std::log(std::max(N, 2.0)) / N, 1.0 / dim));

    nbrs.clear();
    grid.visit_cube(x_new.payload_pos, ball, [&](int idx) {
      if (metric(nodes[idx].state, x_new) <= ball) nbrs.push_back(idx);
    });
    if (std::find(nbrs.begin(), nbrs.end(), near) == nbrs.end()) nbrs.push_back(near);

    parent_cands.clear();
    for (int j : nbrs)
      parent_cands.emplace_back(nodes[j].cost + edge(nodes[j], x_new, f_new), j);
    std::sort(parent_cands.begin(), parent_cands.end());

    int parent = -1;
    double new_cost = kInf;
    for (const auto& [c, j] : parent_cands) {
      if (motion_ok(nodes[j].state, x_new)) {
        parent = j;
        new_cost = c;
        break;
      }
    }
    if (parent < 0) continue;

    const int idx = static_cast<int>(nodes.size());
    nodes.push_back(Node{x_new, parent, new_cost, f_new, {}});
    nodes[parent].children.push_back(idx);
    grid.insert(x_new.payload_pos, idx);

    // Rewire cheaper routes through the new node.
    for (int j : nbrs) {
      if (j == parent) continue;
      const double through = new_cost + edge(nodes[idx], nodes[j].state, nodes[j].force);
      if (through + 1e-12 >= nodes[j].cost) continue;
      if (!motion_ok(x_new, nodes[j].state)) continue;
      auto& old_children = nodes[nodes[j].parent].children;
      old_children.erase(std::find(old_children.begin(), old_children.end(), j));
      nodes[j].parent = idx;
      nodes[idx].children.push_back(j);
      const double delta = through - nodes[j].cost;
      stack.assign(1, j);
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        nodes[v].cost += delta;
        for (int c : nodes[v].children) stack.push_back(c);
      }
    }

    if ((x_new.payload_pos - goal_payload).norm() <= cfg.goal_tolerance)
      goal_nodes.push_back(idx);
    note_best();
  }

  res.iterations = iter;
  res.node_count = nodes.size();
  res.wall_time_s = elapsed();
  if (best_goal >= 0) {
    res.solved = true;
    res.path.cost = nodes[best_goal].cost;
    for (int v = best_goal; v >= 0; v = nodes[v].parent) res.path.states.push_back(nodes[v].state);
    std::reverse(res.path.states.begin(), res.path.states.end());
  }
  return res;
}

ReferenceTrajectory path_to_reference(const GeomPath& path, double dt, double speed,
                                      double angle_weight) {
  if (path.states.empty()) throw std::invalid_argument("empty path");
  if (dt <= 0.0 || speed <= 0.0) throw std::invalid_argument("dt and speed must be positive");

  ReferenceTrajectory out;
  out.dt = dt;

  std::vector<GeomState> pts;
  for (const auto& s : path.states) {
    if (!pts.empty() && geom_distance(pts.back(), s, angle_weight) < 1e-12) continue;
    pts.push_back(s);
  }

  std::vector<double> cum{0.0};
  for (std::size_t k = 0; k + 1 < pts.size(); ++k)
    cum.push_back(cum.back() + geom_distance(pts[k], pts[k + 1], angle_weight));
  const double L = cum.back();

  if (pts.size() == 1 || L < 1e-12) {
    out.states.push_back(full_state_from_geom(pts.front()));
    return out;
  }

  const int K = std::max(1, static_cast<int>(std::ceil(L / (speed * dt) - 1e-9)));
  out.states.reserve(K + 1);
  std::size_t e = 0;
  for (int k = 0; k <= K; ++k) {
    const double s = L * k / K;
    while (e + 2 < cum.size() && cum[e + 1] < s) ++e;
    const double len = cum[e + 1] - cum[e];
    const double u = len > 1e-15 ? std::clamp((s - cum[e]) / len, 0.0, 1.0) : 0.0;
    out.states.push_back(full_state_from_geom(world::interpolate_geom(pts[e], pts[e + 1], u)));
  }

  for (int k = 1; k + 1 < static_cast<int>(out.states.size()); ++k)
    out.states[k].payload_vel =
        (out.states[k + 1].payload_pos - out.states[k - 1].payload_pos) / (2.0 * dt);
  return out;
}

}  // namespace plp::geom
