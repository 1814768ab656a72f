#include "plp/traj_opt.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace plp::opt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int q_offset(int i) { return 6 + 12 * i; }

bool finite_state(const FullState& x) {
  if (!x.payload_pos.allFinite() || !x.payload_vel.allFinite()) return false;
  for (const auto& c : x.cables)
    if (!c.dir.allFinite() || !c.ang_vel.allFinite()) return false;
  for (const auto& u : x.uavs)
    if (!u.orientation.coeffs().allFinite() || !u.body_rate.allFinite()) return false;
  return true;
}

Mat3 dir_projector(const Vec3& q) { return Mat3::Identity() - q * q.transpose(); }

// Capsule points sit at p0 - sigma(t) * q; sigma interpolates from the robot
// end of the cable to the payload end.
double cable_sigma(const SystemParams& p, int i, double t) {
  const double top = p.uavs[i].cable_length - p.uavs[i].radius;
  return (1.0 - t) * top + t * p.payload_radius;
}

// Tangent gradient of the closest-pair clearance; valid as a subgradient at
// the active pair. The standoff margin applies to obstacle and robot-robot
// pairs; cable-cable pairs get none, since adjacent cables legitimately run
// within the margin of each other where they meet the payload, and only an
// actual crossing should cost. Returns false when no pair violates; otherwise
// fills `viol` (> 0) and optionally the clearance gradient of the active pair.
bool clearance_and_grad(const OptProblem& pb, const FullState& x, double& viol, VecX* gx) {
  const auto bodies = world::body_geometries(x, pb.params);
  const auto a =
      world::min_contact(bodies, pb.env, pb.margin, world::kAllPairs & ~world::pair_bit(world::PairKind::CableCable));
  const auto b =
      world::min_contact(bodies, pb.env, 0.0, world::pair_bit(world::PairKind::CableCable));
  const double va = pb.margin - a.dist;
  const double vb = -b.dist;
  viol = std::max(va, vb);
  if (!(viol > 0.0)) return false;
  const world::Contact& c = vb > va ? b : a;
  if (gx == nullptr) return true;
  gx->setZero();
  const Vec3 n = c.normal;
  switch (c.kind) {
    case world::PairKind::PayloadObstacle:
      gx->segment<3>(0) = n;
      break;
    case world::PairKind::UavObstacle: {
      const double l = pb.params.uavs[c.i].cable_length;
      gx->segment<3>(0) = n;
      gx->segment<3>(q_offset(c.i)) = -l * (dir_projector(x.cables[c.i].dir) * n);
      break;
    }
    case world::PairKind::CableObstacle: {
      const double s = cable_sigma(pb.params, c.i, c.t_i);
      gx->segment<3>(0) = n;
      gx->segment<3>(q_offset(c.i)) = -s * (dir_projector(x.cables[c.i].dir) * n);
      break;
    }
    case world::PairKind::UavUav: {
      const double li = pb.params.uavs[c.i].cable_length;
      const double lj = pb.params.uavs[c.j].cable_length;
      gx->segment<3>(q_offset(c.i)) = -li * (dir_projector(x.cables[c.i].dir) * n);
      gx->segment<3>(q_offset(c.j)) = lj * (dir_projector(x.cables[c.j].dir) * n);
      break;
    }
    case world::PairKind::CableCable: {
      const double si = cable_sigma(pb.params, c.i, c.t_i);
      const double sj = cable_sigma(pb.params, c.j, c.t_j);
      gx->segment<3>(q_offset(c.i)) = -si * (dir_projector(x.cables[c.i].dir) * n);
      gx->segment<3>(q_offset(c.j)) = sj * (dir_projector(x.cables[c.j].dir) * n);
      break;
    }
    case world::PairKind::None:
      break;
  }
  return true;
}

// One-sided workspace violations of a scalar v with tangent row `row`.
template <class AddFn>
void bound_terms(double v, double lo, double hi, const AddFn& add) {
  if (v > hi) add(v - hi);
  if (v < lo) add(v - lo);  // negative residual, same quadratic
}

}  // namespace

void OptProblem::validate() const {
  if (steps < 2) throw std::invalid_argument("need at least two control intervals");
  if (!(dt0 > 0.0)) throw std::invalid_argument("dt0 must be positive");
  if (beta1 < 0 || beta2 < 0 || w_goal < 0 || w_bound < 0 || w_coll < 0 || margin < 0)
    throw std::invalid_argument("weights must be nonnegative");
  params.validate();
}

Guess build_initial_guess(const geom::ReferenceTrajectory& ref, const SystemParams& p) {
  Guess g;
  g.X = ref.states;
  for (auto& x : g.X) {
    x.payload_vel.setZero();
    for (auto& c : x.cables) c.ang_vel.setZero();
    for (auto& u : x.uavs) {
      u.orientation = Quat::Identity();
      u.body_rate.setZero();
    }
  }
  if (g.X.size() >= 2) g.U.assign(g.X.size() - 1, model::hover_control(p));
  return g;
}

double stage_cost(const OptProblem& pb, const FullState& x, const Control& u, double dt) {
  const double dte = dt - pb.dt0;
  const VecX uv = u.stacked();
  const VecX acc = model::continuous_accel(pb.params, x, u).stacked();
  return dte * dte + pb.beta1 * uv.squaredNorm() + pb.beta2 * acc.squaredNorm();
}

double penalty_cost(const OptProblem& pb, const FullState& x, int k) {
  double cost = 0.0;

  double viol = 0.0;
  if (pb.w_coll > 0 && clearance_and_grad(pb, x, viol, nullptr))
    cost += pb.w_coll * viol * viol;

  if (pb.w_bound > 0) {
    const auto add = [&](double r) { cost += pb.w_bound * r * r; };
    for (int a = 0; a < 3; ++a)
      bound_terms(x.payload_pos(a), pb.env.workspace_lo(a), pb.env.workspace_hi(a), add);
    for (int i = 0; i < x.n(); ++i) {
      const Vec3 pi = uav_position(x, pb.params, i);
      for (int a = 0; a < 3; ++a)
        bound_terms(pi(a), pb.env.workspace_lo(a), pb.env.workspace_hi(a), add);
    }
  }

  if (k == pb.steps && pb.w_goal > 0) {
    cost += pb.w_goal * (x.payload_pos - pb.x_goal.payload_pos).squaredNorm();
    cost += pb.w_goal * (x.payload_vel - pb.x_goal.payload_vel).squaredNorm();
    for (int i = 0; i < x.n(); ++i)
      cost += pb.w_goal * (x.cables[i].dir - pb.x_goal.cables[i].dir).squaredNorm();
  }
  return cost;
}

double control_penalty(const OptProblem& pb, const Control& u) {
  if (pb.w_bound <= 0) return 0.0;
  double cost = 0.0;
  for (int i = 0; i < u.n(); ++i) {
    const auto& lim = pb.params.uavs[i];
    for (int r = 0; r < 4; ++r) {
      const double f = u.motors[i](r);
      if (f > lim.motor_max) cost += pb.w_bound * (f - lim.motor_max) * (f - lim.motor_max);
      if (f < lim.motor_min) cost += pb.w_bound * (lim.motor_min - f) * (lim.motor_min - f);
    }
  }
  return cost;
}

double total_cost(const OptProblem& pb, const std::vector<FullState>& X,
                  const std::vector<Control>& U, double dt) {
  if (X.size() != U.size() + 1) throw std::invalid_argument("state/control length mismatch");
  double cost = 0.0;
  for (std::size_t k = 0; k < U.size(); ++k) {
    cost += stage_cost(pb, X[k], U[k], dt);
    cost += penalty_cost(pb, X[k], static_cast<int>(k));
    cost += control_penalty(pb, U[k]);
  }
  cost += penalty_cost(pb, X.back(), pb.steps);
  return cost;
}

CostDerivs cost_derivatives(const OptProblem& pb, const FullState& x, const Control& u,
                            double dt, int k) {
  const int n = x.n();
  const int nx = model::tangent_dim(n);
  const int nu = model::control_dim(n);
  CostDerivs d;
  d.lx = VecX::Zero(nx);
  d.lu = VecX::Zero(nu);
  d.lxx = MatX::Zero(nx, nx);
  d.luu = MatX::Zero(nu, nu);
  d.lux = MatX::Zero(nu, nx);

  const bool terminal = k == pb.steps;

  if (!terminal) {
    const VecX uv = u.stacked();
    d.lu += 2.0 * pb.beta1 * uv;
    d.luu.diagonal().array() += 2.0 * pb.beta1;

    if (pb.beta2 > 0) {
      const VecX acc = model::continuous_accel(pb.params, x, u).stacked();
      const auto aj = model::accel_jacobian(pb.params, x, u);
      d.lx.noalias() += 2.0 * pb.beta2 * aj.d_dx.transpose() * acc;
      d.lu.noalias() += 2.0 * pb.beta2 * aj.d_du.transpose() * acc;
      d.lxx.noalias() += 2.0 * pb.beta2 * aj.d_dx.transpose() * aj.d_dx;
      d.luu.noalias() += 2.0 * pb.beta2 * aj.d_du.transpose() * aj.d_du;
      d.lux.noalias() += 2.0 * pb.beta2 * aj.d_du.transpose() * aj.d_dx;
    }

    if (pb.w_bound > 0) {
      for (int i = 0; i < n; ++i) {
        const auto& lim = pb.params.uavs[i];
        for (int r = 0; r < 4; ++r) {
          const int idx = 4 * i + r;
          const double f = u.motors[i](r);
          if (f > lim.motor_max) {
            d.lu(idx) += 2.0 * pb.w_bound * (f - lim.motor_max);
            d.luu(idx, idx) += 2.0 * pb.w_bound;
          } else if (f < lim.motor_min) {
            d.lu(idx) += 2.0 * pb.w_bound * (f - lim.motor_min);
            d.luu(idx, idx) += 2.0 * pb.w_bound;
          }
        }
      }
    }
  }

  if (pb.w_coll > 0) {
    double viol = 0.0;
    VecX gx(nx);
    if (clearance_and_grad(pb, x, viol, &gx)) {
      d.lx.noalias() += -2.0 * pb.w_coll * viol * gx;
      d.lxx.noalias() += 2.0 * pb.w_coll * gx * gx.transpose();
    }
  }

  if (pb.w_bound > 0) {
    VecX row(nx);
    const auto add_bound = [&](double r) {
      d.lx.noalias() += 2.0 * pb.w_bound * r * row;
      d.lxx.noalias() += 2.0 * pb.w_bound * row * row.transpose();
    };
    for (int a = 0; a < 3; ++a) {
      row.setZero();
      row(a) = 1.0;
      bound_terms(x.payload_pos(a), pb.env.workspace_lo(a), pb.env.workspace_hi(a), add_bound);
    }
    for (int i = 0; i < n; ++i) {
      const double l = pb.params.uavs[i].cable_length;
      const Vec3 pi = uav_position(x, pb.params, i);
      const Mat3 proj = dir_projector(x.cables[i].dir);
      for (int a = 0; a < 3; ++a) {
        row.setZero();
        row(a) = 1.0;
        row.segment<3>(q_offset(i)) = -l * proj.row(a).transpose();
        bound_terms(pi(a), pb.env.workspace_lo(a), pb.env.workspace_hi(a), add_bound);
      }
    }
  }

  if (terminal && pb.w_goal > 0) {
    d.lx.segment<3>(0) += 2.0 * pb.w_goal * (x.payload_pos - pb.x_goal.payload_pos);
    d.lx.segment<3>(3) += 2.0 * pb.w_goal * (x.payload_vel - pb.x_goal.payload_vel);
    d.lxx.block<3, 3>(0, 0).diagonal().array() += 2.0 * pb.w_goal;
    d.lxx.block<3, 3>(3, 3).diagonal().array() += 2.0 * pb.w_goal;
    for (int i = 0; i < n; ++i) {
      const Mat3 proj = dir_projector(x.cables[i].dir);
      const Vec3 r = x.cables[i].dir - pb.x_goal.cables[i].dir;
      d.lx.segment<3>(q_offset(i)) += 2.0 * pb.w_goal * (proj * r);
      d.lxx.block<3, 3>(q_offset(i), q_offset(i)) += 2.0 * pb.w_goal * proj;
    }
  }
  return d;
}

namespace {

struct Gains {
  std::vector<VecX> ks;
  std::vector<MatX> Ks;
};

bool backward_pass(int T, const std::vector<MatX>& As, const std::vector<MatX>& Bs,
                   const std::vector<CostDerivs>& cds, double mu, Gains& g,
                   double& gnorm) {
  VecX Vx = cds[T].lx;
  MatX Vxx = cds[T].lxx;
  gnorm = 0.0;
  for (int k = T - 1; k >= 0; --k) {
    const MatX& A = As[k];
    const MatX& B = Bs[k];
    const VecX Qx = cds[k].lx + A.transpose() * Vx;
    const VecX Qu = cds[k].lu + B.transpose() * Vx;
    const MatX AtV = A.transpose() * Vxx;
    const MatX BtV = B.transpose() * Vxx;
    MatX Qxx = cds[k].lxx + AtV * A;
    MatX Quu = cds[k].luu + BtV * B;
    MatX Qux = cds[k].lux + BtV * A;
    Quu.diagonal().array() += mu;

    Eigen::LLT<MatX> llt(Quu);
    if (llt.info() != Eigen::Success) return false;
    g.ks[k] = -llt.solve(Qu);
    g.Ks[k] = -llt.solve(Qux);

    Vx = Qx + g.Ks[k].transpose() * (Quu * g.ks[k] + Qu) + Qux.transpose() * g.ks[k];
    Vxx = Qxx + g.Ks[k].transpose() * Quu * g.Ks[k] + g.Ks[k].transpose() * Qux +
          Qux.transpose() * g.Ks[k];
    Vxx = 0.5 * (Vxx + Vxx.transpose()).eval();
    gnorm = std::max(gnorm, Qu.lpNorm<Eigen::Infinity>());
  }
  return true;
}

bool forward_pass(const OptProblem& pb, double dt, const std::vector<FullState>& Xl,
                  const std::vector<Control>& Ul, const Gains& g, double alpha,
                  std::vector<FullState>& X, std::vector<Control>& U, double& cost) {
  const int T = pb.steps;
  X.resize(T + 1);
  U.resize(T);
  X[0] = pb.x_start;
  for (int k = 0; k < T; ++k) {
    const VecX delta = model::local_diff(X[k], Xl[k]);
    const VecX uv = Ul[k].stacked() + alpha * g.ks[k] + g.Ks[k] * delta;
    if (!uv.allFinite()) return false;
    U[k] = Control::from_stacked(uv);
    X[k + 1] = model::step(pb.params, X[k], U[k], dt);
    if (!finite_state(X[k + 1])) return false;
  }
  cost = total_cost(pb, X, U, dt);
  return std::isfinite(cost);
}

double rollout_defect(const OptProblem& pb, const std::vector<FullState>& X,
                      const std::vector<Control>& U, double dt) {
  double worst = 0.0;
  for (std::size_t k = 0; k < U.size(); ++k) {
    const FullState pred = model::step(pb.params, X[k], U[k], dt);
    worst = std::max(worst,
                     model::local_diff(X[k + 1], pred).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

double min_clearance(const OptProblem& pb, const std::vector<FullState>& X) {
  double worst = kInf;
  for (const auto& x : X)
    worst = std::min(worst, world::min_contact(world::body_geometries(x, pb.params), pb.env).dist);
  return worst;
}

Trajectory finish(const OptProblem& pb, double dt, std::vector<FullState> X,
                  std::vector<Control> U, double cost) {
  Trajectory t;
  t.dt = dt;
  t.X = std::move(X);
  t.U = std::move(U);
  t.diag.total_cost = cost;
  t.diag.max_defect = rollout_defect(pb, t.X, t.U, dt);
  t.diag.min_distance = min_clearance(pb, t.X);
  t.diag.goal_error = (t.X.back().payload_pos - pb.x_goal.payload_pos).norm();
  return t;
}

Trajectory run_ddp(const OptProblem& pb, const Guess& guess, double dt,
                   const SolveOptions& opts, Gains* gains_out) {
  pb.validate();
  const int T = pb.steps;
  if (static_cast<int>(guess.X.size()) != T + 1 || static_cast<int>(guess.U.size()) != T)
    throw std::invalid_argument("guess length does not match the problem horizon");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const int n = pb.params.n();
  const int nx = model::tangent_dim(n);
  const int nu = model::control_dim(n);

  std::vector<FullState> Xl = guess.X;
  std::vector<Control> Ul = guess.U;

  // Feasible incumbent: the guess itself when it already rolls out exactly,
  // otherwise the open-loop rollout of its controls.
  std::vector<FullState> X;
  std::vector<Control> U = guess.U;
  double cur = kInf;
  bool lin_is_incumbent = false;
  if (rollout_defect(pb, guess.X, guess.U, dt) <= 1e-10) {
    X = guess.X;
    cur = total_cost(pb, X, U, dt);
    lin_is_incumbent = true;
  } else {
    X.resize(T + 1);
    X[0] = pb.x_start;
    bool ok = true;
    for (int k = 0; k < T && ok; ++k) {
      X[k + 1] = model::step(pb.params, X[k], U[k], dt);
      ok = finite_state(X[k + 1]);
    }
    if (ok) cur = total_cost(pb, X, U, dt);
    if (!std::isfinite(cur)) {
      U.assign(T, Control::zeros(n));
      X[0] = pb.x_start;
      for (int k = 0; k < T; ++k) X[k + 1] = model::step(pb.params, X[k], U[k], dt);
      cur = total_cost(pb, X, U, dt);
    }
  }

  Gains gains;
  gains.ks.assign(T, VecX::Zero(nu));
  gains.Ks.assign(T, MatX::Zero(nu, nx));

  std::vector<MatX> As(T), Bs(T);
  std::vector<CostDerivs> cds(T + 1);
  std::vector<FullState> Xc;
  std::vector<Control> Uc;
  const Control u_dummy = Control::zeros(n);

  double mu = 1e-6;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    for (int k = 0; k < T; ++k) {
      const auto sj = model::step_jacobians(pb.params, Xl[k], Ul[k], dt);
      As[k] = sj.A;
      Bs[k] = sj.B;
      cds[k] = cost_derivatives(pb, Xl[k], Ul[k], dt, k);
    }
    cds[T] = cost_derivatives(pb, Xl[T], u_dummy, dt, T);

    double gnorm = 0.0;
    bool ok = false;
    while (!ok && mu <= 1e10) {
      ok = backward_pass(T, As, Bs, cds, mu, gains, gnorm);
      if (!ok) mu *= 10.0;
    }
    if (!ok) break;

    if (lin_is_incumbent && gnorm < 1e-9) break;  // stationary

    bool accepted = false;
    for (double alpha = 1.0; alpha >= 1e-3 && !accepted; alpha *= 0.5) {
      double cost = kInf;
      if (!forward_pass(pb, dt, Xl, Ul, gains, alpha, Xc, Uc, cost)) continue;
      if (cost < cur - 1e-12 * std::max(1.0, std::abs(cur))) {
        const double rel = (cur - cost) / std::max(1.0, std::abs(cur));
        X = Xc;
        U = Uc;
        cur = cost;
        Xl = X;
        Ul = U;
        lin_is_incumbent = true;
        accepted = true;
        mu = std::max(mu * 0.3, 1e-9);
        if (opts.log != nullptr)
          opts.log->push_back(IterLog{iter, cur, rollout_defect(pb, X, U, dt),
                                      min_clearance(pb, X), dt});
        if (rel < opts.tol) iter = opts.max_iters;  // converged
      }
    }
    if (!accepted) {
      mu *= 10.0;
      if (mu > 1e10) break;
    }
  }

  if (gains_out != nullptr) {
    // Gains consistent with the returned trajectory, for callers that re-roll
    // it at a different time step.
    for (int k = 0; k < T; ++k) {
      const auto sj = model::step_jacobians(pb.params, X[k], U[k], dt);
      As[k] = sj.A;
      Bs[k] = sj.B;
      cds[k] = cost_derivatives(pb, X[k], U[k], dt, k);
    }
    cds[T] = cost_derivatives(pb, X[T], u_dummy, dt, T);
    double gnorm = 0.0;
    double m2 = std::max(mu, 1e-6);
    while (!backward_pass(T, As, Bs, cds, m2, gains, gnorm) && m2 <= 1e10) m2 *= 10.0;
    *gains_out = gains;
  }

  return finish(pb, dt, std::move(X), std::move(U), cur);
}

double policy_rollout(const OptProblem& pb, double dt, const Trajectory& around,
                      const Gains& gains, std::vector<FullState>& X,
                      std::vector<Control>& U) {
  double cost = kInf;
  if (!forward_pass(pb, dt, around.X, around.U, gains, 0.0, X, U, cost)) return kInf;
  return cost;
}

Trajectory optimize_inner(const OptProblem& pb, const Guess& guess, const SolveOptions& opts,
                          bool allow_escalation) {
  Gains gains;
  Trajectory best = run_ddp(pb, guess, pb.dt0, opts, &gains);

  const double lo = 0.2 * pb.dt0, hi = 5.0 * pb.dt0;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;

  for (int round = 0; round < 8; ++round) {
    // Golden-section over the time step, rolling the incumbent policy.
    double a = lo, b = hi;
    double best_dt = best.dt, best_cost = kInf;
    std::vector<FullState> bX;
    std::vector<Control> bU;
    std::vector<FullState> eX;
    std::vector<Control> eU;
    const auto eval = [&](double dte) {
      const double c = policy_rollout(pb, dte, best, gains, eX, eU);
      if (c < best_cost) {
        best_cost = c;
        best_dt = dte;
        bX = eX;
        bU = eU;
      }
      return c;
    };
    double x1 = b - (b - a) * invphi, x2 = a + (b - a) * invphi;
    double f1 = eval(x1), f2 = eval(x2);
    for (int e = 2; e < 20; ++e) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - (b - a) * invphi;
        f1 = eval(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + (b - a) * invphi;
        f2 = eval(x2);
      }
    }

    const double thresh = best.diag.total_cost - opts.tol * std::max(1.0, best.diag.total_cost);
    if (!(best_cost < thresh)) break;

    Guess warm{std::move(bX), std::move(bU)};
    Trajectory next = run_ddp(pb, warm, best_dt, opts, &gains);
    if (next.diag.total_cost < thresh)
      best = std::move(next);
    else
      break;
  }

  if (allow_escalation && best.diag.goal_error > pb.goal_tolerance) {
    OptProblem hard = pb;
    hard.w_goal *= 10.0;
    hard.w_bound *= 10.0;
    hard.w_coll *= 10.0;
    Trajectory pushed = optimize_inner(hard, Guess{best.X, best.U}, opts, false);
    if (pushed.diag.goal_error < best.diag.goal_error) best = std::move(pushed);
  }
  return best;
}

}  // namespace

Trajectory solve_ddp(const OptProblem& pb, const Guess& guess, double dt,
                     const SolveOptions& opts) {
  return run_ddp(pb, guess, dt, opts, nullptr);
}

Trajectory optimize(const OptProblem& pb, const Guess& guess, const SolveOptions& opts) {
  return optimize_inner(pb, guess, opts, true);
}

std::vector<Trajectory> iterative_refine(const OptProblem& pb, const Guess& guess,
                                         int n_iters, double shrink,
                                         const SolveOptions& opts) {
  if (n_iters < 1) throw std::invalid_argument("need at least one refinement round");
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("shrink must be in (0,1)");
  std::vector<Trajectory> out;
  out.reserve(n_iters);
  OptProblem pbj = pb;
  Guess g = guess;
  for (int j = 0; j < n_iters; ++j) {
    pbj.dt0 = pb.dt0 * std::pow(shrink, j);
    out.push_back(optimize(pbj, g, opts));
    g.X = out.back().X;
    g.U = out.back().U;
  }
  return out;
}

}  // namespace plp::opt
