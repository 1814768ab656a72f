#include "plp/reference_export.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "plp/model.hpp"
#include "plp/yaml_io.hpp"

namespace plp::ctrlref {

namespace {

constexpr int kCsvDigits = 17;

void append_num(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", kCsvDigits, v);
  out += buf;
}

std::string sidecar_path(const std::string& path) { return path + ".meta.yaml"; }

}  // namespace

Vec3 uav_reference_acceleration(const Vec3& payload_acc, const Vec3& q, const Vec3& w,
                                const Vec3& wdot, const Vec3& qdot, double cable_length) {
  return payload_acc - cable_length * (wdot.cross(q) + w.cross(qdot));
}

double cable_tension(const SystemParams& p, int i, const Vec3& uav_acc,
                     double collective_thrust, const Quat& rot) {
  const auto& uav = p.uavs[i];
  const Vec3 thrust_world = collective_thrust * (rot * Vec3::UnitZ());
  return (uav.mass * (uav_acc + p.gravity * Vec3::UnitZ()) - thrust_world).norm();
}

ControllerReference reference_cable_forces(const geom::ReferenceTrajectory& ref,
                                           const SystemParams& p) {
  if (ref.states.empty()) throw std::invalid_argument("empty reference");
  const int n = ref.states.front().n();
  if (n != p.n()) throw std::invalid_argument("robot count mismatch");
  const int K = static_cast<int>(ref.states.size()) - 1;
  const Control hover = model::hover_control(p);

  ControllerReference out;
  out.dt = ref.dt;
  out.n = n;
  out.steps.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    const FullState& x = ref.states[k];
    RefStep& s = out.steps[k];
    s.t = k * ref.dt;
    s.p0 = x.payload_pos;
    s.v0 = x.payload_vel;

    Vec3 a0 = Vec3::Zero();
    if (K > 0) {
      if (k == 0)
        a0 = (ref.states[1].payload_vel - ref.states[0].payload_vel) / ref.dt;
      else if (k == K)
        a0 = (ref.states[K].payload_vel - ref.states[K - 1].payload_vel) / ref.dt;
      else
        a0 = (ref.states[k + 1].payload_vel - ref.states[k - 1].payload_vel) / (2.0 * ref.dt);
    }

    s.q.resize(n);
    s.w.resize(n);
    s.rot.assign(n, Quat::Identity());
    s.omega.assign(n, Vec3::Zero());
    s.motors.resize(n);
    s.mu0.resize(n);
    s.tension.resize(n);
    for (int i = 0; i < n; ++i) {
      const Vec3& q = x.cables[i].dir;
      const double l = p.uavs[i].cable_length;
      s.q[i] = q;
      s.w[i] = x.cables[i].ang_vel;
      s.motors[i] = hover.motors[i];
      // Level robots at per-robot hover thrust: the gravity part of the cable
      // equation cancels, leaving the swing driven by the payload alone.
      const Vec3 wdot = q.cross(a0) / l;
      const Vec3 acc_i = uav_reference_acceleration(a0, q, s.w[i], wdot, Vec3::Zero(), l);
      s.tension[i] = cable_tension(p, i, acc_i, model::hover_thrust(p, i), Quat::Identity());
      s.mu0[i] = -s.tension[i] * q;
    }
  }
  return out;
}

ControllerReference reference_cable_forces(const opt::Trajectory& traj, const SystemParams& p) {
  if (traj.X.empty()) throw std::invalid_argument("empty trajectory");
  if (traj.X.size() != traj.U.size() + 1)
    throw std::invalid_argument("state/control length mismatch");
  const int n = traj.X.front().n();
  if (n != p.n()) throw std::invalid_argument("robot count mismatch");
  const int K = static_cast<int>(traj.U.size());

  ControllerReference out;
  out.dt = traj.dt;
  out.n = n;
  out.steps.resize(K + 1);
  for (int k = 0; k <= K; ++k) {
    const FullState& x = traj.X[k];
    const Control& u = traj.U[std::min(k, K - 1)];  // terminal row holds the last input
    const Accel acc = model::continuous_accel(p, x, u);

    RefStep& s = out.steps[k];
    s.t = k * traj.dt;
    s.p0 = x.payload_pos;
    s.v0 = x.payload_vel;
    s.q.resize(n);
    s.w.resize(n);
    s.rot.resize(n);
    s.omega.resize(n);
    s.motors.resize(n);
    s.mu0.resize(n);
    s.tension.resize(n);
    for (int i = 0; i < n; ++i) {
      const Vec3& q = x.cables[i].dir;
      const Vec3& w = x.cables[i].ang_vel;
      const double l = p.uavs[i].cable_length;
      s.q[i] = q;
      s.w[i] = w;
      s.rot[i] = x.uavs[i].orientation;
      s.omega[i] = x.uavs[i].body_rate;
      s.motors[i] = u.motors[i];
      const Vec3 qdot = w.cross(q);
      const Vec3 acc_i =
          uav_reference_acceleration(acc.payload_acc, q, w, acc.cable_ang_acc[i], qdot, l);
      const double f = model::wrench_from_motors(p.uavs[i], u.motors[i]).thrust;
      s.tension[i] = cable_tension(p, i, acc_i, f, s.rot[i]);
      s.mu0[i] = -s.tension[i] * q;
    }
  }
  return out;
}

double qp_tracking_cost(const std::vector<Vec3>& mu_d, const std::vector<Vec3>& mu0,
                        double lambda) {
  if (mu_d.size() != mu0.size()) throw std::invalid_argument("cable force count mismatch");
  double c = 0.0;
  for (std::size_t i = 0; i < mu_d.size(); ++i)
    c += 0.5 * mu_d[i].squaredNorm() + lambda * (mu0[i] - mu_d[i]).squaredNorm();
  return c;
}

void export_trajectory(const ControllerReference& ref, const SystemParams& p,
                       const std::string& path, const ExportMeta& meta) {
  if (ref.steps.empty()) throw std::invalid_argument("nothing to export");
  const int n = ref.n;

  std::string out = "t,p0x,p0y,p0z,v0x,v0y,v0z";
  for (int i = 0; i < n; ++i) {
    const std::string s = std::to_string(i);
    out += ",q" + s + "x,q" + s + "y,q" + s + "z,w" + s + "x,w" + s + "y,w" + s + "z";
  }
  for (int i = 0; i < n; ++i) {
    const std::string s = std::to_string(i);
    out += ",r" + s + "w,r" + s + "x,r" + s + "y,r" + s + "z,o" + s + "x,o" + s + "y,o" + s + "z";
  }
  for (int i = 0; i < n; ++i) {
    const std::string s = std::to_string(i);
    out += ",f" + s + "_0,f" + s + "_1,f" + s + "_2,f" + s + "_3";
  }
  for (int i = 0; i < n; ++i) {
    const std::string s = std::to_string(i);
    out += ",mu" + s + "x,mu" + s + "y,mu" + s + "z,T" + s;
  }
  out += "\n";

  for (const auto& s : ref.steps) {
    if (static_cast<int>(s.q.size()) != n || static_cast<int>(s.motors.size()) != n ||
        static_cast<int>(s.mu0.size()) != n)
      throw std::invalid_argument("ragged reference step");
    std::vector<double> row;
    row.push_back(s.t);
    for (int a = 0; a < 3; ++a) row.push_back(s.p0(a));
    for (int a = 0; a < 3; ++a) row.push_back(s.v0(a));
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) row.push_back(s.q[i](a));
      for (int a = 0; a < 3; ++a) row.push_back(s.w[i](a));
    }
    for (int i = 0; i < n; ++i) {
      row.push_back(s.rot[i].w());
      row.push_back(s.rot[i].x());
      row.push_back(s.rot[i].y());
      row.push_back(s.rot[i].z());
      for (int a = 0; a < 3; ++a) row.push_back(s.omega[i](a));
    }
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < 4; ++r) row.push_back(s.motors[i](r));
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) row.push_back(s.mu0[i](a));
      row.push_back(s.tension[i]);
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      append_num(out, row[c]);
    }
    out += '\n';
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
  f.close();
  if (!f) throw std::runtime_error("write failed for " + path);

  YAML::Node m;
  m["dt"] = ref.dt;
  m["robots"] = n;
  m["steps"] = ref.steps.size();
  m["source"] = meta.source;
  m["seed"] = meta.seed;
  m["version"] = meta.version;
  m["params"] = params_to_yaml(p);
  std::ofstream mf(sidecar_path(path), std::ios::binary);
  if (!mf) throw std::runtime_error("cannot write " + sidecar_path(path));
  mf << m << "\n";
}

ControllerReference load_trajectory(const std::string& path, SystemParams* params_out,
                                    ExportMeta* meta_out) {
  const YAML::Node m = YAML::LoadFile(sidecar_path(path));
  ControllerReference ref;
  ref.dt = m["dt"].as<double>();
  ref.n = m["robots"].as<int>();
  if (params_out) *params_out = params_from_yaml(m["params"]);
  if (meta_out) {
    meta_out->source = m["source"].as<std::string>();
    meta_out->seed = m["seed"].as<std::uint64_t>();
    meta_out->version = m["version"].as<std::string>();
  }

  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty trajectory file");

  const int n = ref.n;
  const std::size_t cols = 7 + static_cast<std::size_t>(n) * 21;
  std::vector<double> row(cols);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const char* s = line.c_str();
    for (std::size_t c = 0; c < cols; ++c) {
      char* end = nullptr;
      row[c] = std::strtod(s, &end);
      if (end == s) throw std::runtime_error("short row in " + path);
      s = end;
      if (*s == ',') ++s;
    }

    RefStep st;
    std::size_t c = 0;
    st.t = row[c++];
    for (int a = 0; a < 3; ++a) st.p0(a) = row[c++];
    for (int a = 0; a < 3; ++a) st.v0(a) = row[c++];
    st.q.resize(n);
    st.w.resize(n);
    st.rot.resize(n);
    st.omega.resize(n);
    st.motors.resize(n);
    st.mu0.resize(n);
    st.tension.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) st.q[i](a) = row[c++];
      for (int a = 0; a < 3; ++a) st.w[i](a) = row[c++];
    }
    for (int i = 0; i < n; ++i) {
      const double w = row[c], x = row[c + 1], y = row[c + 2], z = row[c + 3];
      c += 4;
      st.rot[i] = Quat(w, x, y, z);
      for (int a = 0; a < 3; ++a) st.omega[i](a) = row[c++];
    }
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < 4; ++r) st.motors[i](r) = row[c++];
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) st.mu0[i](a) = row[c++];
      st.tension[i] = row[c++];
    }
    ref.steps.push_back(std::move(st));
  }
  if (ref.steps.empty()) throw std::runtime_error("no rows in " + path);
  return ref;
}

}  // namespace plp::ctrlref
