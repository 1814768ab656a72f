#include "plp/yaml_io.hpp"

namespace plp {

YAML::Node vec3_to_yaml(const Vec3& v) {
  YAML::Node n;
  n.SetStyle(YAML::EmitterStyle::Flow);
  for (int a = 0; a < 3; ++a) n.push_back(v(a));
  return n;
}

Vec3 vec3_from_yaml(const YAML::Node& node) {
  if (!node.IsSequence() || node.size() != 3)
    throw std::invalid_argument("expected a 3-element sequence");
  return Vec3(node[0].as<double>(), node[1].as<double>(), node[2].as<double>());
}

YAML::Node params_to_yaml(const SystemParams& p) {
  YAML::Node n;
  n["payload_mass"] = p.payload_mass;
  n["payload_radius"] = p.payload_radius;
  n["cable_radius"] = p.cable_radius;
  n["gravity"] = p.gravity;
  for (const auto& u : p.uavs) {
    YAML::Node un;
    un["mass"] = u.mass;
    un["inertia"] = vec3_to_yaml(u.inertia_diag);
    un["cable_length"] = u.cable_length;
    un["arm_length"] = u.arm_length;
    un["torque_coeff"] = u.torque_coeff;
    un["motor_min"] = u.motor_min;
    un["motor_max"] = u.motor_max;
    un["radius"] = u.radius;
    n["robots"].push_back(un);
  }
  return n;
}

SystemParams params_from_yaml(const YAML::Node& node) {
  SystemParams p;
  p.payload_mass = node["payload_mass"].as<double>();
  p.payload_radius = node["payload_radius"].as<double>();
  p.cable_radius = node["cable_radius"].as<double>();
  if (node["gravity"]) p.gravity = node["gravity"].as<double>();
  for (const auto& un : node["robots"]) {
    UavParams u;
    u.mass = un["mass"].as<double>();
    if (un["inertia"]) u.inertia_diag = vec3_from_yaml(un["inertia"]);
    u.cable_length = un["cable_length"].as<double>();
    if (un["arm_length"]) u.arm_length = un["arm_length"].as<double>();
    if (un["torque_coeff"]) u.torque_coeff = un["torque_coeff"].as<double>();
    u.motor_min = un["motor_min"].as<double>();
    u.motor_max = un["motor_max"].as<double>();
    u.radius = un["radius"].as<double>();
    p.uavs.push_back(u);
  }
  p.validate();
  return p;
}

}  // namespace plp
