#pragma once

#include <yaml-cpp/yaml.h>

#include "plp/types.hpp"

namespace plp {

YAML::Node params_to_yaml(const SystemParams& p);
SystemParams params_from_yaml(const YAML::Node& node);

YAML::Node vec3_to_yaml(const Vec3& v);
Vec3 vec3_from_yaml(const YAML::Node& node);

}  // namespace plp
