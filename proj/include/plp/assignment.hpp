#pragma once

#include <vector>

#include "plp/types.hpp"

namespace plp {

// Minimum-cost perfect matching on a square cost matrix: returns perm with
// perm[row] = column such that the summed cost is minimal.
std::vector<int> optimal_assignment(const MatX& cost);

double assignment_cost(const MatX& cost, const std::vector<int>& perm);

}  // namespace plp
