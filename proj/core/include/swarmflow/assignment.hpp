#pragma once

#include <vector>

#include "swarmflow/lti.hpp"

namespace swarmflow {

// Exact minimum-cost perfect matching on a square cost matrix (Hungarian method with
// potentials, O(n^3)). Returns col[i], the column assigned to row i.
std::vector<int> solve_assignment(const Matrix& cost);

// Squared Euclidean cost between the columns of x and the columns of y.
Matrix squared_distance_cost(const Matrix& x, const Matrix& y);

}  // namespace swarmflow
