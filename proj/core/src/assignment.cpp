#include "swarmflow/assignment.hpp"

#include <limits>

namespace swarmflow {

std::vector<int> solve_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ShapeError("assignment cost matrix must be square");
  if (!cost.allFinite()) throw NumericError("assignment costs must be finite");
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based arrays; row_pot/col_pot are the dual potentials, match[j] the row on column j.
  std::vector<double> row_pot(n + 1, 0.0);
  std::vector<double> col_pot(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - row_pot[i0] - col_pot[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          row_pot[match[j]] += delta;
          col_pot[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= n; ++j) col_of_row[match[j] - 1] = j - 1;
  return col_of_row;
}

Matrix squared_distance_cost(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw ShapeError("point dimensions differ in cost matrix");
  Matrix c(x.cols(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    c.col(j) = (x.colwise() - y.col(j)).colwise().squaredNorm().transpose();
  }
  return c;
}

}  // namespace swarmflow
