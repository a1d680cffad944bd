#include "dpmhm/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpmhm {
namespace {

// Square solve on an n x n matrix; entries already clamped to <= kInfCost.
std::vector<int> solve_square(const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(c.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
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
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

LinearAssignment solve_linear_assignment(const Eigen::MatrixXd& cost) {
  LinearAssignment out;
  const auto rows = cost.rows();
  const auto cols = cost.cols();
  out.row_to_col.assign(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return out;

  const auto n = std::max(rows, cols);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double x = cost(i, j);
      sq(i, j) = (std::isnan(x) || x >= kInfCost) ? kInfCost : x;
    }

  const std::vector<int> assignment = solve_square(sq);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int j = assignment[static_cast<std::size_t>(i)];
    if (j >= cols) continue;
    const double x = sq(i, j);
    if (x >= 0.5 * kInfCost) throw InfeasibleAssignment("no assignment avoids forbidden cells");
    out.row_to_col[static_cast<std::size_t>(i)] = j;
    out.total_cost += x;
  }
  return out;
}

}  // namespace dpmhm
