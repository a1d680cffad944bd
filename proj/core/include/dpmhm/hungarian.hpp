#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace dpmhm {

/// Cost used for forbidden cells. Anything at or above half of it counts as infinite.
inline constexpr double kInfCost = 1e18;

class InfeasibleAssignment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinearAssignment {
  /// Column assigned to each row, -1 when the row is left unassigned (more rows than columns).
  std::vector<int> row_to_col;
  double total_cost = 0.0;
};

/// Minimum-cost one-to-one assignment (shortest augmenting path Kuhn-Munkres, O(n^3)).
/// Rectangular inputs are padded with zero-cost dummies. Rows are inserted in
/// increasing order and the lowest column index wins among equal slacks, so the
/// result is deterministic under ties. Throws InfeasibleAssignment when every
/// complete assignment uses a forbidden cell.
LinearAssignment solve_linear_assignment(const Eigen::MatrixXd& cost);

}  // namespace dpmhm
