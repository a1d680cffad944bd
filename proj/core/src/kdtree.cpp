#include "dpmhm/kdtree.hpp"

#include "dpmhm/types.hpp"

#include <algorithm>

namespace dpmhm {

void KdIndex::insert(std::span<const double> point, int payload) {
  if (static_cast<int>(point.size()) != dim_) throw ContractError("kd-tree point has wrong dimension");
  Node n;
  n.point.assign(point.begin(), point.end());
  n.payload = payload;
  const int index = static_cast<int>(nodes_.size());
  if (nodes_.empty()) {
    nodes_.push_back(std::move(n));
    return;
  }
  int cur = 0;
  for (;;) {
    Node& c = nodes_[static_cast<std::size_t>(cur)];
    const auto axis = static_cast<std::size_t>(c.axis);
    int& next = point[axis] < c.point[axis] ? c.left : c.right;
    if (next < 0) {
      next = index;
      n.axis = (c.axis + 1) % dim_;
      break;
    }
    cur = next;
  }
  nodes_.push_back(std::move(n));
}

std::vector<int> KdIndex::radius_query(std::span<const double> query, double radius) const {
  if (static_cast<int>(query.size()) != dim_) throw ContractError("kd-tree query has wrong dimension");
  std::vector<int> out;
  if (nodes_.empty() || radius < 0.0) return out;
  const double r2 = radius * radius;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    double d2 = 0.0;
    for (int k = 0; k < dim_; ++k) {
      const double d = query[static_cast<std::size_t>(k)] - n.point[static_cast<std::size_t>(k)];
      d2 += d * d;
    }
    if (d2 <= r2) out.push_back(n.payload);
    const double diff = query[static_cast<std::size_t>(n.axis)] - n.point[static_cast<std::size_t>(n.axis)];
    // Left holds points with coordinate < split, right holds >= split.
    if (n.left >= 0 && diff - radius < 0.0) stack.push_back(n.left);
    if (n.right >= 0 && diff + radius >= 0.0) stack.push_back(n.right);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dpmhm
