#pragma once

#include <span>
#include <vector>

namespace dpmhm {

/// Incremental (insert-only) kd-tree over fixed-dimension points with integer payloads.
class KdIndex {
 public:
  explicit KdIndex(int dim) : dim_(dim) {}

  void insert(std::span<const double> point, int payload);

  /// Payloads of all points with Euclidean distance <= radius, sorted ascending.
  [[nodiscard]] std::vector<int> radius_query(std::span<const double> query, double radius) const;

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] bool empty() const { return nodes_.empty(); }

 private:
  struct Node {
    std::vector<double> point;
    int payload = 0;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int dim_;
  std::vector<Node> nodes_;
};

}  // namespace dpmhm
