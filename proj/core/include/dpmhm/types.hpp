#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dpmhm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Thrown when a caller violates a documented precondition.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for numerically invalid parameters (non-SPD covariances etc.).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense semantic class id. Names live in a ClassRegistry and are for logs only.
struct ClassLabel {
  int id = 0;

  friend bool operator==(ClassLabel a, ClassLabel b) { return a.id == b.id; }
  friend auto operator<=>(ClassLabel a, ClassLabel b) { return a.id <=> b.id; }
};

/// Assigns dense ids to class names at ingest.
class ClassRegistry {
 public:
  ClassLabel intern(const std::string& name);
  [[nodiscard]] const std::string& name(ClassLabel c) const;
  [[nodiscard]] int size() const { return static_cast<int>(names_.size()); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

struct SemanticMeasurement {
  int scene_id = 0;
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  ClassLabel label;
};

struct Landmark {
  int id = 0;
  ClassLabel label;
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
  int assign_count = 0;
  int submap_id = 0;
  double last_seen = 0.0;
};

/// Rigid transform with a unit quaternion rotation.
struct Pose {
  Vec3 translation = Vec3::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  static Pose identity() { return {}; }
  static Pose from_yaw(const Vec3& t, double yaw);

  [[nodiscard]] Mat3 R() const { return rotation.toRotationMatrix(); }
  [[nodiscard]] Pose inverse() const;
  [[nodiscard]] Pose operator*(const Pose& rhs) const;
  [[nodiscard]] Vec3 operator*(const Vec3& p) const;
  [[nodiscard]] double yaw() const;
};

/// Rotation-vector exponential / logarithm on SO(3).
Mat3 so3_exp(const Vec3& phi);
Vec3 so3_log(const Mat3& R);
Mat3 skew(const Vec3& v);
/// Inverse of the right Jacobian of SO(3).
Mat3 so3_right_jacobian_inv(const Vec3& phi);

/// Right-multiplied retraction: t <- t + R dt, R <- R Exp(dtheta).
Pose retract(const Pose& x, const Vec6& delta);

struct ClassHistogram {
  std::map<int, long> counts;
  long total = 0;

  void add(ClassLabel c, long n = 1);
  [[nodiscard]] long count(ClassLabel c) const;
  /// Dense normalized vector over `num_classes` dimensions (all zeros for an empty histogram).
  [[nodiscard]] std::vector<double> normalized(int num_classes) const;
  /// Normalized weights for the classes present, keyed by class id.
  [[nodiscard]] std::map<int, double> normalized_sparse() const;
};

template <typename T>
concept Labelled = requires(const T& t) {
  { t.label } -> std::convertible_to<ClassLabel>;
};

template <Labelled T>
ClassHistogram histogram_of(std::span<const T> items) {
  ClassHistogram h;
  for (const auto& it : items) h.add(it.label);
  return h;
}

template <Labelled T>
ClassHistogram histogram_of(const std::vector<T>& items) {
  return histogram_of(std::span<const T>(items));
}

/// True when `m` is symmetric and every eigenvalue exceeds `tol`.
bool is_spd(const Mat3& m, double tol = 1e-12);

/// Symmetrize and clamp eigenvalues from below.
Mat3 project_spd(const Mat3& m, double floor = 1e-12);

}  // namespace dpmhm
