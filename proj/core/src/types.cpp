#include "dpmhm/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace dpmhm {

ClassLabel ClassRegistry::intern(const std::string& name) {
  if (auto it = ids_.find(name); it != ids_.end()) return ClassLabel{it->second};
  const int id = static_cast<int>(names_.size());
  names_.push_back(name);
  ids_.emplace(name, id);
  return ClassLabel{id};
}

const std::string& ClassRegistry::name(ClassLabel c) const {
  if (c.id < 0 || c.id >= size()) throw ContractError("unknown class id " + std::to_string(c.id));
  return names_[static_cast<std::size_t>(c.id)];
}

Pose Pose::from_yaw(const Vec3& t, double yaw) {
  Pose p;
  p.translation = t;
  p.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  return p;
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.conjugate();
  out.translation = -(out.rotation * translation);
  return out;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = (rotation * rhs.rotation).normalized();
  out.translation = translation + rotation * rhs.translation;
  return out;
}

Vec3 Pose::operator*(const Vec3& p) const { return translation + rotation * p; }

double Pose::yaw() const {
  const Mat3 r = R();
  return std::atan2(r(1, 0), r(0, 0));
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(phi);
  return Eigen::AngleAxisd(theta, phi / theta).toRotationMatrix();
}

Vec3 so3_log(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > M_PI) {
    angle = 2.0 * M_PI - angle;
    axis = -axis;
  }
  return axis * angle;
}

Mat3 so3_right_jacobian_inv(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 W = skew(phi);
  if (theta < 1e-6) return Mat3::Identity() + 0.5 * W + (1.0 / 12.0) * W * W;
  const double coef = 1.0 / (theta * theta) - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() + 0.5 * W + coef * W * W;
}

Pose retract(const Pose& x, const Vec6& delta) {
  Pose out;
  out.translation = x.translation + x.rotation * delta.head<3>();
  out.rotation = (x.rotation * Eigen::Quaterniond(so3_exp(delta.tail<3>()))).normalized();
  return out;
}

void ClassHistogram::add(ClassLabel c, long n) {
  counts[c.id] += n;
  total += n;
}

long ClassHistogram::count(ClassLabel c) const {
  auto it = counts.find(c.id);
  return it == counts.end() ? 0 : it->second;
}

std::vector<double> ClassHistogram::normalized(int num_classes) const {
  std::vector<double> out(static_cast<std::size_t>(num_classes), 0.0);
  if (total == 0) return out;
  for (const auto& [id, n] : counts) {
    if (id < 0 || id >= num_classes) throw ContractError("class id outside histogram dimension");
    out[static_cast<std::size_t>(id)] = static_cast<double>(n) / static_cast<double>(total);
  }
  return out;
}

std::map<int, double> ClassHistogram::normalized_sparse() const {
  std::map<int, double> out;
  if (total == 0) return out;
  for (const auto& [id, n] : counts) out[id] = static_cast<double>(n) / static_cast<double>(total);
  return out;
}

bool is_spd(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > tol;
}

Mat3 project_spd(const Mat3& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()));
  Vec3 ev = es.eigenvalues().cwiseMax(floor);
  Mat3 out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace dpmhm
