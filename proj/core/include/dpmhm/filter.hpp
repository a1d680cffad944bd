#pragma once

#include "dpmhm/types.hpp"

#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace dpmhm {

struct UkfParams {
  double alpha = 1e-1;
  double beta = 2.0;
  double kappa = 0.0;
};

class CovarianceConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unscented measurement update of a landmark position with the identity
/// measurement model and additive noise `meas_cov`. Does not touch assign_count.
Landmark ukf_update(const Landmark& lm, const SemanticMeasurement& m, const Mat3& meas_cov, const UkfParams& params);

/// ukf_update with one retry after inflating the prior covariance by 1e-9 I.
Landmark ukf_update_conditioned(const Landmark& lm, const SemanticMeasurement& m, const Mat3& meas_cov,
                                const UkfParams& params);

struct GaussianComponent {
  double weight = 1.0;
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
};

struct MomentMatch {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
};

/// Single Gaussian with the mixture's first two moments, SPD-projected.
MomentMatch moment_match(std::span<const GaussianComponent> components);

struct FusedLandmark {
  int id = 0;
  ClassLabel label;
  std::vector<GaussianComponent> components;
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
  int assign_count = 0;
  int submap_id = 0;
  double last_seen = 0.0;

  [[nodiscard]] Landmark as_landmark() const;
};

struct WeightedLandmarks {
  double weight = 1.0;
  std::span<const Landmark> landmarks;
};

/// Per-landmark Gaussian mixture over weighted hypotheses, keyed by landmark id.
/// Component weights are renormalized over the hypotheses that contain the landmark.
std::map<int, FusedLandmark> fuse_hypotheses(std::span<const WeightedLandmarks> hypotheses);

}  // namespace dpmhm
