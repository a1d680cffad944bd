#include "dpmhm/filter.hpp"

#include <Eigen/Cholesky>

#include <array>

namespace dpmhm {

Landmark ukf_update(const Landmark& lm, const SemanticMeasurement& m, const Mat3& meas_cov, const UkfParams& params) {
  constexpr int n = 3;
  const double lambda = params.alpha * params.alpha * (n + params.kappa) - n;
  const double spread = n + lambda;
  if (!(spread > 0.0)) throw ParameterError("unscented spread n + lambda must be positive");

  Eigen::LLT<Mat3> llt(spread * lm.cov);
  if (llt.info() != Eigen::Success || !lm.cov.allFinite())
    throw CovarianceConditioningError("sigma-point Cholesky failed for landmark " + std::to_string(lm.id));
  const Mat3 sqrt_cov = llt.matrixL();

  std::array<Vec3, 2 * n + 1> sigma;
  sigma[0] = lm.mean;
  for (int i = 0; i < n; ++i) {
    sigma[1 + i] = lm.mean + sqrt_cov.col(i);
    sigma[1 + n + i] = lm.mean - sqrt_cov.col(i);
  }
  const double wm0 = lambda / spread;
  const double wc0 = wm0 + (1.0 - params.alpha * params.alpha + params.beta);
  const double wi = 1.0 / (2.0 * spread);

  // h(x) = x, so the propagated points are the sigma points themselves.
  Vec3 z_mean = wm0 * sigma[0];
  for (int i = 1; i < 2 * n + 1; ++i) z_mean += wi * sigma[i];

  Mat3 s = meas_cov;
  Mat3 pxz = Mat3::Zero();
  for (int i = 0; i < 2 * n + 1; ++i) {
    const double w = i == 0 ? wc0 : wi;
    const Vec3 dz = sigma[i] - z_mean;
    const Vec3 dx = sigma[i] - lm.mean;
    s += w * dz * dz.transpose();
    pxz += w * dx * dz.transpose();
  }

  const Mat3 gain = s.llt().solve(pxz.transpose()).transpose();
  Landmark out = lm;
  out.mean = lm.mean + gain * (m.position - z_mean);
  Mat3 cov = lm.cov - gain * s * gain.transpose();
  out.cov = 0.5 * (cov + cov.transpose());
  out.last_seen = m.time;
  return out;
}

Landmark ukf_update_conditioned(const Landmark& lm, const SemanticMeasurement& m, const Mat3& meas_cov,
                                const UkfParams& params) {
  try {
    return ukf_update(lm, m, meas_cov, params);
  } catch (const CovarianceConditioningError&) {
    Landmark inflated = lm;
    inflated.cov += 1e-9 * Mat3::Identity();
    return ukf_update(inflated, m, meas_cov, params);
  }
}

MomentMatch moment_match(std::span<const GaussianComponent> components) {
  if (components.empty()) throw ContractError("moment matching needs at least one component");
  double total = 0.0;
  for (const auto& c : components) total += c.weight;
  if (!(total > 0.0)) throw ContractError("mixture weights sum to zero");

  MomentMatch out;
  out.mean.setZero();
  for (const auto& c : components) out.mean += (c.weight / total) * c.mean;
  Mat3 second = Mat3::Zero();
  for (const auto& c : components) {
    const Vec3 d = c.mean - out.mean;
    second += (c.weight / total) * (c.cov + d * d.transpose());
  }
  out.cov = project_spd(second);
  return out;
}

Landmark FusedLandmark::as_landmark() const {
  Landmark lm;
  lm.id = id;
  lm.label = label;
  lm.mean = mean;
  lm.cov = cov;
  lm.assign_count = assign_count;
  lm.submap_id = submap_id;
  lm.last_seen = last_seen;
  return lm;
}

std::map<int, FusedLandmark> fuse_hypotheses(std::span<const WeightedLandmarks> hypotheses) {
  std::map<int, FusedLandmark> out;
  std::map<int, double> best_weight;
  for (const auto& h : hypotheses) {
    if (!(h.weight > 0.0)) continue;
    for (const auto& lm : h.landmarks) {
      auto& f = out[lm.id];
      f.id = lm.id;
      f.components.push_back({h.weight, lm.mean, lm.cov});
      auto [it, inserted] = best_weight.emplace(lm.id, h.weight);
      if (inserted || h.weight > it->second) {
        it->second = h.weight;
        f.label = lm.label;
        f.assign_count = lm.assign_count;
        f.submap_id = lm.submap_id;
        f.last_seen = lm.last_seen;
      }
    }
  }
  for (auto& [id, f] : out) {
    double total = 0.0;
    for (const auto& c : f.components) total += c.weight;
    for (auto& c : f.components) c.weight /= total;
    const MomentMatch mm = moment_match(f.components);
    f.mean = mm.mean;
    f.cov = mm.cov;
  }
  return out;
}

}  // namespace dpmhm
