#pragma once

#include "dpmhm/types.hpp"

#include <Eigen/Core>

#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace dpmhm {

/// Raised before solving when a factor references a missing variable or a variable
/// cannot be reached from the prior.
class GraphStructureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FactorKind { Prior, Odometry, Landmark, Loop };

struct RobustKernel {
  bool cauchy = false;
  double c = 1.0;

  static RobustKernel none() { return {}; }
  static RobustKernel make_cauchy(double c) { return {true, c}; }
};

struct Factor {
  FactorKind kind = FactorKind::Prior;
  int i = 0;
  /// Second pose id (odometry, loop) or landmark id (landmark factors).
  int j = 0;
  /// Prior pose, or the measured X_i^{-1} X_j.
  Pose relative;
  /// Landmark position measured in the frame of pose i.
  Vec3 point = Vec3::Zero();
  /// 6x6 for pose factors, 3x3 for landmark factors.
  Eigen::MatrixXd information;
  RobustKernel robust;

  static Factor prior(int i, const Pose& p, const Mat6& info);
  static Factor odometry(int i, int j, const Pose& rel, const Mat6& info, RobustKernel k = {});
  static Factor loop(int i, int j, const Pose& rel, const Mat6& info, RobustKernel k = {});
  static Factor landmark(int i, int landmark_id, const Vec3& z, const Mat3& info, RobustKernel k = {});
};

struct GraphState {
  std::map<int, Pose> poses;
  std::map<int, Vec3> landmarks;
  std::vector<Factor> factors;

  /// Throws GraphStructureError on dangling references, missing or repeated prior,
  /// or variables unreachable from the prior.
  void validate() const;
};

/// IRLS weight 1/(1+(r/c)^2).
double cauchy_weight(double residual_norm, double c);

/// Robust cost of one factor given its whitened residual norm s.
double robust_cost(double s, const RobustKernel& k);

// Residuals are ordered [translation; rotation], increments [dt; dtheta] applied by `retract`.

struct PriorLinearization {
  Vec6 r;
  Mat6 J;
};
PriorLinearization linearize_prior(const Pose& x, const Pose& z);

struct BetweenLinearization {
  Vec6 r;
  Mat6 Ji;
  Mat6 Jj;
};
BetweenLinearization linearize_between(const Pose& xi, const Pose& xj, const Pose& z);

struct PointLinearization {
  Vec3 r;
  Eigen::Matrix<double, 3, 6> Jx;
  Mat3 Jl;
};
PointLinearization linearize_point(const Pose& x, const Vec3& l, const Vec3& z);

struct OptimizeParams {
  int max_iters = 50;
  double grad_tol = 1e-8;
  double lambda_init = 1e-4;
};

struct OptimizeResult {
  GraphState state;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  /// Cost after the start and after every accepted step.
  std::vector<double> cost_history;
  /// Trace of the Gauss-Newton marginal covariance of the highest-id pose.
  double last_pose_cov_trace = 0.0;
};

OptimizeResult optimize(GraphState g, const OptimizeParams& params = {});

/// Total robust cost of `g` at its current values.
double total_cost(const GraphState& g);

/// Root mean square translational error. Throws ContractError on a length mismatch.
double rmse(std::span<const Pose> trajectory, std::span<const Pose> ground_truth);

}  // namespace dpmhm
