#pragma once

#include "dpmhm/types.hpp"

#include <Eigen/Core>

#include <limits>
#include <map>
#include <set>
#include <span>
#include <vector>

namespace dpmhm {

/// Log-domain stand-in for log(0).
inline constexpr double kLogZero = -1e18;

enum class DpWeightMode { Exp, Linear };

struct AssocParams {
  Mat3 meas_cov = 0.04 * Mat3::Identity();
  /// Transitional covariance for classes not in `dirac_classes`.
  std::map<int, Mat3> trans_cov_by_class;
  double dirichlet_alpha = 1.0;
  double fp_rate = 0.02;
  double map_volume = 1000.0;
  double lambda_new = 0.01;
  double lambda_fp = 0.01;
  double prior_volume = 100.0;
  /// Per-class prior p_s. Classes missing from the map fall back to 1 / num_classes.
  std::map<int, double> class_prior;
  int num_classes = 1;
  std::set<int> dirac_classes;
  /// Proportionality constant of the false-positive likelihood.
  double fp_scale = 1.0;
  /// Squared Mahalanobis gate for landmark candidates; infinity disables gating.
  double gate_chi2 = std::numeric_limits<double>::infinity();
  DpWeightMode dp_weight_mode = DpWeightMode::Exp;

  void validate() const;
  [[nodiscard]] double class_prior_of(ClassLabel c) const;
  [[nodiscard]] bool is_dirac(ClassLabel c) const { return dirac_classes.contains(c.id); }
  [[nodiscard]] Mat3 trans_cov(ClassLabel c) const;
};

/// Landmark set of one hypothesis plus its running counters.
struct MapState {
  std::vector<Landmark> landmarks;
  int current_submap = 0;
  /// Number of false positives accumulated so far (N^0).
  int total_fp = 0;
  int next_landmark_id = 0;

  [[nodiscard]] const Landmark* find(int id) const;
  [[nodiscard]] Landmark* find(int id);
  [[nodiscard]] bool in_current_submap(const Landmark& lm) const { return lm.submap_id == current_submap; }
};

enum class TargetKind { Existing, Previous, New, FalsePositive };

struct AssignmentTarget {
  TargetKind kind = TargetKind::New;
  int landmark_id = -1;

  static AssignmentTarget existing(int id) { return {TargetKind::Existing, id}; }
  static AssignmentTarget previous(int id) { return {TargetKind::Previous, id}; }
  static AssignmentTarget new_landmark() { return {TargetKind::New, -1}; }
  static AssignmentTarget false_positive() { return {TargetKind::FalsePositive, -1}; }

  [[nodiscard]] bool is_landmark() const { return kind == TargetKind::Existing || kind == TargetKind::Previous; }
  friend bool operator==(const AssignmentTarget&, const AssignmentTarget&) = default;
};

/// Association vector for one time step together with its case counts.
struct Assignment {
  std::vector<AssignmentTarget> targets;
  int n_new = 0;
  int n_fp = 0;
  int n_meas = 0;
  /// False positives accumulated before this step.
  int total_fp = 0;
  /// Cost-matrix objective of this assignment (nats).
  double cost = 0.0;

  static Assignment from_targets(std::vector<AssignmentTarget> targets, int total_fp_before = 0, double cost = 0.0);
  friend bool operator==(const Assignment& a, const Assignment& b) { return a.targets == b.targets; }
};

/// Negative log-likelihood costs between measurements (rows) and targets (columns).
/// Landmark columns come first, then one New and one FalsePositive column per row.
struct CostMatrix {
  Eigen::MatrixXd cost;
  std::vector<AssignmentTarget> columns;
  int total_fp = 0;

  [[nodiscard]] int rows() const { return static_cast<int>(cost.rows()); }
  [[nodiscard]] int cols() const { return static_cast<int>(cost.cols()); }
  [[nodiscard]] Assignment to_assignment(const std::vector<int>& row_to_col) const;
};

/// Zero-mean Gaussian log density of `d` with covariance `cov`.
double gaussian_log_density(const Vec3& d, const Mat3& cov);

/// True when `lm` is an admissible target for `m` (class match and inside the gate).
bool is_candidate(const SemanticMeasurement& m, const Landmark& lm, const MapState& state, const AssocParams& params);

/// Log of the association likelihood for one measurement and target. kLogZero on class mismatch.
double log_association_likelihood(const SemanticMeasurement& m, const AssignmentTarget& target, const MapState& state,
                                  const AssocParams& params);

/// Density form of log_association_likelihood (0 on class mismatch; may overflow to inf for huge N^k).
double association_likelihood(const SemanticMeasurement& m, const AssignmentTarget& target, const MapState& state,
                              const AssocParams& params);

/// Log of the joint measurement likelihood under conditional independence.
double measurement_set_likelihood(const Assignment& assignment, std::span<const SemanticMeasurement> measurements,
                                  const MapState& state, const AssocParams& params);

/// Log of the assignment prior with Poisson priors on new and false-positive counts.
double assignment_prior(const Assignment& assignment, const AssocParams& params);

/// log of the Poisson PMF with mean `mean` at `n`.
double log_poisson(int n, double mean);

CostMatrix build_cost_matrix(std::span<const SemanticMeasurement> measurements, const MapState& state,
                             const AssocParams& params);

/// Minimum-cost assignment. Throws InfeasibleAssignment when no finite assignment exists.
Assignment solve_assignment(const CostMatrix& c);

/// Best assignment followed by alternatives obtained by forbidding every cell of the
/// previous optimum and re-solving. Stops at `max_branches`, at infeasibility, or when an
/// alternative costs more than `best.cost + plausibility_gap`. Sorted by ascending cost.
std::vector<Assignment> generate_branches(const CostMatrix& c, const Assignment& best, int max_branches,
                                          double plausibility_gap);

/// Branch proposals for a full scene. Measurements that share no candidate landmark are
/// branched independently; each alternative differs from the best in one cluster.
std::vector<Assignment> propose_branches(std::span<const SemanticMeasurement> measurements, const MapState& state,
                                         const AssocParams& params, int max_branches, double plausibility_gap);

/// Every complete finite-cost assignment of `c` (exponential; small problems only).
std::vector<Assignment> enumerate_assignments(const CostMatrix& c);

/// Single-hypothesis nearest-neighbour association on Euclidean distance; unmatched
/// measurements become new landmarks.
Assignment nearest_neighbor_assignment(std::span<const SemanticMeasurement> measurements, const MapState& state,
                                       double gate_distance);

}  // namespace dpmhm
