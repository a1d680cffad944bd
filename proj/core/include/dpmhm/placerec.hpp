#pragma once

#include "dpmhm/kdtree.hpp"
#include "dpmhm/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace dpmhm {

/// Jensen-Shannon divergence in nats, 0 log 0 := 0. Inputs must be normalized.
double jsd(std::span<const double> h1, std::span<const double> h2);

/// One captured scene: its class histogram and the landmarks visible in it.
struct SceneDescriptor {
  int scene_id = 0;
  int submap_id = 0;
  std::vector<double> histogram;
  std::vector<ClassLabel> labels;
  /// Positions in the sensor frame at capture.
  std::vector<Vec3> points_body;
  /// Positions in the estimated world frame at capture.
  std::vector<Vec3> points_world;
  Pose pose;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
};

/// Submap and scene kd-trees plus the stored descriptors they index.
class PlaceDatabase {
 public:
  explicit PlaceDatabase(int num_classes) : submaps_(num_classes), scenes_(num_classes), num_classes_(num_classes) {}

  void add_submap(int submap_id, std::vector<double> histogram, std::span<const SceneDescriptor> scenes);

  [[nodiscard]] const KdIndex& submap_index() const { return submaps_; }
  [[nodiscard]] const KdIndex& scene_index() const { return scenes_; }
  [[nodiscard]] const std::vector<double>& submap_histogram(int submap_id) const;
  [[nodiscard]] const SceneDescriptor& scene(int scene_id) const;
  [[nodiscard]] const std::map<int, std::vector<double>>& submap_histograms() const { return submap_hist_; }
  [[nodiscard]] const std::map<int, SceneDescriptor>& scenes() const { return scene_desc_; }
  [[nodiscard]] int num_classes() const { return num_classes_; }

 private:
  KdIndex submaps_;
  KdIndex scenes_;
  int num_classes_;
  std::map<int, std::vector<double>> submap_hist_;
  std::map<int, SceneDescriptor> scene_desc_;
};

struct QueryThresholds {
  double tau_jsd = 0.3;
  double r_l2 = 0.5;
  int exclusion_window = 60;
};

struct CandidatePair {
  int query_scene = 0;
  int candidate_scene = 0;
  int candidate_submap = 0;
  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

/// L2 radius that contains every histogram within tau_jsd in JSD (Pinsker: ||p - q||_2^2 <= 8 JSD).
double jsd_prefilter_radius(double tau_jsd);

/// Two-stage retrieval: submaps with JSD <= tau_jsd, then their scenes within r_l2 (L2),
/// dropping scenes within the exclusion window of the query. Sorted by candidate scene id.
std::vector<CandidatePair> query_candidates(const PlaceDatabase& db, std::span<const double> query_submap_hist,
                                            const SceneDescriptor& query, const QueryThresholds& thresholds);

/// Unit-weight graph Laplacian over scene landmarks within `edge_radius`, nodes sorted by
/// (class id, distance to the scene centroid).
Eigen::MatrixXd scene_laplacian(const SceneDescriptor& s, double edge_radius);

/// Normalized cross correlation of two matrices, zero-padded to the larger size.
double ncc_score(const Eigen::MatrixXd& l1, const Eigen::MatrixXd& l2);

enum class SceneTermMode { AsPrinted, DistanceWeighted };

struct SceneMatch {
  double score = 0.0;
  /// (index in a, index in b) of every matched landmark pair.
  std::vector<std::pair<int, int>> pairs;
  /// Normalized Hungarian cost in [0, 2] per pair.
  std::vector<double> costs;
};

/// Hungarian landmark matching on normalized Euclidean distance (world frame) and the
/// per-pair similarity sum. Throws ContractError on an empty scene.
SceneMatch scene_match(const SceneDescriptor& a, const SceneDescriptor& b, double penalty, double dist_norm,
                       SceneTermMode mode = SceneTermMode::AsPrinted);

struct BayesBelief {
  double p_lc = 0.5;
  double p_stay_lc = 0.9;
  double p_stay_no_lc = 0.9;
  double p_pos_given_lc = 0.8;
  double p_pos_given_no_lc = 0.1;
};

/// Predict with the two-state Markov chain, correct with the verification outcome.
BayesBelief bayes_update(const BayesBelief& belief, bool verified);

struct RansacParams {
  int iterations = 200;
  double inlier_tol = 0.5;
  int min_inliers = 4;
};

struct RansacResult {
  /// Maps first points onto second points.
  Pose transform;
  std::vector<int> inliers;
};

/// Least-squares rigid transform taking `src` onto `dst` (SVD alignment, no scale).
Pose rigid_align(std::span<const Vec3> src, std::span<const Vec3> dst);

/// RANSAC over 3-point rigid hypotheses, refit on the best inlier set.
std::optional<RansacResult> ransac_verify(std::span<const std::pair<Vec3, Vec3>> pairs, const RansacParams& params,
                                          std::mt19937_64& rng);

struct VerifyParams {
  double tau_verify = 3.0;
  double penalty = 0.5;
  double dist_norm = 5.0;
  double edge_radius = 6.0;
  SceneTermMode mode = SceneTermMode::AsPrinted;
};

struct VerifyResult {
  bool passed = false;
  double s_ncc = 0.0;
  double s_scene = 0.0;
  SceneMatch match;
};

/// S_NCC + S_scene > tau_verify.
VerifyResult verify_pair(const SceneDescriptor& a, const SceneDescriptor& b, const VerifyParams& params);

struct LoopClosure {
  int query_scene = 0;
  int candidate_scene = 0;
  /// Candidate pose to query pose: X_candidate^{-1} X_query.
  Pose relative;
  std::vector<std::pair<int, int>> inlier_pairs;
  double s_ncc = 0.0;
  double s_scene = 0.0;
};

struct LoopDetectorParams {
  QueryThresholds query;
  VerifyParams verify;
  RansacParams ransac;
  BayesBelief prior;
  double tau_bayes = 0.8;
  int max_closures_per_submap = 5;
  std::uint64_t seed = 0;
};

/// Owns the place database and per-(query submap, candidate submap) beliefs.
class LoopDetector {
 public:
  LoopDetector(int num_classes, LoopDetectorParams params);

  /// Search for closures of a finalized query submap against everything inserted so far.
  std::vector<LoopClosure> detect(std::span<const double> submap_hist, std::span<const SceneDescriptor> scenes);

  void add_submap(int submap_id, std::vector<double> histogram, std::span<const SceneDescriptor> scenes);

  [[nodiscard]] const PlaceDatabase& database() const { return db_; }
  [[nodiscard]] const std::map<std::pair<int, int>, BayesBelief>& beliefs() const { return beliefs_; }

 private:
  PlaceDatabase db_;
  LoopDetectorParams params_;
  std::map<std::pair<int, int>, BayesBelief> beliefs_;
  std::mt19937_64 rng_;
};

}  // namespace dpmhm
