#pragma once

#include "dpmhm/filter.hpp"
#include "dpmhm/types.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace dpmhm {

/// Differential entropy of a 3-D Gaussian, in nats.
double gaussian_entropy(const Mat3& cov);

/// Moment-matched covariance over landmark Gaussians (equal weights), centered on their centroid.
/// Returns nullopt for an empty set.
std::optional<Mat3> submap_covariance(std::span<const FusedLandmark> landmarks);

enum class TfidfDocUnit { Submap, Scene };

/// Document frequencies for the tf-idf score.
class Corpus {
 public:
  explicit Corpus(TfidfDocUnit unit = TfidfDocUnit::Submap) : unit_(unit) {}

  /// Insert one finalized submap, described by its scene histograms.
  void add_submap(std::span<const ClassHistogram> scene_histograms);

  [[nodiscard]] long documents() const { return documents_; }
  [[nodiscard]] long containing(ClassLabel c) const;
  [[nodiscard]] TfidfDocUnit unit() const { return unit_; }

 private:
  TfidfDocUnit unit_;
  long documents_ = 0;
  std::map<int, long> containing_;
};

/// sum_c (n_c^i / n^i) * log(N / n_c); classes absent from the corpus are skipped.
double tfidf_score(const ClassHistogram& submap_hist, const Corpus& corpus);

struct SubmapSummary {
  int submap_id = 0;
  ClassHistogram histogram;
  double entropy = 0.0;
  double tfidf = 0.0;
  int landmark_count = 0;
  std::vector<int> scene_ids;
  Pose anchor_pose;
};

enum class GateDecision { Check, Skip };

struct GateSample {
  SubmapSummary summary;
  GateDecision label = GateDecision::Skip;
};

/// Fallback rule used when no tree has been trained.
struct GateRule {
  int min_landmarks = 8;
  double min_tfidf = 0.2;
};

/// Label for gate training: a submap is worth checking when it shrinks the pose
/// covariance trace or contains a loop closure.
GateDecision gate_label(double trace_before, double trace_after, bool had_loop_closure);

/// Depth-limited CART classifier over (entropy, tfidf, landmark_count).
class GateTree {
 public:
  enum Feature : int { kEntropy = 0, kTfidf = 1, kLandmarkCount = 2 };

  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;   // feature <= threshold
    int right = -1;  // feature > threshold
    GateDecision label = GateDecision::Skip;
  };

  static std::array<double, 3> features(const SubmapSummary& s);

  [[nodiscard]] GateDecision predict(const SubmapSummary& s) const;
  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
  [[nodiscard]] int depth() const;

 private:
  friend GateTree train_gate(std::span<const GateSample> samples, int max_depth, int min_leaf);
  std::vector<Node> nodes_;
};

/// Gini CART. Requires >= 10 samples; a single-label set yields a one-leaf tree.
GateTree train_gate(std::span<const GateSample> samples, int max_depth = 3, int min_leaf = 2);

/// Tree decision when `tree` is given, otherwise the fallback rule.
GateDecision gate(const SubmapSummary& summary, const GateTree* tree, const GateRule& rule = {});

}  // namespace dpmhm
