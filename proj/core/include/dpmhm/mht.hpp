#pragma once

#include "dpmhm/assoc.hpp"
#include "dpmhm/filter.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <vector>

namespace dpmhm {

struct ResampleParams {
  /// Resample when ESS < ess_fraction * N.
  double ess_fraction = 0.5;
  double kld_epsilon = 0.05;
  double kld_delta = 0.01;
  int max_hypotheses = 20;
  std::uint64_t rng_seed = 0;
  /// Cube the bracket of the KLD bound (the form of the original KLD-sampling derivation).
  bool kld_cube_bracket = false;
};

/// Standard normal quantile (Acklam's rational approximation plus one Halley step).
double normal_quantile(double p);

/// 1 / sum(w_i^2) for normalized weights.
double effective_sample_size(std::span<const double> weights);

/// KLD sample-count bound for k occupied bins. Throws ContractError for k < 2.
int kld_bound(int k, double epsilon, double delta, bool cube_bracket = false);

/// Systematic resampling counts: draw positions (u01 + i) / n for i in [0, n).
std::vector<int> systematic_counts(std::span<const double> weights, int n, double u01);

using NodeId = int;

struct HypothesisNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  int step = 0;
  Assignment assignment;
  double log_weight = 0.0;
  std::shared_ptr<const MapState> map;
};

struct ResampleReport {
  bool triggered = false;
  double ess = 0.0;
  int draws = 0;
  int survivors = 0;
};

/// Applies one step's assignment to a parent map: New creates a landmark,
/// Existing/Previous run the UKF update and bump the count, FalsePositive bumps N^0.
MapState apply_assignment(const MapState& parent, const Assignment& assignment,
                          std::span<const SemanticMeasurement> measurements, const AssocParams& assoc,
                          const UkfParams& ukf);

/// Multiple-hypothesis tree over data-association histories.
///
/// Leaves hold the current hypotheses. Child log-weights follow the posterior
/// recursion: parent + log joint measurement likelihood + log assignment prior.
/// Maps are shared with the parent until a step modifies them.
class HypothesisTree {
 public:
  HypothesisTree(MapState root, std::uint64_t seed);

  [[nodiscard]] std::vector<NodeId> leaves() const { return {leaves_.begin(), leaves_.end()}; }
  [[nodiscard]] std::size_t leaf_count() const { return leaves_.size(); }
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
  [[nodiscard]] const HypothesisNode& node(NodeId id) const;
  [[nodiscard]] NodeId root() const { return root_; }

  /// One child per branch. Returns the new leaf ids in branch order.
  std::vector<NodeId> extend(NodeId leaf, std::span<const Assignment> branches,
                             std::span<const SemanticMeasurement> measurements, const AssocParams& assoc,
                             const UkfParams& ukf);

  /// Shift leaf log-weights so their normalized sum is exactly representable (log-sum-exp = 0).
  void normalize();
  /// Normalized weights aligned with leaves().
  [[nodiscard]] std::vector<double> normalized_weights() const;
  [[nodiscard]] NodeId best_leaf() const;

  /// ESS-gated systematic resampling with a KLD-adapted draw count, capped at max_hypotheses.
  /// Also forced when the leaf count exceeds max_hypotheses.
  ResampleReport resample(const ResampleParams& params);

  /// Keep the `count` highest-weight leaves (ties by lower id).
  void keep_best(std::size_t count);

  /// Node ids from the root to `leaf`, inclusive.
  [[nodiscard]] std::vector<NodeId> path(NodeId leaf) const;

 private:
  void prune_to(const std::map<NodeId, double>& survivor_log_weights);

  std::map<NodeId, HypothesisNode> nodes_;
  std::set<NodeId> leaves_;
  NodeId root_ = 0;
  NodeId next_id_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace dpmhm
