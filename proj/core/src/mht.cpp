#include "dpmhm/mht.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dpmhm {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ContractError("quantile probability must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against the exact CDF.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double effective_sample_size(std::span<const double> weights) {
  if (weights.empty()) throw ContractError("effective sample size of an empty weight set");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-6) throw ContractError("weights are not normalized");
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return 1.0 / sq;
}

int kld_bound(int k, double epsilon, double delta, bool cube_bracket) {
  if (k < 2) throw ContractError("KLD bound needs at least two occupied bins");
  if (!(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0)) throw ContractError("invalid KLD epsilon/delta");
  const double km1 = static_cast<double>(k - 1);
  const double a = 2.0 / (9.0 * km1);
  const double z = normal_quantile(1.0 - delta);
  double bracket = 1.0 - a + std::sqrt(a) * z;
  if (cube_bracket) bracket = bracket * bracket * bracket;
  return static_cast<int>(std::floor(km1 / (2.0 * epsilon) * bracket));
}

std::vector<int> systematic_counts(std::span<const double> weights, int n, double u01) {
  if (n < 1) throw ContractError("systematic resampling needs n >= 1");
  if (!(u01 >= 0.0 && u01 < 1.0)) throw ContractError("u01 must lie in [0, 1)");
  std::vector<int> counts(weights.size(), 0);
  if (weights.empty()) return counts;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cumulative = weights[0] / total;
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i) {
    const double pos = (u01 + i) / n;
    while (pos >= cumulative && idx + 1 < weights.size()) cumulative += weights[++idx] / total;
    ++counts[idx];
  }
  return counts;
}

MapState apply_assignment(const MapState& parent, const Assignment& assignment,
                          std::span<const SemanticMeasurement> measurements, const AssocParams& assoc,
                          const UkfParams& ukf) {
  if (assignment.targets.size() != measurements.size())
    throw ContractError("assignment does not cover the measurement set");
  MapState out = parent;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const auto& m = measurements[i];
    const auto& t = assignment.targets[i];
    switch (t.kind) {
      case TargetKind::New: {
        Landmark lm;
        lm.id = out.next_landmark_id++;
        lm.label = m.label;
        lm.mean = m.position;
        lm.cov = assoc.meas_cov;
        lm.assign_count = 1;
        lm.submap_id = out.current_submap;
        lm.last_seen = m.time;
        out.landmarks.push_back(lm);
        break;
      }
      case TargetKind::Existing:
      case TargetKind::Previous: {
        Landmark* lm = out.find(t.landmark_id);
        if (lm == nullptr) throw ContractError("assignment refers to unknown landmark " + std::to_string(t.landmark_id));
        Landmark updated = ukf_update_conditioned(*lm, m, assoc.meas_cov, ukf);
        updated.assign_count = lm->assign_count + 1;
        updated.submap_id = out.current_submap;
        *lm = updated;
        break;
      }
      case TargetKind::FalsePositive:
        ++out.total_fp;
        break;
    }
  }
  return out;
}

HypothesisTree::HypothesisTree(MapState root, std::uint64_t seed) : rng_(seed) {
  HypothesisNode n;
  n.id = next_id_++;
  n.map = std::make_shared<const MapState>(std::move(root));
  root_ = n.id;
  leaves_.insert(n.id);
  nodes_.emplace(n.id, std::move(n));
}

const HypothesisNode& HypothesisTree::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw ContractError("unknown hypothesis node " + std::to_string(id));
  return it->second;
}

std::vector<NodeId> HypothesisTree::extend(NodeId leaf, std::span<const Assignment> branches,
                                           std::span<const SemanticMeasurement> measurements,
                                           const AssocParams& assoc, const UkfParams& ukf) {
  if (!leaves_.contains(leaf)) throw ContractError("extend target is not a leaf");
  if (branches.empty()) throw ContractError("extend needs at least one branch");
  const HypothesisNode& parent = nodes_.at(leaf);
  const auto parent_map = parent.map;
  const double parent_weight = parent.log_weight;
  const int step = parent.step + 1;

  std::vector<NodeId> children;
  for (const auto& a : branches) {
    HypothesisNode child;
    child.id = next_id_++;
    child.parent = leaf;
    child.step = step;
    child.assignment = a;
    child.assignment.total_fp = parent_map->total_fp;
    child.log_weight = parent_weight + measurement_set_likelihood(a, measurements, *parent_map, assoc) +
                       assignment_prior(a, assoc);
    if (measurements.empty()) {
      child.map = parent_map;
    } else {
      child.map = std::make_shared<const MapState>(apply_assignment(*parent_map, a, measurements, assoc, ukf));
    }
    children.push_back(child.id);
    leaves_.insert(child.id);
    nodes_.emplace(child.id, std::move(child));
  }
  leaves_.erase(leaf);
  return children;
}

void HypothesisTree::normalize() {
  double max_w = -std::numeric_limits<double>::infinity();
  for (NodeId id : leaves_) max_w = std::max(max_w, nodes_.at(id).log_weight);
  double sum = 0.0;
  for (NodeId id : leaves_) sum += std::exp(nodes_.at(id).log_weight - max_w);
  const double lse = max_w + std::log(sum);
  for (NodeId id : leaves_) nodes_.at(id).log_weight -= lse;
}

std::vector<double> HypothesisTree::normalized_weights() const {
  std::vector<double> w;
  double max_w = -std::numeric_limits<double>::infinity();
  for (NodeId id : leaves_) max_w = std::max(max_w, nodes_.at(id).log_weight);
  for (NodeId id : leaves_) w.push_back(std::exp(nodes_.at(id).log_weight - max_w));
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= sum;
  return w;
}

NodeId HypothesisTree::best_leaf() const {
  NodeId best = *leaves_.begin();
  for (NodeId id : leaves_)
    if (nodes_.at(id).log_weight > nodes_.at(best).log_weight) best = id;
  return best;
}

ResampleReport HypothesisTree::resample(const ResampleParams& params) {
  ResampleReport report;
  const std::vector<NodeId> ids = leaves();
  const std::vector<double> w = normalized_weights();
  const int n_leaves = static_cast<int>(ids.size());
  report.ess = effective_sample_size(w);
  report.survivors = n_leaves;
  const int cap = std::max(1, params.max_hypotheses);
  if (report.ess >= params.ess_fraction * n_leaves && n_leaves <= cap) return report;

  report.triggered = true;
  // Size the draw with a pilot offset, then draw with a fresh one so the kept counts stay
  // unbiased given n.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double pilot = unit(rng_);
  int n = std::min(n_leaves, cap);
  for (;;) {
    const auto trial = systematic_counts(w, n, pilot);
    const int k = static_cast<int>(std::count_if(trial.begin(), trial.end(), [](int c) { return c > 0; }));
    int bound = k >= 2 ? kld_bound(k, params.kld_epsilon, params.kld_delta, params.kld_cube_bracket) : 1;
    bound = std::clamp(bound, 1, cap);
    if (bound <= n) break;
    n = bound;
  }
  const std::vector<int> counts = systematic_counts(w, n, unit(rng_));
  report.draws = n;

  std::map<NodeId, double> survivors;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (counts[i] > 0) survivors[ids[i]] = std::log(static_cast<double>(counts[i]) / n);
  prune_to(survivors);
  normalize();
  report.survivors = static_cast<int>(leaves_.size());
  return report;
}

void HypothesisTree::keep_best(std::size_t count) {
  if (count >= leaves_.size()) return;
  std::vector<NodeId> ids = leaves();
  std::stable_sort(ids.begin(), ids.end(),
                   [&](NodeId a, NodeId b) { return nodes_.at(a).log_weight > nodes_.at(b).log_weight; });
  std::map<NodeId, double> survivors;
  for (std::size_t i = 0; i < count; ++i) survivors[ids[i]] = nodes_.at(ids[i]).log_weight;
  prune_to(survivors);
  normalize();
}

std::vector<NodeId> HypothesisTree::path(NodeId leaf) const {
  std::vector<NodeId> out;
  std::optional<NodeId> cur = leaf;
  while (cur) {
    out.push_back(*cur);
    cur = node(*cur).parent;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

void HypothesisTree::prune_to(const std::map<NodeId, double>& survivor_log_weights) {
  std::set<NodeId> keep;
  for (const auto& [id, lw] : survivor_log_weights) {
    std::optional<NodeId> cur = id;
    while (cur && keep.insert(*cur).second) cur = nodes_.at(*cur).parent;
  }
  for (auto it = nodes_.begin(); it != nodes_.end();) {
    if (keep.contains(it->first)) {
      ++it;
    } else {
      it = nodes_.erase(it);
    }
  }
  leaves_.clear();
  for (const auto& [id, lw] : survivor_log_weights) {
    nodes_.at(id).log_weight = lw;
    leaves_.insert(id);
  }
}

}  // namespace dpmhm
