#include "dpmhm/submap.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace dpmhm {

double gaussian_entropy(const Mat3& cov) {
  if (!is_spd(cov)) throw ParameterError("entropy of a non-SPD covariance");
  const double two_pi_e = 2.0 * M_PI * std::exp(1.0);
  return 0.5 * (3.0 * std::log(two_pi_e) + std::log(cov.determinant()));
}

std::optional<Mat3> submap_covariance(std::span<const FusedLandmark> landmarks) {
  if (landmarks.empty()) return std::nullopt;
  const double w = 1.0 / static_cast<double>(landmarks.size());
  Vec3 centroid = Vec3::Zero();
  for (const auto& lm : landmarks) centroid += w * lm.mean;
  Mat3 cov = Mat3::Zero();
  for (const auto& lm : landmarks) {
    const Vec3 d = lm.mean - centroid;
    cov += w * (lm.cov + d * d.transpose());
  }
  return project_spd(cov);
}

void Corpus::add_submap(std::span<const ClassHistogram> scene_histograms) {
  if (unit_ == TfidfDocUnit::Submap) {
    std::set<int> present;
    for (const auto& h : scene_histograms)
      for (const auto& [id, n] : h.counts)
        if (n > 0) present.insert(id);
    ++documents_;
    for (int id : present) ++containing_[id];
    return;
  }
  for (const auto& h : scene_histograms) {
    ++documents_;
    for (const auto& [id, n] : h.counts)
      if (n > 0) ++containing_[id];
  }
}

long Corpus::containing(ClassLabel c) const {
  auto it = containing_.find(c.id);
  return it == containing_.end() ? 0 : it->second;
}

double tfidf_score(const ClassHistogram& submap_hist, const Corpus& corpus) {
  if (submap_hist.total == 0) return 0.0;
  if (corpus.documents() < 1) throw ContractError("tf-idf needs a non-empty corpus");
  double score = 0.0;
  const double n_docs = static_cast<double>(corpus.documents());
  for (const auto& [id, n] : submap_hist.counts) {
    const long nc = corpus.containing(ClassLabel{id});
    if (nc == 0 || n == 0) continue;
    score += (static_cast<double>(n) / static_cast<double>(submap_hist.total)) * std::log(n_docs / static_cast<double>(nc));
  }
  return score;
}

GateDecision gate_label(double trace_before, double trace_after, bool had_loop_closure) {
  return (had_loop_closure || trace_after < trace_before) ? GateDecision::Check : GateDecision::Skip;
}

std::array<double, 3> GateTree::features(const SubmapSummary& s) {
  return {s.entropy, s.tfidf, static_cast<double>(s.landmark_count)};
}

GateDecision GateTree::predict(const SubmapSummary& s) const {
  if (nodes_.empty()) throw ContractError("gate tree is untrained");
  const auto f = features(s);
  int idx = 0;
  while (nodes_[static_cast<std::size_t>(idx)].feature >= 0) {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    idx = f[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(idx)].label;
}

int GateTree::depth() const {
  std::function<int(int)> rec = [&](int i) -> int {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.feature < 0) return 0;
    return 1 + std::max(rec(n.left), rec(n.right));
  };
  return nodes_.empty() ? 0 : rec(0);
}

namespace {

double gini(int checks, int total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(checks) / total;
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

GateDecision majority(int checks, int total) {
  return 2 * checks > total ? GateDecision::Check : GateDecision::Skip;
}

}  // namespace

GateTree train_gate(std::span<const GateSample> samples, int max_depth, int min_leaf) {
  if (samples.size() < 10) throw ContractError("gate training needs at least 10 samples");
  GateTree tree;
  std::vector<std::array<double, 3>> x;
  std::vector<int> y;
  for (const auto& s : samples) {
    x.push_back(GateTree::features(s.summary));
    y.push_back(s.label == GateDecision::Check ? 1 : 0);
  }

  std::function<int(std::vector<int>, int)> grow = [&](std::vector<int> idx, int depth) -> int {
    const int total = static_cast<int>(idx.size());
    int checks = 0;
    for (int i : idx) checks += y[static_cast<std::size_t>(i)];
    const int node_index = static_cast<int>(tree.nodes_.size());
    tree.nodes_.push_back({-1, 0.0, -1, -1, majority(checks, total)});
    if (depth >= max_depth || checks == 0 || checks == total || total < 2 * min_leaf) return node_index;

    double best_impurity = gini(checks, total);
    int best_feature = -1;
    double best_threshold = 0.0;
    for (int f = 0; f < 3; ++f) {
      std::vector<int> order = idx;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return x[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)] < x[static_cast<std::size_t>(b)][static_cast<std::size_t>(f)];
      });
      int left_checks = 0;
      for (int k = 0; k + 1 < total; ++k) {
        left_checks += y[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
        const double lo = x[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])][static_cast<std::size_t>(f)];
        const double hi = x[static_cast<std::size_t>(order[static_cast<std::size_t>(k + 1)])][static_cast<std::size_t>(f)];
        if (!(lo < hi)) continue;
        const int nl = k + 1;
        const int nr = total - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double impurity =
            (nl * gini(left_checks, nl) + nr * gini(checks - left_checks, nr)) / static_cast<double>(total);
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best_feature = f;
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }
    if (best_feature < 0) return node_index;

    std::vector<int> left, right;
    for (int i : idx)
      (x[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(i);
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& n = tree.nodes_[static_cast<std::size_t>(node_index)];
    n.feature = best_feature;
    n.threshold = best_threshold;
    n.left = l;
    n.right = r;
    return node_index;
  };

  std::vector<int> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  grow(std::move(all), 0);
  return tree;
}

GateDecision gate(const SubmapSummary& summary, const GateTree* tree, const GateRule& rule) {
  if (tree != nullptr) return tree->predict(summary);
  return (summary.landmark_count >= rule.min_landmarks && summary.tfidf >= rule.min_tfidf) ? GateDecision::Check
                                                                                          : GateDecision::Skip;
}

}  // namespace dpmhm
