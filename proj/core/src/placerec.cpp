#include "dpmhm/placerec.hpp"

#include "dpmhm/hungarian.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace dpmhm {
namespace {

void require_normalized(std::span<const double> h) {
  const double s = std::accumulate(h.begin(), h.end(), 0.0);
  if (std::abs(s - 1.0) > 1e-6) throw ContractError("histogram is not normalized");
  for (double x : h)
    if (x < 0.0) throw ContractError("histogram has a negative entry");
}

}  // namespace

double jsd(std::span<const double> h1, std::span<const double> h2) {
  require_normalized(h1);
  require_normalized(h2);
  const std::size_t n = std::max(h1.size(), h2.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = i < h1.size() ? h1[i] : 0.0;
    const double q = i < h2.size() ? h2[i] : 0.0;
    const double m = 0.5 * (p + q);
    if (p > 0.0) total += 0.5 * p * std::log(p / m);
    if (q > 0.0) total += 0.5 * q * std::log(q / m);
  }
  return std::clamp(total, 0.0, std::log(2.0));
}

void PlaceDatabase::add_submap(int submap_id, std::vector<double> histogram, std::span<const SceneDescriptor> scenes) {
  if (static_cast<int>(histogram.size()) != num_classes_) throw ContractError("submap histogram has wrong dimension");
  submaps_.insert(histogram, submap_id);
  submap_hist_[submap_id] = std::move(histogram);
  for (const auto& s : scenes) {
    if (static_cast<int>(s.histogram.size()) != num_classes_) throw ContractError("scene histogram has wrong dimension");
    scenes_.insert(s.histogram, s.scene_id);
    scene_desc_[s.scene_id] = s;
  }
}

const std::vector<double>& PlaceDatabase::submap_histogram(int submap_id) const {
  auto it = submap_hist_.find(submap_id);
  if (it == submap_hist_.end()) throw ContractError("unknown submap " + std::to_string(submap_id));
  return it->second;
}

const SceneDescriptor& PlaceDatabase::scene(int scene_id) const {
  auto it = scene_desc_.find(scene_id);
  if (it == scene_desc_.end()) throw ContractError("unknown scene " + std::to_string(scene_id));
  return it->second;
}

double jsd_prefilter_radius(double tau_jsd) { return std::sqrt(8.0 * std::max(tau_jsd, 0.0)); }

std::vector<CandidatePair> query_candidates(const PlaceDatabase& db, std::span<const double> query_submap_hist,
                                            const SceneDescriptor& query, const QueryThresholds& thresholds) {
  std::vector<CandidatePair> out;
  if (db.submap_index().empty()) return out;

  std::set<int> similar_submaps;
  for (int id : db.submap_index().radius_query(query_submap_hist, jsd_prefilter_radius(thresholds.tau_jsd)))
    if (jsd(query_submap_hist, db.submap_histogram(id)) <= thresholds.tau_jsd) similar_submaps.insert(id);
  if (similar_submaps.empty()) return out;

  for (int scene_id : db.scene_index().radius_query(query.histogram, thresholds.r_l2)) {
    const SceneDescriptor& s = db.scene(scene_id);
    if (!similar_submaps.contains(s.submap_id)) continue;
    if (std::abs(scene_id - query.scene_id) <= thresholds.exclusion_window) continue;
    out.push_back({query.scene_id, scene_id, s.submap_id});
  }
  return out;
}

Eigen::MatrixXd scene_laplacian(const SceneDescriptor& s, double edge_radius) {
  const std::size_t n = s.size();
  if (n == 0) throw ContractError("laplacian of an empty scene");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : s.points_body) centroid += p / static_cast<double>(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.labels[a].id != s.labels[b].id) return s.labels[a].id < s.labels[b].id;
    return (s.points_body[a] - centroid).norm() < (s.points_body[b] - centroid).norm();
  });
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((s.points_body[order[i]] - s.points_body[order[j]]).norm() > edge_radius) continue;
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      lap(a, b) = lap(b, a) = -1.0;
      lap(a, a) += 1.0;
      lap(b, b) += 1.0;
    }
  return lap;
}

double ncc_score(const Eigen::MatrixXd& l1, const Eigen::MatrixXd& l2) {
  const auto n = std::max({l1.rows(), l1.cols(), l2.rows(), l2.cols()});
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  a.topLeftCorner(l1.rows(), l1.cols()) = l1;
  b.topLeftCorner(l2.rows(), l2.cols()) = l2;
  const Eigen::ArrayXXd da = a.array() - a.mean();
  const Eigen::ArrayXXd db = b.array() - b.mean();
  const double na = std::sqrt((da * da).sum());
  const double nb = std::sqrt((db * db).sum());
  if (na == 0.0 || nb == 0.0) return (na == 0.0 && nb == 0.0 && a == b) ? 1.0 : 0.0;
  return std::clamp((da * db).sum() / (na * nb), -1.0, 1.0);
}

SceneMatch scene_match(const SceneDescriptor& a, const SceneDescriptor& b, double penalty, double dist_norm,
                       SceneTermMode mode) {
  if (a.size() == 0 || b.size() == 0) throw ContractError("scene match needs non-empty scenes");
  if (!(dist_norm > 0.0)) throw ContractError("dist_norm must be positive");
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd h(na, nb);
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < nb; ++j)
      h(i, j) = std::min(2.0, (a.points_world[static_cast<std::size_t>(i)] - b.points_world[static_cast<std::size_t>(j)]).norm() / dist_norm);

  const LinearAssignment la = solve_linear_assignment(h);
  SceneMatch out;
  for (Eigen::Index i = 0; i < na; ++i) {
    const int j = la.row_to_col[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    const double cost = h(i, j);
    const double s_match = 1.0 - cost / 2.0;
    const bool same = a.labels[static_cast<std::size_t>(i)] == b.labels[static_cast<std::size_t>(j)];
    const double s_class = same ? 0.0 : penalty;
    out.score += mode == SceneTermMode::AsPrinted ? 1.0 - s_match * s_class : 1.0 - (1.0 - s_match) * (1.0 - s_class);
    out.pairs.emplace_back(static_cast<int>(i), j);
    out.costs.push_back(cost);
  }
  return out;
}

BayesBelief bayes_update(const BayesBelief& belief, bool verified) {
  BayesBelief out = belief;
  const double predicted = belief.p_lc * belief.p_stay_lc + (1.0 - belief.p_lc) * (1.0 - belief.p_stay_no_lc);
  const double l_lc = verified ? belief.p_pos_given_lc : 1.0 - belief.p_pos_given_lc;
  const double l_no = verified ? belief.p_pos_given_no_lc : 1.0 - belief.p_pos_given_no_lc;
  const double num = predicted * l_lc;
  const double den = num + (1.0 - predicted) * l_no;
  out.p_lc = den > 0.0 ? num / den : predicted;
  return out;
}

Pose rigid_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size() || src.empty()) throw ContractError("rigid alignment needs matched non-empty point sets");
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::Matrix3Xd s(3, n), d(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.col(i) = src[static_cast<std::size_t>(i)];
    d.col(i) = dst[static_cast<std::size_t>(i)];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(s, d, false);
  Pose out;
  out.rotation = Eigen::Quaterniond(Mat3(t.topLeftCorner<3, 3>())).normalized();
  out.translation = t.topRightCorner<3, 1>();
  return out;
}

std::optional<RansacResult> ransac_verify(std::span<const std::pair<Vec3, Vec3>> pairs, const RansacParams& params,
                                          std::mt19937_64& rng) {
  const int n = static_cast<int>(pairs.size());
  if (n < 3) return std::nullopt;

  auto inliers_of = [&](const Pose& t) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if ((t * pairs[static_cast<std::size_t>(i)].first - pairs[static_cast<std::size_t>(i)].second).norm() <= params.inlier_tol)
        idx.push_back(i);
    return idx;
  };
  auto fit = [&](const std::vector<int>& idx) {
    std::vector<Vec3> src, dst;
    for (int i : idx) {
      src.push_back(pairs[static_cast<std::size_t>(i)].first);
      dst.push_back(pairs[static_cast<std::size_t>(i)].second);
    }
    return rigid_align(src, dst);
  };
  auto degenerate = [&](int i, int j, int k, bool first) {
    const auto& p = [&](int x) -> const Vec3& {
      return first ? pairs[static_cast<std::size_t>(x)].first : pairs[static_cast<std::size_t>(x)].second;
    };
    return ((p(j) - p(i)).cross(p(k) - p(i))).norm() < 1e-6;
  };

  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<int> best;
  for (int it = 0; it < params.iterations; ++it) {
    const int i = pick(rng);
    int j = pick(rng);
    int k = pick(rng);
    if (i == j || i == k || j == k) continue;
    if (degenerate(i, j, k, true) || degenerate(i, j, k, false)) continue;
    std::vector<int> inl = inliers_of(fit({i, j, k}));
    if (inl.size() > best.size()) best = std::move(inl);
    if (static_cast<int>(best.size()) == n) break;
  }
  if (best.size() < 3) return std::nullopt;

  RansacResult result;
  result.transform = fit(best);
  result.inliers = inliers_of(result.transform);
  if (result.inliers.size() >= 3) {
    result.transform = fit(result.inliers);
    result.inliers = inliers_of(result.transform);
  }
  if (static_cast<int>(result.inliers.size()) < params.min_inliers) return std::nullopt;
  return result;
}

VerifyResult verify_pair(const SceneDescriptor& a, const SceneDescriptor& b, const VerifyParams& params) {
  VerifyResult out;
  if (a.size() == 0 || b.size() == 0) return out;
  out.s_ncc = ncc_score(scene_laplacian(a, params.edge_radius), scene_laplacian(b, params.edge_radius));
  out.match = scene_match(a, b, params.penalty, params.dist_norm, params.mode);
  out.s_scene = out.match.score;
  out.passed = out.s_ncc + out.s_scene > params.tau_verify;
  return out;
}

LoopDetector::LoopDetector(int num_classes, LoopDetectorParams params)
    : db_(num_classes), params_(params), rng_(params.seed) {}

void LoopDetector::add_submap(int submap_id, std::vector<double> histogram, std::span<const SceneDescriptor> scenes) {
  db_.add_submap(submap_id, std::move(histogram), scenes);
}

std::vector<LoopClosure> LoopDetector::detect(std::span<const double> submap_hist,
                                              std::span<const SceneDescriptor> scenes) {
  std::vector<LoopClosure> closures;
  for (const auto& q : scenes) {
    if (static_cast<int>(closures.size()) >= params_.max_closures_per_submap) break;
    if (q.size() < 3) continue;
    const auto candidates = query_candidates(db_, submap_hist, q, params_.query);

    // Verified candidates per candidate submap, best combined score first.
    std::map<int, std::vector<std::pair<double, int>>> verified_by_submap;
    std::map<int, VerifyResult> results;
    std::set<int> seen_submaps;
    for (const auto& c : candidates) {
      seen_submaps.insert(c.candidate_submap);
      VerifyResult v = verify_pair(q, db_.scene(c.candidate_scene), params_.verify);
      if (!v.passed) continue;
      verified_by_submap[c.candidate_submap].emplace_back(v.s_ncc + v.s_scene, c.candidate_scene);
      results.emplace(c.candidate_scene, std::move(v));
    }

    bool closed = false;
    for (int sub : seen_submaps) {
      auto vit = verified_by_submap.find(sub);
      const bool verified = vit != verified_by_submap.end();
      auto [bit, inserted] = beliefs_.try_emplace({q.submap_id, sub}, params_.prior);
      bit->second = bayes_update(bit->second, verified);
      if (closed || !verified || bit->second.p_lc <= params_.tau_bayes) continue;

      // Appearance scores rank but do not decide; geometry has the last word.
      auto& ranked = vit->second;
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
      for (const auto& [score, cand_id] : ranked) {
        const SceneDescriptor& cand = db_.scene(cand_id);
        const VerifyResult& v = results.at(cand_id);
        std::vector<std::pair<Vec3, Vec3>> corr;
        std::vector<std::pair<int, int>> corr_idx;
        for (std::size_t k = 0; k < v.match.pairs.size(); ++k) {
          const auto [i, j] = v.match.pairs[k];
          if (!(q.labels[static_cast<std::size_t>(i)] == cand.labels[static_cast<std::size_t>(j)])) continue;
          if (v.match.costs[k] >= 2.0) continue;
          corr.emplace_back(q.points_body[static_cast<std::size_t>(i)], cand.points_body[static_cast<std::size_t>(j)]);
          corr_idx.emplace_back(i, j);
        }
        if (static_cast<int>(corr.size()) < params_.ransac.min_inliers) continue;
        const auto r = ransac_verify(corr, params_.ransac, rng_);
        if (!r) continue;
        LoopClosure lc;
        lc.query_scene = q.scene_id;
        lc.candidate_scene = cand.scene_id;
        lc.relative = r->transform;
        for (int idx : r->inliers) lc.inlier_pairs.push_back(corr_idx[static_cast<std::size_t>(idx)]);
        lc.s_ncc = v.s_ncc;
        lc.s_scene = v.s_scene;
        closures.push_back(std::move(lc));
        closed = true;
        break;
      }
    }
  }
  return closures;
}

}  // namespace dpmhm
