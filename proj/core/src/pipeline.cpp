#include "dpmhm/pipeline.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <memory>
#include <numeric>
#include <optional>

namespace dpmhm {
namespace {

Mat6 pose_information(double sigma_t, double sigma_r, double sigma_z) {
  Vec6 d;
  d << 1.0 / (sigma_t * sigma_t), 1.0 / (sigma_t * sigma_t), 1.0 / (sigma_z * sigma_z),
      Vec3::Constant(1.0 / (sigma_r * sigma_r));
  return d.asDiagonal();
}

Mat6 pose_information(double sigma_t, double sigma_r) { return pose_information(sigma_t, sigma_r, sigma_t); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Everything that lives for one run.
class Pipeline {
 public:
  Pipeline(const RunConfig& cfg, const RunInputs& in)
      : cfg_(cfg),
        in_(in),
        assoc_(cfg.assoc()),
        resample_(cfg.resample()),
        ukf_(cfg.ukf()),
        odom_info_(pose_information(cfg.odom_sigma_t, cfg.odom_sigma_r, cfg.odom_sigma_z)),
        loop_info_(pose_information(cfg.loop_sigma_t, cfg.loop_sigma_r)),
        robust_(RobustKernel::make_cauchy(cfg.cauchy_c)),
        corpus_(cfg.tfidf_doc_unit),
        detector_(cfg.num_classes, cfg.loop_detector()) {}

  RunOutputs run();

 private:
  void start_submap(int submap_id, int first_scene);
  void step_hypotheses(const std::vector<SemanticMeasurement>& world_meas);
  void finalize_submap(int last_scene);
  [[nodiscard]] int current_hypotheses() const { return static_cast<int>(tree_->leaf_count()); }

  const RunConfig& cfg_;
  const RunInputs& in_;
  AssocParams assoc_;
  ResampleParams resample_;
  UkfParams ukf_;
  Mat6 odom_info_;
  Mat6 loop_info_;
  RobustKernel robust_;

  std::vector<std::vector<SemanticMeasurement>> body_meas_;
  std::vector<std::vector<SemanticMeasurement>> world_meas_;
  std::vector<Pose> pose_est_;
  GraphState graph_;
  std::map<int, Landmark> global_map_;
  int next_landmark_id_ = 0;

  std::unique_ptr<HypothesisTree> tree_;
  int submap_id_ = 0;
  int submap_first_scene_ = 0;

  Corpus corpus_;
  LoopDetector detector_;
  std::vector<GateSample> gate_samples_;
  std::optional<GateTree> gate_tree_;

  RunOutputs out_;
};

void Pipeline::start_submap(int submap_id, int first_scene) {
  submap_id_ = submap_id;
  submap_first_scene_ = first_scene;
  MapState root;
  root.current_submap = submap_id;
  // Each submap runs its own process, so the false-positive count restarts with it.
  root.total_fp = 0;
  root.next_landmark_id = next_landmark_id_;
  for (const auto& [id, lm] : global_map_) {
    Landmark l = lm;
    if (auto it = graph_.landmarks.find(id); it != graph_.landmarks.end()) l.mean = it->second;
    root.landmarks.push_back(l);
  }
  tree_ = std::make_unique<HypothesisTree>(std::move(root), mix_seed(cfg_.run_seed, static_cast<std::uint64_t>(submap_id)));
}

void Pipeline::step_hypotheses(const std::vector<SemanticMeasurement>& ms) {
  if (cfg_.mode == EstimatorMode::SingleUkf) {
    const NodeId leaf = tree_->leaves().front();
    const Assignment a = nearest_neighbor_assignment(ms, *tree_->node(leaf).map, cfg_.nn_gate_distance);
    tree_->extend(leaf, std::span<const Assignment>(&a, 1), ms, assoc_, ukf_);
    return;
  }
  for (NodeId leaf : tree_->leaves()) {
    const auto branches = propose_branches(ms, *tree_->node(leaf).map, assoc_, cfg_.max_branches, cfg_.plausibility_gap);
    tree_->extend(leaf, branches, ms, assoc_, ukf_);
  }
  tree_->normalize();
  if (cfg_.mode == EstimatorMode::Dpmhm) {
    tree_->resample(resample_);
  } else {
    // Branching can multiply the count several times over, so one cut may not get back under the cap.
    while (static_cast<int>(tree_->leaf_count()) > cfg_.max_hypotheses)
      tree_->keep_best((tree_->leaf_count() + 2) / 3);
  }
}

void Pipeline::finalize_submap(int last_scene) {
  const std::vector<NodeId> leaves = tree_->leaves();
  const std::vector<double> weights = tree_->normalized_weights();
  const int anchor = submap_first_scene_;

  // Hypothesis fusion of the filtered landmark estimates.
  std::vector<WeightedLandmarks> weighted;
  std::map<int, double> support;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto& map = *tree_->node(leaves[i]).map;
    weighted.push_back({weights[i], map.landmarks});
    for (const auto& lm : map.landmarks) support[lm.id] += weights[i];
  }
  const std::map<int, FusedLandmark> fused = fuse_hypotheses(weighted);

  // Weighted vote over hypotheses for the landmark behind every measurement of this submap.
  std::map<std::pair<int, std::size_t>, std::map<int, double>> votes;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const std::vector<NodeId> path = tree_->path(leaves[i]);
    for (std::size_t p = 1; p < path.size(); ++p) {
      const HypothesisNode& node = tree_->node(path[p]);
      const int scene = submap_first_scene_ + static_cast<int>(p) - 1;
      int next_id = tree_->node(path[p - 1]).map->next_landmark_id;
      for (std::size_t m = 0; m < node.assignment.targets.size(); ++m) {
        const AssignmentTarget& t = node.assignment.targets[m];
        int id = -1;
        if (t.is_landmark()) id = t.landmark_id;
        if (t.kind == TargetKind::New) id = next_id++;
        if (id >= 0) votes[{scene, m}][id] += weights[i];
      }
    }
  }

  // Landmarks observed in this submap with a confident association, old ones included, so a
  // revisit is summarized by what it sees rather than by what it creates.
  std::set<int> observed;
  for (const auto& [key, ids] : votes)
    for (const auto& [id, w] : ids)
      if (w >= cfg_.fusion_min_support) observed.insert(id);

  // Landmarks supported by enough hypothesis mass become the submap's map and graph constraints.
  std::vector<FusedLandmark> submap_landmarks;
  ClassHistogram submap_hist;
  for (const auto& [id, f] : fused) {
    if (support[id] < cfg_.fusion_min_support) continue;
    global_map_[id] = f.as_landmark();
    if (observed.contains(id)) {
      submap_landmarks.push_back(f);
      submap_hist.add(f.label);
    }
  }

  std::optional<double> trace_before;
  if (cfg_.gate_use_tree) trace_before = optimize(graph_, {0, cfg_.grad_tol, cfg_.lambda_init}).last_pose_cov_trace;

  // One pose-to-point factor per measurement whose association carries enough mass. The
  // spread of the fused landmark across hypotheses inflates the measurement covariance.
  for (const auto& [key, ids] : votes) {
    const auto best = std::max_element(ids.begin(), ids.end(),
                                       [](const auto& x, const auto& y) { return x.second < y.second; });
    if (best->second < cfg_.fusion_min_support) continue;
    auto f = fused.find(best->first);
    if (f == fused.end() || support[best->first] < cfg_.fusion_min_support) continue;
    Mat3 within = Mat3::Zero();
    double wsum = 0.0;
    for (const auto& c : f->second.components) {
      within += c.weight * c.cov;
      wsum += c.weight;
    }
    const Mat3 spread = project_spd(f->second.cov - within / wsum, 0.0);
    const auto [scene, m] = key;
    if (!graph_.landmarks.contains(best->first)) graph_.landmarks[best->first] = f->second.mean;
    const Vec3& z = body_meas_[static_cast<std::size_t>(scene)][m].position;
    graph_.factors.push_back(Factor::landmark(scene, best->first, z, (assoc_.meas_cov + spread).inverse(), robust_));
  }

  // Summary and gate.
  SubmapSummary summary;
  summary.submap_id = submap_id_;
  summary.histogram = submap_hist;
  summary.landmark_count = static_cast<int>(submap_landmarks.size());
  summary.anchor_pose = pose_est_[static_cast<std::size_t>(anchor)];
  std::vector<ClassHistogram> scene_hists;
  std::vector<SceneDescriptor> scenes;
  for (int k = submap_first_scene_; k <= last_scene; ++k) {
    summary.scene_ids.push_back(k);
    const auto& body = body_meas_[static_cast<std::size_t>(k)];
    const auto& world = world_meas_[static_cast<std::size_t>(k)];
    scene_hists.push_back(histogram_of(body));
    SceneDescriptor d;
    d.scene_id = k;
    d.submap_id = submap_id_;
    d.histogram = scene_hists.back().normalized(cfg_.num_classes);
    d.pose = pose_est_[static_cast<std::size_t>(k)];
    for (std::size_t m = 0; m < body.size(); ++m) {
      d.labels.push_back(body[m].label);
      d.points_body.push_back(body[m].position);
      d.points_world.push_back(world[m].position);
    }
    scenes.push_back(std::move(d));
  }
  corpus_.add_submap(scene_hists);
  if (auto cov = submap_covariance(submap_landmarks)) summary.entropy = gaussian_entropy(*cov);
  summary.tfidf = tfidf_score(submap_hist, corpus_);

  const GateDecision decision =
      gate(summary, gate_tree_ ? &*gate_tree_ : nullptr, cfg_.gate_rule());
  bool had_closure = false;
  if (submap_hist.total > 0) {
    const std::vector<double> hist = submap_hist.normalized(cfg_.num_classes);
    if (decision == GateDecision::Check) {
      ++out_.gated_checks;
      for (const auto& lc : detector_.detect(hist, scenes)) {
        graph_.factors.push_back(Factor::loop(lc.candidate_scene, lc.query_scene, lc.relative, loop_info_, robust_));
        out_.loop_closures.push_back(lc);
        had_closure = true;
      }
    }
    detector_.add_submap(submap_id_, hist, scenes);
  }

  OptimizeResult res = optimize(graph_, cfg_.optimizer());
  graph_ = std::move(res.state);
  for (const auto& [id, p] : graph_.poses) pose_est_[static_cast<std::size_t>(id)] = p;

  if (trace_before) {
    gate_samples_.push_back({summary, gate_label(*trace_before, res.last_pose_cov_trace, had_closure)});
    if (gate_samples_.size() >= 10)
      gate_tree_ = train_gate(gate_samples_, cfg_.gate_tree_max_depth, cfg_.gate_tree_min_leaf);
  }

  for (NodeId leaf : leaves) next_landmark_id_ = std::max(next_landmark_id_, tree_->node(leaf).map->next_landmark_id);
  ++out_.submaps;
}

RunOutputs Pipeline::run() {
  const std::size_t n = in_.odometry.size();
  if (n == 0) throw ContractError("empty odometry log");
  if (!in_.ground_truth.empty() && in_.ground_truth.size() != n)
    throw ContractError("ground truth and odometry lengths differ");

  body_meas_.assign(n, {});
  world_meas_.assign(n, {});
  for (const auto& m : in_.measurements) {
    if (m.scene_id < 0 || static_cast<std::size_t>(m.scene_id) >= n)
      throw ContractError("measurement scene id " + std::to_string(m.scene_id) + " has no odometry row");
    if (m.label.id >= cfg_.num_classes) throw ContractError("measurement class id exceeds num_classes");
    body_meas_[static_cast<std::size_t>(m.scene_id)].push_back(m);
  }
  if (cfg_.fit_fp_rate) {
    const double mean_det = static_cast<double>(in_.measurements.size()) / static_cast<double>(n);
    assoc_.fp_rate = std::max(1e-3, mean_det > 0.0 ? cfg_.det_lambda_fp / mean_det : 0.0);
    // The count prior follows the same detector: expected false positives per scene.
    assoc_.lambda_fp = std::max(1e-3, cfg_.det_lambda_fp) / assoc_.prior_volume;
  }

  std::vector<Pose> gt;
  for (const auto& g : in_.ground_truth) gt.push_back(g.pose);

  start_submap(0, 0);
  double hyp_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const int ki = static_cast<int>(k);
    if (k == 0) {
      pose_est_.push_back(in_.odometry[0].pose);
      graph_.poses[0] = pose_est_[0];
      graph_.factors.push_back(Factor::prior(0, pose_est_[0], pose_information(cfg_.prior_sigma, cfg_.prior_sigma)));
    } else {
      pose_est_.push_back(pose_est_.back() * in_.odometry[k].pose);
      graph_.poses[ki] = pose_est_.back();
      graph_.factors.push_back(Factor::odometry(ki - 1, ki, in_.odometry[k].pose, odom_info_, robust_));
    }

    for (const auto& m : body_meas_[k]) {
      SemanticMeasurement w = m;
      w.position = pose_est_[k] * m.position;
      world_meas_[k].push_back(w);
    }
    step_hypotheses(world_meas_[k]);

    const bool submap_done = (ki - submap_first_scene_ + 1) == cfg_.submap_length || k + 1 == n;
    if (submap_done) {
      finalize_submap(ki);
      if (k + 1 < n) start_submap(submap_id_ + 1, ki + 1);
    }

    MetricsRow row;
    row.frame = ki;
    row.n_hypotheses = current_hypotheses();
    row.n_landmarks = static_cast<int>(tree_->node(tree_->best_leaf()).map->landmarks.size());
    row.n_loop_closures = static_cast<int>(out_.loop_closures.size());
    row.rmse = gt.empty() ? std::nan("")
                          : rmse(std::span<const Pose>(pose_est_.data(), k + 1), std::span<const Pose>(gt.data(), k + 1));
    out_.metrics.push_back(row);
    hyp_sum += row.n_hypotheses;
  }

  out_.mean_hypotheses = hyp_sum / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) out_.trajectory.push_back({in_.odometry[k].t, pose_est_[k]});
  for (const auto& [id, lm] : global_map_) {
    Landmark l = lm;
    if (auto it = graph_.landmarks.find(id); it != graph_.landmarks.end()) l.mean = it->second;
    out_.map.push_back(l);
  }
  const auto raw = dead_reckoning(in_.odometry);
  if (gt.empty()) {
    out_.final_rmse = std::nan("");
    out_.odometry_rmse = std::nan("");
  } else {
    out_.final_rmse = rmse(pose_est_, gt);
    std::vector<Pose> raw_poses;
    for (const auto& r : raw) raw_poses.push_back(r.pose);
    out_.odometry_rmse = rmse(raw_poses, gt);
  }
  return std::move(out_);
}

}  // namespace

RunOutputs run_pipeline(const RunConfig& cfg, const RunInputs& inputs) {
  cfg.validate();
  Pipeline p(cfg, inputs);
  return p.run();
}

RunInputs simulate_inputs(const RunConfig& cfg) {
  cfg.validate();
  const World world = generate_world(cfg.world());
  const SimulatedLog log = simulate(world, cfg.detector(), cfg.odometry(), cfg.run_seed);
  RunInputs in;
  in.measurements = log.measurements;
  for (std::size_t k = 0; k < log.odometry.size(); ++k) {
    in.odometry.push_back({log.odometry_times[k], log.odometry[k]});
    in.ground_truth.push_back({log.odometry_times[k], log.ground_truth[k]});
  }
  return in;
}

EvalReport evaluate_trajectory(std::span<const TimedPose> estimate, std::span<const TimedPose> ground_truth) {
  if (estimate.size() != ground_truth.size()) throw ContractError("trajectory lengths differ");
  EvalReport r;
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    if (std::abs(estimate[k].t - ground_truth[k].t) > 1e-6)
      throw ContractError("timestamps misaligned at row " + std::to_string(k + 1));
    r.errors.push_back((estimate[k].pose.translation - ground_truth[k].pose.translation).norm());
  }
  if (r.errors.empty()) return r;
  double sq = 0.0;
  double sum = 0.0;
  for (double e : r.errors) {
    sq += e * e;
    sum += e;
  }
  const double count = static_cast<double>(r.errors.size());
  r.rmse = std::sqrt(sq / count);
  const double mean = sum / count;
  r.error_std = std::sqrt(std::max(0.0, sq / count - mean * mean));
  return r;
}

double drift_reduction_percent(double raw_rmse, double corrected_rmse) {
  if (!(raw_rmse > 0.0)) throw ContractError("raw RMSE must be positive");
  return 100.0 * (1.0 - corrected_rmse / raw_rmse);
}

std::vector<TimedPose> dead_reckoning(std::span<const TimedPose> odometry) {
  std::vector<TimedPose> out;
  Pose x = Pose::identity();
  for (const auto& o : odometry) {
    x = out.empty() ? o.pose : x * o.pose;
    out.push_back({o.t, x});
  }
  return out;
}

}  // namespace dpmhm
