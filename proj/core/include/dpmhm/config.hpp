#pragma once

#include "dpmhm/assoc.hpp"
#include "dpmhm/filter.hpp"
#include "dpmhm/graph.hpp"
#include "dpmhm/mht.hpp"
#include "dpmhm/placerec.hpp"
#include "dpmhm/sim.hpp"
#include "dpmhm/submap.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpmhm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EstimatorMode { Dpmhm, MhmThreshold, SingleUkf };

/// Every tunable of a run, flat so it maps one-to-one onto `key = value` lines.
struct RunConfig {
  EstimatorMode mode = EstimatorMode::Dpmhm;
  std::uint64_t run_seed = 1;
  int submap_length = 30;
  int max_branches = 5;
  double plausibility_gap = 6.0;
  /// Euclidean gate of the single-UKF baseline (m).
  double nn_gate_distance = 2.0;
  /// Replace fp_rate by det_lambda_fp / mean detections per scene.
  bool fit_fp_rate = true;
  /// Minimum hypothesis mass a landmark needs to survive submap fusion.
  double fusion_min_support = 0.5;

  // Association.
  int num_classes = 8;
  double meas_sigma2 = 0.04;
  double trans_cov_var = 0.01;
  std::vector<int> dirac_classes;
  std::vector<double> class_prior;
  double dirichlet_alpha = 1.0;
  double fp_rate = 0.02;
  double map_volume = 1000.0;
  double lambda_new = 0.01;
  double lambda_fp = 0.01;
  double prior_volume = 100.0;
  double fp_scale = 1.0;
  double gate_chi2 = 16.27;
  DpWeightMode dp_weight_mode = DpWeightMode::Exp;

  // Resampling.
  double ess_fraction = 0.5;
  double kld_epsilon = 0.05;
  double kld_delta = 0.01;
  int max_hypotheses = 20;
  bool kld_cube_bracket = false;

  // UKF.
  double ukf_alpha = 0.1;
  double ukf_beta = 2.0;
  double ukf_kappa = 0.0;

  // Submap summary and gate.
  TfidfDocUnit tfidf_doc_unit = TfidfDocUnit::Submap;
  int gate_min_landmarks = 8;
  double gate_min_tfidf = 0.2;
  bool gate_use_tree = false;
  int gate_tree_max_depth = 3;
  int gate_tree_min_leaf = 2;

  // Place recognition.
  double tau_jsd = 0.3;
  double r_l2 = 0.5;
  int exclusion_window = 60;
  double tau_verify = 3.0;
  double class_penalty = 0.5;
  double dist_norm = 5.0;
  double edge_radius = 6.0;
  SceneTermMode scene_term_mode = SceneTermMode::AsPrinted;
  int ransac_iterations = 200;
  double ransac_inlier_tol = 0.5;
  int ransac_min_inliers = 4;
  double bayes_prior = 0.5;
  double bayes_p_stay_lc = 0.9;
  double bayes_p_stay_no_lc = 0.9;
  double bayes_p_pos_given_lc = 0.8;
  double bayes_p_pos_given_no_lc = 0.1;
  double tau_bayes = 0.8;
  int max_closures_per_submap = 5;

  // Graph.
  double cauchy_c = 1.0;
  double odom_sigma_t = 0.02;
  double odom_sigma_r = 1e-4;
  /// Vertical increment noise; ground robots have far less of it than planar noise.
  double odom_sigma_z = 1e-3;
  double prior_sigma = 1e-3;
  double loop_sigma_t = 0.2;
  double loop_sigma_r = 0.05;
  int optimizer_max_iters = 50;
  double grad_tol = 1e-8;
  double lambda_init = 1e-4;

  // Simulation.
  std::uint64_t world_seed = 1;
  double arena_size = 40.0;
  std::vector<int> landmarks_per_class = std::vector<int>(8, 8);
  TrajectoryShape trajectory = TrajectoryShape::SquareLoop;
  int steps = 120;
  double step_length = 1.0;
  double min_separation = 1.5;
  double max_height = 3.0;
  double dt = 0.1;
  double det_range = 12.0;
  double det_fov_deg = 360.0;
  double det_p_fn = 0.0;
  double det_lambda_fp = 0.0;
  std::vector<std::vector<double>> det_confusion;
  double det_sigma2 = 0.04;
  double odo_sigma_t = 0.02;
  double odo_sigma_r = 0.0;
  double odo_yaw_bias = 0.0;

  /// Throws ConfigError when any parameter is outside its documented range.
  void validate() const;

  [[nodiscard]] AssocParams assoc() const;
  [[nodiscard]] ResampleParams resample() const;
  [[nodiscard]] UkfParams ukf() const;
  [[nodiscard]] GateRule gate_rule() const;
  [[nodiscard]] LoopDetectorParams loop_detector() const;
  [[nodiscard]] OptimizeParams optimizer() const;
  [[nodiscard]] WorldSpec world() const;
  [[nodiscard]] DetectorSpec detector() const;
  [[nodiscard]] OdometrySpec odometry() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string to_string(EstimatorMode m);

/// Parse `key = value` lines ('#' starts a comment). Unknown or repeated keys are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Every key, one per line, in a fixed order. parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& c);

/// Names of all recognised keys, in serialization order.
std::vector<std::string> config_keys();

}  // namespace dpmhm
