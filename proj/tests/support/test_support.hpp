#pragma once

#include "dpmhm/assoc.hpp"
#include "dpmhm/graph.hpp"
#include "dpmhm/mht.hpp"
#include "dpmhm/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace dpmhm::support {

inline Mat3 random_spd(std::mt19937_64& rng, double floor = 0.1, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat3 a;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = n(rng);
  return scale * (a * a.transpose()) + floor * Mat3::Identity();
}

inline Vec3 random_vec(std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  return {n(rng), n(rng), n(rng)};
}

inline Pose random_pose(std::mt19937_64& rng, double t_sigma = 1.0, double r_sigma = 1.0) {
  Pose p;
  p.translation = random_vec(rng, t_sigma);
  p.rotation = Eigen::Quaterniond(so3_exp(random_vec(rng, r_sigma)));
  return p;
}

/// Minimum over all injective row->column maps (rows <= cols) by exhaustive search.
inline double brute_force_assignment(const Eigen::MatrixXd& c) {
  const int rows = static_cast<int>(c.rows());
  const int cols = static_cast<int>(c.cols());
  std::vector<int> perm(static_cast<std::size_t>(cols));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int r = 0; r < rows; ++r) s += c(r, perm[static_cast<std::size_t>(r)]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Tree whose leaves carry the given normalized weights: one Existing branch per weight,
/// each landmark placed so its Gaussian likelihood matches the requested ratio.
inline HypothesisTree weighted_tree(const std::vector<double>& weights, std::uint64_t seed, AssocParams* out = nullptr) {
  AssocParams p;
  p.meas_cov = Mat3::Identity();
  p.trans_cov_by_class[0] = Mat3::Identity();
  const double wmax = *std::max_element(weights.begin(), weights.end());
  MapState root;
  std::vector<Assignment> branches;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    Landmark lm;
    lm.id = static_cast<int>(k);
    lm.assign_count = 1;
    lm.mean = Vec3(std::sqrt(-2.0 * std::log(weights[k] / wmax)), 0.0, 0.0);
    root.landmarks.push_back(lm);
    branches.push_back(Assignment::from_targets({AssignmentTarget::existing(static_cast<int>(k))}));
  }
  root.next_landmark_id = static_cast<int>(weights.size());
  SemanticMeasurement m;
  const std::vector<SemanticMeasurement> ms{m};
  HypothesisTree tree(root, seed);
  tree.extend(tree.root(), branches, ms, p, UkfParams{});
  tree.normalize();
  if (out != nullptr) *out = p;
  return tree;
}

struct EpisodeOutcome {
  bool same_sequence = false;
  double tree_log_weight = 0.0;
  double oracle_log_weight = 0.0;
  std::size_t sequences = 0;
};

/// One random association episode (T <= 3 steps, <= 3 measurements per step). The tree
/// is grown with every finite assignment of each step's cost matrix; the oracle enumerates
/// target sequences on its own and scores them with the posterior recursion.
inline EpisodeOutcome mht_episode(std::mt19937_64& rng) {
  AssocParams p;
  p.meas_cov = 0.1 * Mat3::Identity();
  p.trans_cov_by_class[0] = 0.2 * Mat3::Identity();
  p.trans_cov_by_class[1] = 0.2 * Mat3::Identity();
  p.num_classes = 2;
  p.class_prior = {{0, 0.5}, {1, 0.5}};
  p.lambda_new = 0.05;
  p.lambda_fp = 0.05;
  p.prior_volume = 20.0;
  p.map_volume = 100.0;
  p.fp_rate = 0.1;
  const UkfParams ukf;

  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> steps_d(1, 3);
  std::uniform_int_distribution<int> meas_d(1, 3);

  MapState root;
  root.current_submap = 1;
  const int n_landmarks = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int i = 0; i < n_landmarks; ++i) {
    Landmark lm;
    lm.id = i;
    lm.label = ClassLabel{i % 2};
    lm.mean = random_vec(rng, 1.5);
    lm.cov = 0.1 * Mat3::Identity();
    lm.assign_count = 1;
    lm.submap_id = 0;
    root.landmarks.push_back(lm);
  }
  root.next_landmark_id = n_landmarks;
  std::uniform_int_distribution<int> pick_lm(0, n_landmarks - 1);

  const int steps = steps_d(rng);
  std::vector<std::vector<SemanticMeasurement>> scenes(static_cast<std::size_t>(steps));
  for (auto& scene : scenes) {
    const int n = meas_d(rng);
    for (int i = 0; i < n; ++i) {
      SemanticMeasurement m;
      const Landmark& near = root.landmarks[static_cast<std::size_t>(pick_lm(rng))];
      if (coin(rng)) {
        m.label = near.label;
        m.position = near.mean + random_vec(rng, 0.3);
      } else {
        m.label = ClassLabel{coin(rng)};
        m.position = random_vec(rng, 2.0);
      }
      scene.push_back(m);
    }
  }

  HypothesisTree tree(root, 0);
  for (const auto& scene : scenes) {
    for (NodeId leaf : tree.leaves()) {
      const MapState& state = *tree.node(leaf).map;
      const auto all = enumerate_assignments(build_cost_matrix(scene, state, p));
      tree.extend(leaf, all, scene, p, ukf);
    }
  }
  const NodeId best = tree.best_leaf();
  std::vector<std::vector<AssignmentTarget>> tree_seq;
  for (NodeId id : tree.path(best))
    if (id != tree.root()) tree_seq.push_back(tree.node(id).assignment.targets);

  EpisodeOutcome out;
  out.tree_log_weight = tree.node(best).log_weight;
  out.oracle_log_weight = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<AssignmentTarget>> best_seq;
  std::vector<std::vector<AssignmentTarget>> seq;

  std::function<void(const MapState&, std::size_t, double)> recurse = [&](const MapState& state, std::size_t t,
                                                                         double logw) {
    if (t == scenes.size()) {
      ++out.sequences;
      if (logw > out.oracle_log_weight) {
        out.oracle_log_weight = logw;
        best_seq = seq;
      }
      return;
    }
    const auto& scene = scenes[t];
    std::vector<AssignmentTarget> targets(scene.size());
    std::vector<int> used;
    std::function<void(std::size_t)> choose = [&](std::size_t i) {
      if (i == scene.size()) {
        const Assignment a = Assignment::from_targets(targets, state.total_fp);
        const double w = logw + measurement_set_likelihood(a, scene, state, p) + assignment_prior(a, p);
        seq.push_back(targets);
        recurse(apply_assignment(state, a, scene, p, ukf), t + 1, w);
        seq.pop_back();
        return;
      }
      targets[i] = AssignmentTarget::new_landmark();
      choose(i + 1);
      targets[i] = AssignmentTarget::false_positive();
      choose(i + 1);
      for (const Landmark& lm : state.landmarks) {
        if (lm.label != scene[i].label || std::find(used.begin(), used.end(), lm.id) != used.end()) continue;
        targets[i] = state.in_current_submap(lm) ? AssignmentTarget::existing(lm.id) : AssignmentTarget::previous(lm.id);
        used.push_back(lm.id);
        choose(i + 1);
        used.pop_back();
      }
    };
    choose(0);
  };
  recurse(root, 0, 0.0);
  out.same_sequence = best_seq == tree_seq;
  return out;
}

inline double density(const Vec3& d, const Mat3& cov) { return std::exp(gaussian_log_density(d, cov)); }

/// Trapezoid rule for  integral N(p - x; 0, Sz) N(x; pi, Sa) dx  over a 3-D grid laid out in
/// the whitened coordinates of the integrand's product Gaussian.
inline double convolution_by_quadrature(const Vec3& p, const Vec3& pi, const Mat3& sz, const Mat3& sa) {
  const Mat3 c = (sz.inverse() + sa.inverse()).inverse();
  const Vec3 mu = c * (sz.inverse() * p + sa.inverse() * pi);
  const Mat3 l = c.llt().matrixL();
  const double h = 0.25;
  const int half = 36;
  double sum = 0.0;
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j)
      for (int k = -half; k <= half; ++k) {
        const Vec3 x = mu + l * Vec3(i * h, j * h, k * h);
        sum += density(p - x, sz) * density(x - pi, sa);
      }
  return sum * h * h * h * l.determinant();
}

/// Central differences (step 1e-6) of a residual through the retraction.
template <int R, typename F>
Eigen::Matrix<double, R, 6> numeric_pose_jacobian(F f, const Pose& x) {
  const double h = 1e-6;
  Eigen::Matrix<double, R, 6> j;
  for (int k = 0; k < 6; ++k) {
    Vec6 d = Vec6::Zero();
    d(k) = h;
    const Eigen::Matrix<double, R, 1> plus = f(retract(x, d));
    const Eigen::Matrix<double, R, 1> minus = f(retract(x, -d));
    j.col(k) = (plus - minus) / (2.0 * h);
  }
  return j;
}

inline double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  return (analytic - numeric).norm() / std::max(1.0, numeric.norm());
}

/// Worst relative Jacobian error over every factor type at one random linearization point.
inline double worst_jacobian_error(std::mt19937_64& rng) {
  const Pose xi = random_pose(rng, 3.0);
  const Pose xj = random_pose(rng, 3.0);
  const Pose z = random_pose(rng, 3.0, 0.5);
  const Vec3 l = random_vec(rng, 5.0);
  const Vec3 zp = random_vec(rng, 5.0);
  double worst = 0.0;

  const auto prior = linearize_prior(xi, z);
  worst = std::max(worst, relative_error(prior.J, numeric_pose_jacobian<6>([&](const Pose& x) { return linearize_prior(x, z).r; }, xi)));

  const auto btw = linearize_between(xi, xj, z);
  worst = std::max(worst, relative_error(btw.Ji, numeric_pose_jacobian<6>([&](const Pose& x) { return linearize_between(x, xj, z).r; }, xi)));
  worst = std::max(worst, relative_error(btw.Jj, numeric_pose_jacobian<6>([&](const Pose& x) { return linearize_between(xi, x, z).r; }, xj)));

  const auto pt = linearize_point(xi, l, zp);
  worst = std::max(worst, relative_error(pt.Jx, numeric_pose_jacobian<3>([&](const Pose& x) { return linearize_point(x, l, zp).r; }, xi)));
  Mat3 jl;
  for (int k = 0; k < 3; ++k) {
    const Vec3 d = Vec3::Unit(k) * 1e-6;
    jl.col(k) = (linearize_point(xi, l + d, zp).r - linearize_point(xi, l - d, zp).r) / 2e-6;
  }
  worst = std::max(worst, relative_error(pt.Jl, jl));
  return worst;
}

}  // namespace dpmhm::support
