#include "dpmhm/assoc.hpp"

#include "dpmhm/hungarian.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dpmhm {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;

bool is_forbidden(double c) { return c >= 0.5 * kInfCost; }

double cost_of(double log_lik) { return log_lik <= 0.5 * kLogZero ? kInfCost : -log_lik; }

Mat3 candidate_cov(const Landmark& lm, const MapState& state, const AssocParams& params) {
  if (state.in_current_submap(lm) || params.is_dirac(lm.label)) return params.meas_cov;
  return params.meas_cov + params.trans_cov(lm.label);
}

// Kronecker class term times the additive-noise density; used by the joint likelihood
// for both current- and previous-submap landmarks.
double landmark_log_lik(const SemanticMeasurement& m, const Landmark& lm, const AssocParams& params) {
  if (!(m.label == lm.label)) return kLogZero;
  return gaussian_log_density(m.position - lm.mean, params.meas_cov);
}

}  // namespace

void AssocParams::validate() const {
  if (!is_spd(meas_cov)) throw ParameterError("measurement covariance is not SPD");
  for (const auto& [cls, cov] : trans_cov_by_class)
    if (!is_spd(cov)) throw ParameterError("transition covariance of class " + std::to_string(cls) + " is not SPD");
  if (!(dirichlet_alpha > 0.0) || !(fp_rate > 0.0) || !(map_volume > 0.0) || !(lambda_new > 0.0) ||
      !(lambda_fp > 0.0) || !(prior_volume > 0.0) || !(fp_scale > 0.0))
    throw ParameterError("association rates and volumes must be positive");
  if (num_classes < 1) throw ParameterError("num_classes must be >= 1");
  for (const auto& [cls, p] : class_prior)
    if (!(p > 0.0 && p <= 1.0)) throw ParameterError("class prior outside (0, 1]");
  if (!(gate_chi2 > 0.0)) throw ParameterError("gate must be positive");
}

double AssocParams::class_prior_of(ClassLabel c) const {
  if (auto it = class_prior.find(c.id); it != class_prior.end()) return it->second;
  return 1.0 / static_cast<double>(num_classes);
}

Mat3 AssocParams::trans_cov(ClassLabel c) const {
  if (auto it = trans_cov_by_class.find(c.id); it != trans_cov_by_class.end()) return it->second;
  throw ParameterError("no transition covariance for non-Dirac class " + std::to_string(c.id));
}

const Landmark* MapState::find(int id) const {
  for (const auto& lm : landmarks)
    if (lm.id == id) return &lm;
  return nullptr;
}

Landmark* MapState::find(int id) {
  for (auto& lm : landmarks)
    if (lm.id == id) return &lm;
  return nullptr;
}

Assignment Assignment::from_targets(std::vector<AssignmentTarget> targets, int total_fp_before, double cost) {
  Assignment a;
  a.targets = std::move(targets);
  a.n_meas = static_cast<int>(a.targets.size());
  for (const auto& t : a.targets) {
    if (t.kind == TargetKind::New) ++a.n_new;
    if (t.kind == TargetKind::FalsePositive) ++a.n_fp;
  }
  a.total_fp = total_fp_before;
  a.cost = cost;
  return a;
}

Assignment CostMatrix::to_assignment(const std::vector<int>& row_to_col) const {
  std::vector<AssignmentTarget> targets;
  targets.reserve(row_to_col.size());
  double total = 0.0;
  for (std::size_t i = 0; i < row_to_col.size(); ++i) {
    const int j = row_to_col[i];
    if (j < 0) throw ContractError("assignment leaves a measurement unassigned");
    targets.push_back(columns[static_cast<std::size_t>(j)]);
    total += cost(static_cast<Eigen::Index>(i), j);
  }
  return Assignment::from_targets(std::move(targets), total_fp, total);
}

double gaussian_log_density(const Vec3& d, const Mat3& cov) {
  Eigen::LLT<Mat3> llt(cov);
  if (llt.info() != Eigen::Success) throw ParameterError("covariance is not SPD");
  const Vec3 w = llt.matrixL().solve(d);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (3.0 * kLog2Pi + log_det + w.squaredNorm());
}

bool is_candidate(const SemanticMeasurement& m, const Landmark& lm, const MapState& state, const AssocParams& params) {
  if (!(m.label == lm.label)) return false;
  if (std::isinf(params.gate_chi2)) return true;
  const Mat3 s = candidate_cov(lm, state, params);
  const Vec3 d = m.position - lm.mean;
  return d.dot(s.ldlt().solve(d)) <= params.gate_chi2;
}

double log_association_likelihood(const SemanticMeasurement& m, const AssignmentTarget& target, const MapState& state,
                                  const AssocParams& params) {
  switch (target.kind) {
    case TargetKind::Existing:
    case TargetKind::Previous: {
      const Landmark* lm = state.find(target.landmark_id);
      if (lm == nullptr) throw ContractError("assignment refers to unknown landmark " + std::to_string(target.landmark_id));
      if (!(lm->label == m.label)) return kLogZero;
      const Vec3 d = m.position - lm->mean;
      if (target.kind == TargetKind::Existing) {
        const double n = static_cast<double>(lm->assign_count);
        const double weight = params.dp_weight_mode == DpWeightMode::Exp ? n : std::log(std::max(n, 1.0));
        return weight + gaussian_log_density(d, params.meas_cov);
      }
      if (params.is_dirac(lm->label)) return gaussian_log_density(d, params.meas_cov);
      return gaussian_log_density(d, params.meas_cov + params.trans_cov(lm->label));
    }
    case TargetKind::New:
      return std::log(params.dirichlet_alpha) - std::log(params.map_volume);
    case TargetKind::FalsePositive: {
      const double base = state.total_fp > 0 ? params.fp_rate * state.total_fp : params.fp_rate * params.dirichlet_alpha;
      double log_product = 0.0;
      for (const auto& lm : state.landmarks)
        if (is_candidate(m, lm, state, params)) log_product += gaussian_log_density(m.position - lm.mean, params.meas_cov);
      return std::log(params.fp_scale * base) - log_product;
    }
  }
  return kLogZero;
}

double association_likelihood(const SemanticMeasurement& m, const AssignmentTarget& target, const MapState& state,
                              const AssocParams& params) {
  const double l = log_association_likelihood(m, target, state, params);
  return l <= 0.5 * kLogZero ? 0.0 : std::exp(l);
}

double measurement_set_likelihood(const Assignment& assignment, std::span<const SemanticMeasurement> measurements,
                                  const MapState& state, const AssocParams& params) {
  if (assignment.targets.size() != measurements.size())
    throw ContractError("assignment does not cover the measurement set");
  double total = 0.0;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const auto& m = measurements[i];
    const auto& t = assignment.targets[i];
    total += std::log(params.class_prior_of(m.label));
    double term = 0.0;
    if (t.is_landmark()) {
      const Landmark* lm = state.find(t.landmark_id);
      if (lm == nullptr) throw ContractError("assignment refers to unknown landmark " + std::to_string(t.landmark_id));
      term = landmark_log_lik(m, *lm, params);
    } else {
      term = log_association_likelihood(m, t, state, params);
    }
    if (term <= 0.5 * kLogZero) return kLogZero;
    total += term;
  }
  return total;
}

double log_poisson(int n, double mean) {
  return -mean + n * std::log(mean) - std::lgamma(static_cast<double>(n) + 1.0);
}

double assignment_prior(const Assignment& assignment, const AssocParams& params) {
  const double log_ratio = std::lgamma(assignment.n_new + 1.0) + std::lgamma(assignment.n_fp + 1.0) -
                           std::lgamma(assignment.n_meas + 1.0);
  return log_ratio + log_poisson(assignment.n_new, params.lambda_new * params.prior_volume) +
         log_poisson(assignment.n_fp, params.lambda_fp * params.prior_volume);
}

CostMatrix build_cost_matrix(std::span<const SemanticMeasurement> measurements, const MapState& state,
                             const AssocParams& params) {
  CostMatrix c;
  c.total_fp = state.total_fp;
  const int n = static_cast<int>(measurements.size());
  if (n == 0) return c;

  std::vector<const Landmark*> cols;
  for (const auto& lm : state.landmarks) {
    const bool any = std::any_of(measurements.begin(), measurements.end(),
                                 [&](const SemanticMeasurement& m) { return is_candidate(m, lm, state, params); });
    if (any) cols.push_back(&lm);
  }
  const int nl = static_cast<int>(cols.size());
  c.cost = Eigen::MatrixXd::Constant(n, nl + 2 * n, kInfCost);
  for (const Landmark* lm : cols)
    c.columns.push_back(state.in_current_submap(*lm) ? AssignmentTarget::existing(lm->id)
                                                     : AssignmentTarget::previous(lm->id));
  for (int i = 0; i < n; ++i) c.columns.push_back(AssignmentTarget::new_landmark());
  for (int i = 0; i < n; ++i) c.columns.push_back(AssignmentTarget::false_positive());

  for (int i = 0; i < n; ++i) {
    const auto& m = measurements[static_cast<std::size_t>(i)];
    for (int j = 0; j < nl; ++j)
      if (is_candidate(m, *cols[static_cast<std::size_t>(j)], state, params))
        c.cost(i, j) = cost_of(log_association_likelihood(m, c.columns[static_cast<std::size_t>(j)], state, params));
    c.cost(i, nl + i) = cost_of(log_association_likelihood(m, AssignmentTarget::new_landmark(), state, params));
    c.cost(i, nl + n + i) = cost_of(log_association_likelihood(m, AssignmentTarget::false_positive(), state, params));
  }
  return c;
}

Assignment solve_assignment(const CostMatrix& c) {
  if (c.rows() == 0) return Assignment::from_targets({}, c.total_fp, 0.0);
  const LinearAssignment la = solve_linear_assignment(c.cost);
  return c.to_assignment(la.row_to_col);
}

namespace {

std::vector<int> columns_of(const CostMatrix& c, const Assignment& a) {
  // Recover column indices. Landmark columns are unique; the k-th New (FP) column belongs to row k.
  std::vector<int> out;
  const int n = c.rows();
  for (int i = 0; i < n; ++i) {
    const auto& t = a.targets[static_cast<std::size_t>(i)];
    int col = -1;
    int seen = 0;
    for (int j = 0; j < c.cols() && col < 0; ++j) {
      const auto& cj = c.columns[static_cast<std::size_t>(j)];
      if (t.is_landmark()) {
        if (cj == t) col = j;
      } else if (cj.kind == t.kind && seen++ == i) {
        col = j;
      }
    }
    if (col < 0) throw ContractError("assignment target is not a column of the cost matrix");
    out.push_back(col);
  }
  return out;
}

}  // namespace

std::vector<Assignment> generate_branches(const CostMatrix& c, const Assignment& best, int max_branches,
                                          double plausibility_gap) {
  if (max_branches < 1) throw ContractError("max_branches must be >= 1");
  std::vector<Assignment> out{best};
  if (c.rows() == 0) return out;
  CostMatrix work = c;
  Assignment previous = best;
  while (static_cast<int>(out.size()) < max_branches) {
    const auto cols = columns_of(work, previous);
    for (int i = 0; i < work.rows(); ++i) work.cost(i, cols[static_cast<std::size_t>(i)]) = kInfCost;
    Assignment next;
    try {
      next = solve_assignment(work);
    } catch (const InfeasibleAssignment&) {
      break;
    }
    if (next.cost > best.cost + plausibility_gap) break;
    out.push_back(next);
    previous = next;
  }
  std::stable_sort(out.begin(), out.end(), [](const Assignment& a, const Assignment& b) { return a.cost < b.cost; });
  return out;
}

std::vector<Assignment> propose_branches(std::span<const SemanticMeasurement> measurements, const MapState& state,
                                         const AssocParams& params, int max_branches, double plausibility_gap) {
  const CostMatrix full = build_cost_matrix(measurements, state, params);
  const int n = full.rows();
  if (n == 0) return {Assignment::from_targets({}, state.total_fp, 0.0)};
  const int nl = full.cols() - 2 * n;

  // Union rows that compete for a landmark column.
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (int j = 0; j < nl; ++j) {
    int first = -1;
    for (int i = 0; i < n; ++i) {
      if (is_forbidden(full.cost(i, j))) continue;
      if (first < 0) {
        first = i;
      } else {
        parent[static_cast<std::size_t>(find(i))] = find(first);
      }
    }
  }
  std::map<int, std::vector<int>> clusters;
  for (int i = 0; i < n; ++i) clusters[find(i)].push_back(i);

  struct ClusterBranches {
    std::vector<int> rows;
    std::vector<Assignment> branches;
  };
  std::vector<ClusterBranches> per_cluster;
  for (const auto& [root, rows] : clusters) {
    std::vector<int> lm_cols;
    for (int j = 0; j < nl; ++j)
      if (std::any_of(rows.begin(), rows.end(), [&](int i) { return !is_forbidden(full.cost(i, j)); }))
        lm_cols.push_back(j);
    const int r = static_cast<int>(rows.size());
    CostMatrix sub;
    sub.total_fp = full.total_fp;
    sub.cost = Eigen::MatrixXd::Constant(r, static_cast<Eigen::Index>(lm_cols.size()) + 2 * r, kInfCost);
    for (int j : lm_cols) sub.columns.push_back(full.columns[static_cast<std::size_t>(j)]);
    for (int k = 0; k < r; ++k) sub.columns.push_back(AssignmentTarget::new_landmark());
    for (int k = 0; k < r; ++k) sub.columns.push_back(AssignmentTarget::false_positive());
    for (int a = 0; a < r; ++a) {
      const int i = rows[static_cast<std::size_t>(a)];
      for (std::size_t b = 0; b < lm_cols.size(); ++b) sub.cost(a, static_cast<Eigen::Index>(b)) = full.cost(i, lm_cols[b]);
      const auto base = static_cast<Eigen::Index>(lm_cols.size());
      sub.cost(a, base + a) = full.cost(i, nl + i);
      sub.cost(a, base + r + a) = full.cost(i, nl + n + i);
    }
    const Assignment best = solve_assignment(sub);
    per_cluster.push_back({rows, generate_branches(sub, best, max_branches, plausibility_gap)});
  }

  auto compose = [&](std::size_t alt_cluster, std::size_t alt_index) {
    std::vector<AssignmentTarget> targets(static_cast<std::size_t>(n));
    double cost = 0.0;
    for (std::size_t k = 0; k < per_cluster.size(); ++k) {
      const auto& a = per_cluster[k].branches[k == alt_cluster ? alt_index : 0];
      for (std::size_t r = 0; r < per_cluster[k].rows.size(); ++r)
        targets[static_cast<std::size_t>(per_cluster[k].rows[r])] = a.targets[r];
      cost += a.cost;
    }
    return Assignment::from_targets(std::move(targets), state.total_fp, cost);
  };

  std::vector<Assignment> out{compose(per_cluster.size(), 0)};
  std::vector<Assignment> alternatives;
  for (std::size_t k = 0; k < per_cluster.size(); ++k)
    for (std::size_t b = 1; b < per_cluster[k].branches.size(); ++b) alternatives.push_back(compose(k, b));
  std::stable_sort(alternatives.begin(), alternatives.end(),
                   [](const Assignment& a, const Assignment& b) { return a.cost < b.cost; });
  for (auto& a : alternatives) {
    if (static_cast<int>(out.size()) >= max_branches) break;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<Assignment> enumerate_assignments(const CostMatrix& c) {
  std::vector<Assignment> out;
  const int n = c.rows();
  std::vector<int> chosen(static_cast<std::size_t>(n), -1);
  std::vector<char> used(static_cast<std::size_t>(c.cols()), 0);
  auto recurse = [&](auto&& self, int row) -> void {
    if (row == n) {
      out.push_back(c.to_assignment(chosen));
      return;
    }
    for (int j = 0; j < c.cols(); ++j) {
      if (used[static_cast<std::size_t>(j)] || is_forbidden(c.cost(row, j))) continue;
      used[static_cast<std::size_t>(j)] = 1;
      chosen[static_cast<std::size_t>(row)] = j;
      self(self, row + 1);
      used[static_cast<std::size_t>(j)] = 0;
    }
  };
  recurse(recurse, 0);
  return out;
}

Assignment nearest_neighbor_assignment(std::span<const SemanticMeasurement> measurements, const MapState& state,
                                       double gate_distance) {
  const int n = static_cast<int>(measurements.size());
  const int nl = static_cast<int>(state.landmarks.size());
  if (n == 0) return Assignment::from_targets({}, state.total_fp, 0.0);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, nl + n, kInfCost);
  for (int i = 0; i < n; ++i) {
    const auto& m = measurements[static_cast<std::size_t>(i)];
    for (int j = 0; j < nl; ++j) {
      const auto& lm = state.landmarks[static_cast<std::size_t>(j)];
      const double d = (m.position - lm.mean).norm();
      if (lm.label == m.label && d <= gate_distance) cost(i, j) = d;
    }
    cost(i, nl + i) = gate_distance;
  }
  const LinearAssignment la = solve_linear_assignment(cost);
  std::vector<AssignmentTarget> targets;
  for (int i = 0; i < n; ++i) {
    const int j = la.row_to_col[static_cast<std::size_t>(i)];
    if (j < nl) {
      const auto& lm = state.landmarks[static_cast<std::size_t>(j)];
      targets.push_back(state.in_current_submap(lm) ? AssignmentTarget::existing(lm.id) : AssignmentTarget::previous(lm.id));
    } else {
      targets.push_back(AssignmentTarget::new_landmark());
    }
  }
  return Assignment::from_targets(std::move(targets), state.total_fp, la.total_cost);
}

}  // namespace dpmhm
