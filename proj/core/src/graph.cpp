#include "dpmhm/graph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace dpmhm {

Factor Factor::prior(int i, const Pose& p, const Mat6& info) {
  Factor f;
  f.kind = FactorKind::Prior;
  f.i = i;
  f.j = i;
  f.relative = p;
  f.information = info;
  return f;
}

Factor Factor::odometry(int i, int j, const Pose& rel, const Mat6& info, RobustKernel k) {
  Factor f;
  f.kind = FactorKind::Odometry;
  f.i = i;
  f.j = j;
  f.relative = rel;
  f.information = info;
  f.robust = k;
  return f;
}

Factor Factor::loop(int i, int j, const Pose& rel, const Mat6& info, RobustKernel k) {
  Factor f = odometry(i, j, rel, info, k);
  f.kind = FactorKind::Loop;
  return f;
}

Factor Factor::landmark(int i, int landmark_id, const Vec3& z, const Mat3& info, RobustKernel k) {
  Factor f;
  f.kind = FactorKind::Landmark;
  f.i = i;
  f.j = landmark_id;
  f.point = z;
  f.information = info;
  f.robust = k;
  return f;
}

void GraphState::validate() const {
  int prior_pose = -1;
  int priors = 0;
  for (const auto& f : factors) {
    if (!poses.contains(f.i)) throw GraphStructureError("factor references missing pose " + std::to_string(f.i));
    const auto dim = f.kind == FactorKind::Landmark ? 3 : 6;
    if (f.information.rows() != dim || f.information.cols() != dim)
      throw GraphStructureError("factor information has wrong size");
    switch (f.kind) {
      case FactorKind::Prior:
        ++priors;
        prior_pose = f.i;
        break;
      case FactorKind::Odometry:
      case FactorKind::Loop:
        if (!poses.contains(f.j)) throw GraphStructureError("factor references missing pose " + std::to_string(f.j));
        break;
      case FactorKind::Landmark:
        if (!landmarks.contains(f.j))
          throw GraphStructureError("factor references missing landmark " + std::to_string(f.j));
        break;
    }
  }
  if (priors != 1) throw GraphStructureError("graph needs exactly one prior factor");

  // Breadth-first search over poses (key >= 0) and landmarks (key encoded as -1 - id).
  std::map<long, std::vector<long>> adj;
  for (const auto& f : factors) {
    if (f.kind == FactorKind::Prior) continue;
    const long a = f.i;
    const long b = f.kind == FactorKind::Landmark ? -1L - f.j : static_cast<long>(f.j);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::set<long> seen{prior_pose};
  std::deque<long> queue{prior_pose};
  while (!queue.empty()) {
    const long v = queue.front();
    queue.pop_front();
    for (long w : adj[v])
      if (seen.insert(w).second) queue.push_back(w);
  }
  for (const auto& [id, p] : poses)
    if (!seen.contains(id)) throw GraphStructureError("pose " + std::to_string(id) + " is disconnected");
  for (const auto& [id, l] : landmarks)
    if (!seen.contains(-1L - id)) throw GraphStructureError("landmark " + std::to_string(id) + " is disconnected");
}

double cauchy_weight(double residual_norm, double c) {
  if (!(c > 0.0)) throw ContractError("Cauchy scale must be positive");
  const double u = residual_norm / c;
  return 1.0 / (1.0 + u * u);
}

double robust_cost(double s, const RobustKernel& k) {
  if (!k.cauchy) return 0.5 * s * s;
  const double u = s / k.c;
  return 0.5 * k.c * k.c * std::log1p(u * u);
}

PriorLinearization linearize_prior(const Pose& x, const Pose& z) {
  PriorLinearization out;
  const Mat3 R = x.R();
  const Vec3 rr = so3_log(z.R().transpose() * R);
  out.r << x.translation - z.translation, rr;
  out.J.setZero();
  out.J.topLeftCorner<3, 3>() = R;
  out.J.bottomRightCorner<3, 3>() = so3_right_jacobian_inv(rr);
  return out;
}

BetweenLinearization linearize_between(const Pose& xi, const Pose& xj, const Pose& z) {
  BetweenLinearization out;
  const Mat3 Ri = xi.R();
  const Mat3 Rj = xj.R();
  const Mat3 RzT = z.R().transpose();
  const Vec3 t_rel = Ri.transpose() * (xj.translation - xi.translation);
  const Mat3 R_rel = Ri.transpose() * Rj;
  const Vec3 rr = so3_log(RzT * R_rel);
  const Mat3 Jinv = so3_right_jacobian_inv(rr);
  out.r << RzT * (t_rel - z.translation), rr;

  out.Ji.setZero();
  out.Ji.topLeftCorner<3, 3>() = -RzT;
  out.Ji.topRightCorner<3, 3>() = RzT * skew(t_rel);
  out.Ji.bottomRightCorner<3, 3>() = -Jinv * R_rel.transpose();

  out.Jj.setZero();
  out.Jj.topLeftCorner<3, 3>() = RzT * R_rel;
  out.Jj.bottomRightCorner<3, 3>() = Jinv;
  return out;
}

PointLinearization linearize_point(const Pose& x, const Vec3& l, const Vec3& z) {
  PointLinearization out;
  const Mat3 RT = x.R().transpose();
  const Vec3 v = RT * (l - x.translation);
  out.r = v - z;
  out.Jx.leftCols<3>() = -Mat3::Identity();
  out.Jx.rightCols<3>() = skew(v);
  out.Jl = RT;
  return out;
}

namespace {

struct Layout {
  std::map<int, int> pose_offset;
  std::map<int, int> landmark_offset;
  int size = 0;
};

Layout layout_of(const GraphState& g) {
  Layout l;
  for (const auto& [id, p] : g.poses) {
    l.pose_offset[id] = l.size;
    l.size += 6;
  }
  for (const auto& [id, p] : g.landmarks) {
    l.landmark_offset[id] = l.size;
    l.size += 3;
  }
  return l;
}

struct FactorEval {
  Eigen::VectorXd r;
  // (column offset, Jacobian block) pairs.
  std::vector<std::pair<int, Eigen::MatrixXd>> blocks;
};

FactorEval evaluate(const Factor& f, const GraphState& g, const Layout& l) {
  FactorEval e;
  switch (f.kind) {
    case FactorKind::Prior: {
      const auto lin = linearize_prior(g.poses.at(f.i), f.relative);
      e.r = lin.r;
      e.blocks.emplace_back(l.pose_offset.at(f.i), lin.J);
      break;
    }
    case FactorKind::Odometry:
    case FactorKind::Loop: {
      const auto lin = linearize_between(g.poses.at(f.i), g.poses.at(f.j), f.relative);
      e.r = lin.r;
      e.blocks.emplace_back(l.pose_offset.at(f.i), lin.Ji);
      e.blocks.emplace_back(l.pose_offset.at(f.j), lin.Jj);
      break;
    }
    case FactorKind::Landmark: {
      const auto lin = linearize_point(g.poses.at(f.i), g.landmarks.at(f.j), f.point);
      e.r = lin.r;
      e.blocks.emplace_back(l.pose_offset.at(f.i), lin.Jx);
      e.blocks.emplace_back(l.landmark_offset.at(f.j), lin.Jl);
      break;
    }
  }
  return e;
}

double whitened_norm(const Eigen::VectorXd& r, const Eigen::MatrixXd& info) {
  return std::sqrt(std::max(0.0, r.dot(info * r)));
}

struct NormalEquations {
  Eigen::SparseMatrix<double> H;
  Eigen::VectorXd b;
  double cost = 0.0;
};

NormalEquations build_normal_equations(const GraphState& g, const Layout& l) {
  NormalEquations ne;
  ne.b = Eigen::VectorXd::Zero(l.size);
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& f : g.factors) {
    const FactorEval e = evaluate(f, g, l);
    const double s = whitened_norm(e.r, f.information);
    ne.cost += robust_cost(s, f.robust);
    const double w = f.robust.cauchy ? cauchy_weight(s, f.robust.c) : 1.0;
    const Eigen::MatrixXd wInfo = w * f.information;
    for (const auto& [oa, Ja] : e.blocks) {
      ne.b.segment(oa, Ja.cols()) += Ja.transpose() * (wInfo * e.r);
      for (const auto& [ob, Jb] : e.blocks) {
        const Eigen::MatrixXd blk = Ja.transpose() * wInfo * Jb;
        for (Eigen::Index r = 0; r < blk.rows(); ++r)
          for (Eigen::Index c = 0; c < blk.cols(); ++c)
            if (blk(r, c) != 0.0) trip.emplace_back(oa + static_cast<int>(r), ob + static_cast<int>(c), blk(r, c));
      }
    }
  }
  ne.H.resize(l.size, l.size);
  ne.H.setFromTriplets(trip.begin(), trip.end());
  return ne;
}

GraphState apply_step(const GraphState& g, const Layout& l, const Eigen::VectorXd& dx) {
  GraphState out = g;
  for (auto& [id, p] : out.poses) p = retract(p, dx.segment<6>(l.pose_offset.at(id)));
  for (auto& [id, v] : out.landmarks) v += dx.segment<3>(l.landmark_offset.at(id));
  return out;
}

}  // namespace

double total_cost(const GraphState& g) {
  const Layout l = layout_of(g);
  double cost = 0.0;
  for (const auto& f : g.factors) cost += robust_cost(whitened_norm(evaluate(f, g, l).r, f.information), f.robust);
  return cost;
}

OptimizeResult optimize(GraphState g, const OptimizeParams& params) {
  g.validate();
  const Layout l = layout_of(g);
  OptimizeResult res;
  double lambda = params.lambda_init;

  NormalEquations ne = build_normal_equations(g, l);
  res.initial_cost = ne.cost;
  res.cost_history.push_back(ne.cost);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  for (int it = 0; it < params.max_iters; ++it) {
    if (ne.b.lpNorm<Eigen::Infinity>() < params.grad_tol) break;
    res.iterations = it + 1;
    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::SparseMatrix<double> A = ne.H;
      for (int k = 0; k < l.size; ++k) A.coeffRef(k, k) += lambda * std::max(ne.H.coeff(k, k), 1e-6);
      solver.compute(A);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd dx = solver.solve(-ne.b);
      if (solver.info() != Eigen::Success || !dx.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      GraphState candidate = apply_step(g, l, dx);
      const double c = total_cost(candidate);
      if (c <= ne.cost) {
        g = std::move(candidate);
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        const double prev = ne.cost;
        ne = build_normal_equations(g, l);
        res.cost_history.push_back(ne.cost);
        if (prev - ne.cost <= 1e-12 * std::max(1.0, prev)) lambda = 1e12;  // converged in cost
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || lambda >= 1e12) break;
  }
  res.final_cost = ne.cost;

  // Marginal covariance of the last pose from the undamped Gauss-Newton Hessian.
  if (!g.poses.empty()) {
    const int off = l.pose_offset.at(g.poses.rbegin()->first);
    solver.compute(ne.H);
    if (solver.info() == Eigen::Success) {
      double tr = 0.0;
      for (int k = 0; k < 6; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(l.size);
        e(off + k) = 1.0;
        tr += solver.solve(e)(off + k);
      }
      res.last_pose_cov_trace = tr;
    } else {
      res.last_pose_cov_trace = std::numeric_limits<double>::infinity();
    }
  }
  res.state = std::move(g);
  return res;
}

double rmse(std::span<const Pose> trajectory, std::span<const Pose> ground_truth) {
  if (trajectory.size() != ground_truth.size()) throw ContractError("trajectory length mismatch");
  if (trajectory.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < trajectory.size(); ++k)
    sum += (trajectory[k].translation - ground_truth[k].translation).squaredNorm();
  return std::sqrt(sum / static_cast<double>(trajectory.size()));
}

}  // namespace dpmhm
