#include "dpmhm/sim.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace dpmhm {

TrajectoryShape parse_trajectory_shape(const std::string& s) {
  if (s == "square_loop") return TrajectoryShape::SquareLoop;
  if (s == "figure_eight") return TrajectoryShape::FigureEight;
  if (s == "line") return TrajectoryShape::Line;
  throw ParameterError("unknown trajectory shape '" + s + "'");
}

std::string to_string(TrajectoryShape s) {
  switch (s) {
    case TrajectoryShape::SquareLoop: return "square_loop";
    case TrajectoryShape::FigureEight: return "figure_eight";
    case TrajectoryShape::Line: return "line";
  }
  return "square_loop";
}

void WorldSpec::validate() const {
  if (steps <= 0) throw ParameterError("world needs at least one step");
  if (landmarks_per_class.empty()) throw ParameterError("world needs at least one class");
  int total = 0;
  for (int n : landmarks_per_class) {
    if (n < 0) throw ParameterError("negative landmark count");
    total += n;
  }
  if (total == 0) throw ParameterError("world needs at least one landmark");
  if (!(arena_size > 0.0) || !(step_length > 0.0) || !(dt > 0.0)) throw ParameterError("world sizes must be positive");
  if (min_separation < 0.0 || max_height < 0.0) throw ParameterError("world spacing must be non-negative");
}

void DetectorSpec::validate(int num_classes) const {
  if (!(range > 0.0)) throw ParameterError("detector range must be positive");
  if (fov_deg < 0.0) throw ParameterError("field of view must be non-negative");
  if (p_fn < 0.0 || p_fn >= 1.0) throw ParameterError("miss rate must lie in [0, 1)");
  if (lambda_fp < 0.0) throw ParameterError("false-positive rate must be non-negative");
  if (!confusion.empty()) {
    if (static_cast<int>(confusion.size()) != num_classes) throw ParameterError("confusion matrix has wrong size");
    for (const auto& row : confusion) {
      if (static_cast<int>(row.size()) != num_classes) throw ParameterError("confusion matrix has wrong size");
      double s = 0.0;
      for (double p : row) {
        if (p < 0.0) throw ParameterError("confusion entries must be non-negative");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) throw ParameterError("confusion rows must sum to 1");
    }
  }
  if (!meas_cov.isApprox(meas_cov.transpose()) || meas_cov.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() < 0.0)
    throw ParameterError("simulated measurement covariance must be symmetric PSD");
}

void OdometrySpec::validate() const {
  if (sigma_t < 0.0 || sigma_r < 0.0) throw ParameterError("odometry noise must be non-negative");
}

namespace {

// Pose at arc length s along the chosen shape of total length L.
Pose shape_pose(TrajectoryShape shape, double s, double L) {
  switch (shape) {
    case TrajectoryShape::SquareLoop: {
      const double a = L / 4.0;
      const int side = std::min(3, static_cast<int>(std::floor(s / a)));
      const double u = s - side * a;
      const Vec3 corners[4] = {{-a / 2, -a / 2, 0}, {a / 2, -a / 2, 0}, {a / 2, a / 2, 0}, {-a / 2, a / 2, 0}};
      const double yaw = side * M_PI / 2.0;
      const Vec3 dir(std::cos(yaw), std::sin(yaw), 0.0);
      return Pose::from_yaw(corners[side] + u * dir, yaw);
    }
    case TrajectoryShape::FigureEight: {
      const double r = L / (4.0 * M_PI);
      if (s < L / 2.0) {
        const double phi = s / r;
        return Pose::from_yaw(Vec3(-r + r * std::cos(phi), r * std::sin(phi), 0.0), phi + M_PI / 2.0);
      }
      const double phi = (s - L / 2.0) / r;
      return Pose::from_yaw(Vec3(r - r * std::cos(phi), r * std::sin(phi), 0.0), M_PI / 2.0 - phi);
    }
    case TrajectoryShape::Line:
      return Pose::from_yaw(Vec3(-L / 2.0 + s, 0.0, 0.0), 0.0);
  }
  return Pose::identity();
}

Mat3 sqrt_psd(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(m);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

World generate_world(const WorldSpec& spec) {
  spec.validate();
  World w;
  w.spec = spec;
  const double L = spec.steps * spec.step_length;
  for (int k = 0; k < spec.steps; ++k) {
    w.trajectory.push_back(shape_pose(spec.shape, k * spec.step_length, L));
    w.times.push_back(quantize9(k * spec.dt));
  }

  // Landmark box: the arena, stretched along an axis when the trajectory is longer.
  Vec3 lo(-spec.arena_size / 2, -spec.arena_size / 2, 0.0);
  Vec3 hi(spec.arena_size / 2, spec.arena_size / 2, spec.max_height);
  for (const auto& p : w.trajectory)
    for (int a = 0; a < 2; ++a) {
      lo[a] = std::min(lo[a], p.translation[a] - spec.arena_size / 4);
      hi[a] = std::max(hi[a], p.translation[a] + spec.arena_size / 4);
    }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int id = 0;
  for (int c = 0; c < spec.num_classes(); ++c) {
    for (int n = 0; n < spec.landmarks_per_class[static_cast<std::size_t>(c)]; ++n) {
      bool placed = false;
      for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
        Vec3 p;
        for (int a = 0; a < 3; ++a) p[a] = lo[a] + (hi[a] - lo[a]) * u01(rng);
        placed = std::none_of(w.landmarks.begin(), w.landmarks.end(), [&](const WorldLandmark& o) {
          return (o.position.head<2>() - p.head<2>()).norm() < spec.min_separation;
        });
        if (placed) w.landmarks.push_back({id++, ClassLabel{c}, p});
      }
      if (!placed) throw ParameterError("cannot place landmarks with the requested separation");
    }
  }

  // Express everything in the frame of the first pose so odometry integrates from the identity.
  const Pose origin_inv = w.trajectory.front().inverse();
  for (auto& p : w.trajectory) p = quantize9(origin_inv * p);
  for (auto& lm : w.landmarks) lm.position = (origin_inv * lm.position).unaryExpr([](double v) { return quantize9(v); });
  return w;
}

StepObservation simulate_step(const World& world, int step, const DetectorSpec& det, const OdometrySpec& odo,
                              std::mt19937_64& rng) {
  if (step < 0 || step >= static_cast<int>(world.trajectory.size())) throw ContractError("step outside trajectory");
  const Pose& x = world.trajectory[static_cast<std::size_t>(step)];
  const Pose xinv = x.inverse();
  const double t = world.times[static_cast<std::size_t>(step)];
  const int nc = world.spec.num_classes();
  const Mat3 noise_sqrt = sqrt_psd(det.meas_cov);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double half_fov = det.fov_deg * M_PI / 360.0;

  StepObservation out;
  auto emit = [&](const Vec3& body, int cls, int source) {
    SemanticMeasurement m;
    m.scene_id = step;
    m.time = t;
    m.position = body.unaryExpr([](double v) { return quantize9(v); });
    m.label = ClassLabel{cls};
    out.measurements.push_back(m);
    out.sources.push_back(source);
  };

  for (const auto& lm : world.landmarks) {
    const Vec3 body = xinv * lm.position;
    if (body.norm() > det.range) continue;
    if (det.fov_deg <= 0.0) continue;
    if (det.fov_deg < 360.0 && std::abs(std::atan2(body.y(), body.x())) > half_fov) continue;
    if (u01(rng) < det.p_fn) continue;
    const Vec3 noise = noise_sqrt * Vec3(n01(rng), n01(rng), n01(rng));
    int cls = lm.label.id;
    if (!det.confusion.empty()) {
      const auto& row = det.confusion[static_cast<std::size_t>(cls)];
      std::discrete_distribution<int> pick(row.begin(), row.end());
      cls = pick(rng);
    }
    emit(body + noise, cls, lm.id);
  }

  if (det.lambda_fp > 0.0) {
    std::poisson_distribution<int> count(det.lambda_fp);
    const int n_fp = count(rng);
    const double span = std::min(det.fov_deg, 360.0) * M_PI / 180.0;
    for (int i = 0; i < n_fp; ++i) {
      const double r = det.range * std::sqrt(u01(rng));
      const double a = -span / 2.0 + span * u01(rng);
      const double z = world.spec.max_height * u01(rng) - x.translation.z();
      std::uniform_int_distribution<int> cls(0, nc - 1);
      emit(Vec3(r * std::cos(a), r * std::sin(a), z), cls(rng), -1);
    }
  }

  if (step == 0) {
    out.odometry = Pose::identity();
  } else {
    const Pose truth = world.trajectory[static_cast<std::size_t>(step - 1)].inverse() * x;
    Pose noisy = truth;
    noisy.translation += Vec3(odo.sigma_t * n01(rng), odo.sigma_t * n01(rng), 0.0);
    const double dyaw = odo.sigma_r * n01(rng) + odo.yaw_bias;
    noisy.rotation = (truth.rotation * Eigen::Quaterniond(Eigen::AngleAxisd(dyaw, Vec3::UnitZ()))).normalized();
    out.odometry = quantize9(noisy);
  }
  return out;
}

SimulatedLog simulate(const World& world, const DetectorSpec& det, const OdometrySpec& odo, std::uint64_t run_seed) {
  det.validate(world.spec.num_classes());
  odo.validate();
  std::mt19937_64 rng(run_seed);
  SimulatedLog log;
  for (int k = 0; k < static_cast<int>(world.trajectory.size()); ++k) {
    StepObservation obs = simulate_step(world, k, det, odo, rng);
    log.measurements.insert(log.measurements.end(), obs.measurements.begin(), obs.measurements.end());
    log.sources.insert(log.sources.end(), obs.sources.begin(), obs.sources.end());
    log.odometry_times.push_back(world.times[static_cast<std::size_t>(k)]);
    log.odometry.push_back(obs.odometry);
    log.ground_truth.push_back(world.trajectory[static_cast<std::size_t>(k)]);
  }
  return log;
}

double quantize9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

Pose quantize9(const Pose& p) {
  Pose out;
  out.translation = p.translation.unaryExpr([](double v) { return quantize9(v); });
  Eigen::Quaterniond q = p.rotation.normalized();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  out.rotation = Eigen::Quaterniond(quantize9(q.w()), quantize9(q.x()), quantize9(q.y()), quantize9(q.z())).normalized();
  return out;
}

std::vector<Pose> integrate_odometry(const std::vector<Pose>& increments) {
  std::vector<Pose> out;
  Pose x = Pose::identity();
  for (const auto& d : increments) {
    x = x * d;
    out.push_back(x);
  }
  return out;
}

}  // namespace dpmhm
