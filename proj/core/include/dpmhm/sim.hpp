#pragma once

#include "dpmhm/types.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dpmhm {

enum class TrajectoryShape { SquareLoop, FigureEight, Line };

TrajectoryShape parse_trajectory_shape(const std::string& s);
std::string to_string(TrajectoryShape s);

struct WorldSpec {
  std::uint64_t seed = 1;
  /// Side of the square arena centred on the origin (m).
  double arena_size = 40.0;
  /// Landmark count for each class id 0..n-1.
  std::vector<int> landmarks_per_class = std::vector<int>(8, 8);
  TrajectoryShape shape = TrajectoryShape::SquareLoop;
  int steps = 120;
  double step_length = 1.0;
  /// Minimum planar distance between any two landmarks.
  double min_separation = 1.5;
  /// Landmark heights are uniform in [0, max_height].
  double max_height = 3.0;
  double dt = 0.1;

  void validate() const;
  [[nodiscard]] int num_classes() const { return static_cast<int>(landmarks_per_class.size()); }
};

struct DetectorSpec {
  double range = 12.0;
  double fov_deg = 360.0;
  double p_fn = 0.0;
  /// Mean false positives per step.
  double lambda_fp = 0.0;
  /// Row-stochastic confusion matrix; empty means identity.
  std::vector<std::vector<double>> confusion;
  Mat3 meas_cov = 0.04 * Mat3::Identity();

  void validate(int num_classes) const;
};

struct OdometrySpec {
  double sigma_t = 0.02;
  double sigma_r = 0.0;
  /// Constant yaw error added to every increment (rad).
  double yaw_bias = 0.0;

  void validate() const;
};

struct WorldLandmark {
  int id = 0;
  ClassLabel label;
  Vec3 position = Vec3::Zero();
};

struct World {
  WorldSpec spec;
  std::vector<WorldLandmark> landmarks;
  std::vector<Pose> trajectory;
  std::vector<double> times;
};

World generate_world(const WorldSpec& spec);

struct StepObservation {
  /// Positions in the sensor frame of the true pose.
  std::vector<SemanticMeasurement> measurements;
  /// Source landmark id per measurement, -1 for false positives.
  std::vector<int> sources;
  /// Noisy increment from the previous pose; identity at step 0.
  Pose odometry;
};

StepObservation simulate_step(const World& world, int step, const DetectorSpec& det, const OdometrySpec& odo,
                              std::mt19937_64& rng);

struct SimulatedLog {
  std::vector<SemanticMeasurement> measurements;
  std::vector<int> sources;
  std::vector<double> odometry_times;
  std::vector<Pose> odometry;
  std::vector<Pose> ground_truth;
};

/// Runs simulate_step over the whole trajectory with an RNG seeded by `run_seed`.
SimulatedLog simulate(const World& world, const DetectorSpec& det, const OdometrySpec& odo, std::uint64_t run_seed);

/// Round to the 9 significant digits used by the log files.
double quantize9(double v);
Pose quantize9(const Pose& p);

/// Compose odometry increments starting from the identity.
std::vector<Pose> integrate_odometry(const std::vector<Pose>& increments);

}  // namespace dpmhm
