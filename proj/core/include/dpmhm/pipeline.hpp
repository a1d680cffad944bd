#pragma once

#include "dpmhm/config.hpp"
#include "dpmhm/log_io.hpp"

#include <span>
#include <vector>

namespace dpmhm {

struct RunInputs {
  /// Sensor-frame detections, grouped by scene id = odometry row index.
  std::vector<SemanticMeasurement> measurements;
  /// One relative increment per scene; the first is applied to the identity.
  std::vector<TimedPose> odometry;
  /// Optional; enables the per-frame RMSE column.
  std::vector<TimedPose> ground_truth;
};

struct RunOutputs {
  std::vector<TimedPose> trajectory;
  std::vector<Landmark> map;
  std::vector<MetricsRow> metrics;
  std::vector<LoopClosure> loop_closures;
  double mean_hypotheses = 0.0;
  /// NaN without ground truth.
  double final_rmse = 0.0;
  double odometry_rmse = 0.0;
  int submaps = 0;
  int gated_checks = 0;
};

/// Sequential pipeline over scenes: association and hypothesis maintenance per scene,
/// then on each completed submap fusion, graph factors, gating, loop search and optimization.
/// Throws ContractError on inconsistent logs.
RunOutputs run_pipeline(const RunConfig& cfg, const RunInputs& inputs);

/// World, logs and ground truth for the simulation block of `cfg`, quantized as written to disk.
RunInputs simulate_inputs(const RunConfig& cfg);

struct EvalReport {
  double rmse = 0.0;
  double error_std = 0.0;
  std::vector<double> errors;
};

/// Per-pose translation errors. Throws ContractError on length or timestamp mismatch.
EvalReport evaluate_trajectory(std::span<const TimedPose> estimate, std::span<const TimedPose> ground_truth);

/// 100 * (1 - corrected / raw).
double drift_reduction_percent(double raw_rmse, double corrected_rmse);

/// Pose chain obtained by composing the increments.
std::vector<TimedPose> dead_reckoning(std::span<const TimedPose> odometry);

}  // namespace dpmhm
