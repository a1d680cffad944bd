#include "dpmhm/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

using namespace dpmhm;

namespace {

DetectorSpec perfect() {
  DetectorSpec d;
  d.meas_cov = Mat3::Zero();
  return d;
}

OdometrySpec exact_odometry() {
  OdometrySpec o;
  o.sigma_t = 0.0;
  return o;
}

}  // namespace

TEST(World, DeterministicForSeed) {
  WorldSpec s;
  s.seed = 9;
  const World a = generate_world(s);
  const World b = generate_world(s);
  ASSERT_EQ(a.landmarks.size(), b.landmarks.size());
  for (std::size_t i = 0; i < a.landmarks.size(); ++i) {
    EXPECT_EQ(a.landmarks[i].position, b.landmarks[i].position);
    EXPECT_EQ(a.landmarks[i].label, b.landmarks[i].label);
  }
  s.seed = 10;
  EXPECT_NE(generate_world(s).landmarks[0].position, a.landmarks[0].position);

  const SimulatedLog la = simulate(a, DetectorSpec{}, OdometrySpec{}, 3);
  const SimulatedLog lb = simulate(b, DetectorSpec{}, OdometrySpec{}, 3);
  ASSERT_EQ(la.measurements.size(), lb.measurements.size());
  for (std::size_t i = 0; i < la.measurements.size(); ++i) EXPECT_EQ(la.measurements[i].position, lb.measurements[i].position);
}

TEST(World, SquareLoopCloses) {
  WorldSpec s;
  s.steps = 40;
  s.step_length = 1.0;
  const World w = generate_world(s);
  ASSERT_EQ(w.trajectory.size(), 40u);
  EXPECT_LT((w.trajectory.back().translation - w.trajectory.front().translation).norm(), 1.0 + 1e-9);
}

TEST(World, ClassCountsAndSeparation) {
  WorldSpec s;
  s.landmarks_per_class = {3, 0, 5, 7};
  const World w = generate_world(s);
  std::map<int, int> counts;
  for (const auto& lm : w.landmarks) ++counts[lm.label.id];
  EXPECT_EQ(counts[0], 3);
  EXPECT_EQ(counts[1], 0);
  EXPECT_EQ(counts[2], 5);
  EXPECT_EQ(counts[3], 7);
  for (std::size_t i = 0; i < w.landmarks.size(); ++i)
    for (std::size_t j = i + 1; j < w.landmarks.size(); ++j)
      EXPECT_GE((w.landmarks[i].position - w.landmarks[j].position).head<2>().norm(), s.min_separation - 1e-12);
}

TEST(World, RejectsEmptyConfigurations) {
  WorldSpec s;
  s.landmarks_per_class = {0, 0};
  EXPECT_THROW(generate_world(s), ParameterError);
  s = WorldSpec{};
  s.steps = 0;
  EXPECT_THROW(generate_world(s), ParameterError);
}

TEST(Simulate, NoiselessMeasurementsAreExact) {
  const World w = generate_world(WorldSpec{});
  std::mt19937_64 rng(1);
  for (int step = 0; step < w.spec.steps; step += 7) {
    const StepObservation obs = simulate_step(w, step, perfect(), exact_odometry(), rng);
    ASSERT_FALSE(obs.measurements.empty());
    for (std::size_t i = 0; i < obs.measurements.size(); ++i) {
      const int src = obs.sources[i];
      ASSERT_GE(src, 0);
      const auto& lm = w.landmarks[static_cast<std::size_t>(src)];
      EXPECT_EQ(obs.measurements[i].label, lm.label);
      EXPECT_LT((obs.measurements[i].position - w.trajectory[static_cast<std::size_t>(step)].inverse() * lm.position).norm(),
                1e-7);
      EXPECT_LE(obs.measurements[i].position.norm(), perfect().range + 1e-12);
    }
  }
}

TEST(Simulate, ExactOdometryIntegratesToTruth) {
  const World w = generate_world(WorldSpec{});
  const SimulatedLog log = simulate(w, perfect(), exact_odometry(), 5);
  const auto chain = integrate_odometry(log.odometry);
  ASSERT_EQ(chain.size(), w.trajectory.size());
  for (std::size_t k = 0; k < chain.size(); ++k)
    EXPECT_LT(((w.trajectory.front() * chain[k]).translation - w.trajectory[k].translation).norm(), 1e-9);
}

TEST(Simulate, OneMeasurementPerLandmarkPerStep) {
  const World w = generate_world(WorldSpec{});
  DetectorSpec d;
  d.lambda_fp = 1.0;
  const SimulatedLog log = simulate(w, d, OdometrySpec{}, 8);
  std::map<std::pair<int, int>, int> seen;
  for (std::size_t i = 0; i < log.measurements.size(); ++i)
    if (log.sources[i] >= 0) EXPECT_EQ(++seen[std::make_pair(log.measurements[i].scene_id, log.sources[i])], 1);
}

TEST(Simulate, FalsePositiveRate) {
  const World w = generate_world(WorldSpec{});
  DetectorSpec d;
  d.lambda_fp = 2.0;
  std::mt19937_64 rng(77);
  const int steps = 10000;
  long fps = 0;
  for (int k = 0; k < steps; ++k) {
    const auto obs = simulate_step(w, k % w.spec.steps, d, OdometrySpec{}, rng);
    for (int s : obs.sources) fps += s < 0;
  }
  const double mean = static_cast<double>(fps) / steps;
  EXPECT_NEAR(mean, 2.0, 3.0 * std::sqrt(2.0 / steps));
}

TEST(Simulate, ZeroFieldOfViewSeesNothing) {
  const World w = generate_world(WorldSpec{});
  DetectorSpec d;
  d.fov_deg = 0.0;
  std::mt19937_64 rng(1);
  for (int step = 0; step < w.spec.steps; ++step) EXPECT_TRUE(simulate_step(w, step, d, OdometrySpec{}, rng).measurements.empty());
}

TEST(Simulate, ConfusionMatrixRelabels) {
  WorldSpec s;
  s.landmarks_per_class = {10, 10};
  const World w = generate_world(s);
  DetectorSpec d;
  d.confusion = {{0.0, 1.0}, {1.0, 0.0}};
  std::mt19937_64 rng(2);
  const auto obs = simulate_step(w, 0, d, OdometrySpec{}, rng);
  for (std::size_t i = 0; i < obs.measurements.size(); ++i)
    EXPECT_NE(obs.measurements[i].label, w.landmarks[static_cast<std::size_t>(obs.sources[i])].label);
  d.confusion = {{0.5, 0.6}, {1.0, 0.0}};
  EXPECT_THROW(d.validate(2), ParameterError);
}

TEST(Quantize, NineSignificantDigits) {
  EXPECT_EQ(quantize9(1.0), 1.0);
  EXPECT_EQ(quantize9(0.1234567891234), 0.123456789);
  EXPECT_EQ(quantize9(quantize9(M_PI)), quantize9(M_PI));
}
