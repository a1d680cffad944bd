#include "dpmhm/graph.hpp"
#include "dpmhm/hungarian.hpp"
#include "dpmhm/kdtree.hpp"
#include "dpmhm/mht.hpp"
#include "test_support.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace dpmhm;

static void BM_LinearAssignment(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  Eigen::MatrixXd cost(n, 2 * n);
  for (int i = 0; i < cost.size(); ++i) cost.data()[i] = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(solve_linear_assignment(cost));
}
BENCHMARK(BM_LinearAssignment)->Arg(4)->Arg(16)->Arg(64);

static void BM_KdRadiusQuery(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  KdIndex index(8);
  std::vector<double> p(8);
  for (int i = 0; i < n; ++i) {
    for (auto& x : p) x = u(rng);
    index.insert(p, i);
  }
  for (auto _ : state) {
    for (auto& x : p) x = u(rng);
    benchmark::DoNotOptimize(index.radius_query(p, 0.3));
  }
}
BENCHMARK(BM_KdRadiusQuery)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_Resample(benchmark::State& state) {
  std::vector<double> w(static_cast<std::size_t>(state.range(0)), 0.01);
  w[0] = 1.0;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    state.PauseTiming();
    auto tree = support::weighted_tree(w, ++seed);
    state.ResumeTiming();
    benchmark::DoNotOptimize(tree.resample(ResampleParams{}));
  }
}
BENCHMARK(BM_Resample)->Arg(8)->Arg(20);

static void BM_OptimizeChain(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  GraphState g;
  Mat6 info = Mat6::Identity() * 100.0;
  g.poses[0] = Pose{};
  g.factors.push_back(Factor::prior(0, Pose{}, info));
  Pose est;
  for (int k = 1; k < n; ++k) {
    const Pose step = Pose::from_yaw(Vec3(1, 0, 0), 0.05) * support::random_pose(rng, 0.02, 0.005);
    g.factors.push_back(Factor::odometry(k - 1, k, step, info));
    est = est * step;
    g.poses[k] = est;
  }
  g.factors.push_back(Factor::loop(0, n - 1, Pose{}, info, RobustKernel::make_cauchy(1.0)));
  for (auto _ : state) benchmark::DoNotOptimize(optimize(g));
}
BENCHMARK(BM_OptimizeChain)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
