#include "dpmhm/config.hpp"
#include "dpmhm/pipeline.hpp"
#include "dpmhm/placerec.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

using namespace dpmhm;

namespace {

std::vector<double> random_hist(std::mt19937_64& rng, int dim, double sparsity = 0.3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> h(static_cast<std::size_t>(dim));
  for (double& x : h) x = u(rng) < sparsity ? 0.0 : u(rng);
  if (std::accumulate(h.begin(), h.end(), 0.0) == 0.0) h[0] = 1.0;
  const double s = std::accumulate(h.begin(), h.end(), 0.0);
  for (double& x : h) x /= s;
  return h;
}

SceneDescriptor scene(int id, const std::vector<std::pair<int, Vec3>>& lms, int submap = 0) {
  SceneDescriptor s;
  s.scene_id = id;
  s.submap_id = submap;
  for (const auto& [cls, p] : lms) {
    s.labels.push_back(ClassLabel{cls});
    s.points_body.push_back(p);
    s.points_world.push_back(p);
  }
  return s;
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

RunOutputs run_world(const std::string& file, std::uint64_t seed) {
  RunConfig cfg = load_config(std::string(DPMHM_CONFIG_DIR) + "/" + file);
  cfg.world_seed = seed;
  cfg.run_seed = 1000 + seed;
  return run_pipeline(cfg, simulate_inputs(cfg));
}

}  // namespace

TEST(Jsd, Examples) {
  const std::vector<double> a{0.5, 0.5}, b{1.0, 0.0}, c{0.0, 1.0};
  EXPECT_EQ(jsd(a, a), 0.0);
  EXPECT_NEAR(jsd(b, c), std::log(2.0), 1e-15);
  const double expect = 0.5 * (0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25)) + 0.5 * std::log(1.0 / 0.75);
  EXPECT_NEAR(jsd(a, b), expect, 1e-12);
  EXPECT_NEAR(jsd(a, b), 0.2158, 1e-4);
  EXPECT_THROW(jsd(std::vector<double>{0.5, 0.6}, a), ContractError);
}

TEST(Jsd, SymmetricNonNegativeBounded) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto p = random_hist(rng, 6);
    const auto q = random_hist(rng, 6);
    const double d = jsd(p, q);
    EXPECT_NEAR(d, jsd(q, p), 1e-15);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, std::log(2.0));
    // The prefilter radius must never drop a histogram within the JSD threshold.
    EXPECT_LE(l2(p, q), jsd_prefilter_radius(d) + 1e-12);
  }
}

TEST(QueryCandidates, EmptyIndex) {
  PlaceDatabase db(3);
  const std::vector<double> h{1.0, 0.0, 0.0};
  SceneDescriptor q = scene(100, {});
  q.histogram = h;
  EXPECT_TRUE(query_candidates(db, h, q, QueryThresholds{}).empty());
}

TEST(QueryCandidates, ExactCopyFoundOutsideWindowOnly) {
  PlaceDatabase db(3);
  const std::vector<double> h{0.2, 0.3, 0.5};
  SceneDescriptor stored = scene(5, {});
  stored.histogram = h;
  db.add_submap(0, h, std::vector<SceneDescriptor>{stored});
  SceneDescriptor q = stored;
  q.scene_id = 200;
  q.submap_id = 6;
  const auto found = query_candidates(db, h, q, QueryThresholds{});
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0], (CandidatePair{200, 5, 0}));
  q.scene_id = 30;
  EXPECT_TRUE(query_candidates(db, h, q, QueryThresholds{}).empty());
}

TEST(QueryCandidates, MatchesBruteForceScan) {
  std::mt19937_64 rng(200);
  const int dim = 5;
  PlaceDatabase db(dim);
  std::vector<SceneDescriptor> all;
  for (int sub = 0; sub < 20; ++sub) {
    std::vector<SceneDescriptor> scenes;
    for (int k = 0; k < 10; ++k) {
      SceneDescriptor s = scene(sub * 10 + k, {}, sub);
      s.histogram = random_hist(rng, dim);
      scenes.push_back(s);
      all.push_back(s);
    }
    db.add_submap(sub, random_hist(rng, dim), scenes);
  }
  for (int trial = 0; trial < 50; ++trial) {
    QueryThresholds th{0.05 + 0.01 * trial, 0.1 + 0.02 * trial, trial % 30};
    const auto qsub = random_hist(rng, dim);
    SceneDescriptor q = scene(100 + trial, {});
    q.histogram = random_hist(rng, dim);
    std::vector<CandidatePair> expect;
    for (const auto& s : all) {
      if (jsd(qsub, db.submap_histogram(s.submap_id)) > th.tau_jsd) continue;
      if (l2(q.histogram, s.histogram) > th.r_l2) continue;
      if (std::abs(s.scene_id - q.scene_id) <= th.exclusion_window) continue;
      expect.push_back({q.scene_id, s.scene_id, s.submap_id});
    }
    auto got = query_candidates(db, qsub, q, th);
    auto key = [](const CandidatePair& c) { return std::tie(c.candidate_scene, c.candidate_submap); };
    std::sort(got.begin(), got.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    EXPECT_EQ(got, expect) << "trial " << trial;
  }
}

TEST(Laplacian, Examples) {
  EXPECT_EQ(scene_laplacian(scene(0, {{0, Vec3::Zero()}}), 6.0), Eigen::MatrixXd::Zero(1, 1));
  Eigen::MatrixXd two(2, 2);
  two << 1, -1, -1, 1;
  EXPECT_EQ(scene_laplacian(scene(0, {{0, Vec3::Zero()}, {1, Vec3(1, 0, 0)}}), 6.0), two);
  EXPECT_EQ(scene_laplacian(scene(0, {{0, Vec3::Zero()}, {1, Vec3(10, 0, 0)}}), 6.0), Eigen::MatrixXd::Zero(2, 2));
  EXPECT_THROW(scene_laplacian(scene(0, {}), 6.0), ContractError);
}

TEST(Laplacian, RowsSumToZero) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<int, Vec3>> lms;
    for (int i = 0; i < 1 + trial % 12; ++i) lms.emplace_back(cls(rng), support::random_vec(rng, 4.0));
    const Eigen::MatrixXd l = scene_laplacian(scene(0, lms), 5.0);
    EXPECT_LT(l.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(l, l.transpose());
  }
}

TEST(Ncc, Examples) {
  Eigen::MatrixXd a(2, 2);
  a << 1, -1, -1, 2;
  EXPECT_NEAR(ncc_score(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ncc_score(a, -a), -1.0, 1e-12);
  EXPECT_NEAR(ncc_score(3.0 * a + Eigen::MatrixXd::Constant(2, 2, 7.0), a), 1.0, 1e-12);
  EXPECT_EQ(ncc_score(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)), 1.0);
  EXPECT_EQ(ncc_score(Eigen::MatrixXd::Zero(2, 2), a), 0.0);
}

TEST(Ncc, MatchesDefinitionOnRandomMatrices) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    double a[16], b[16];
    for (int i = 0; i < 16; ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
    }
    double ma = 0, mb = 0;
    for (int i = 0; i < 16; ++i) {
      ma += a[i] / 16;
      mb += b[i] / 16;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < 16; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    const Eigen::MatrixXd ma4 = Eigen::Map<Eigen::Matrix4d>(a);
    const Eigen::MatrixXd mb4 = Eigen::Map<Eigen::Matrix4d>(b);
    EXPECT_NEAR(ncc_score(ma4, mb4), sab / std::sqrt(saa * sbb), 1e-12);
  }
}

TEST(SceneMatch, Examples) {
  const auto a = scene(0, {{0, Vec3::Zero()}, {1, Vec3(3, 0, 0)}, {2, Vec3(0, 3, 0)}});
  EXPECT_NEAR(scene_match(a, a, 0.5, 5.0).score, 3.0, 1e-12);

  const auto x = scene(0, {{0, Vec3::Zero()}});
  const auto y = scene(1, {{1, Vec3::Zero()}});
  EXPECT_NEAR(scene_match(x, y, 0.5, 5.0).score, 0.5, 1e-12);
  // Weighted by distance: coincident points score 1 whatever the class; far ones pay the class penalty.
  EXPECT_NEAR(scene_match(x, y, 0.5, 5.0, SceneTermMode::DistanceWeighted).score, 1.0, 1e-12);

  const auto far = scene(1, {{1, Vec3(100, 0, 0)}});
  const auto m = scene_match(x, far, 0.5, 5.0);
  EXPECT_EQ(m.costs[0], 2.0);
  EXPECT_NEAR(m.score, 1.0, 1e-12);
  EXPECT_NEAR(scene_match(x, far, 0.5, 5.0, SceneTermMode::DistanceWeighted).score, 0.5, 1e-12);

  EXPECT_THROW(scene_match(x, scene(2, {}), 0.5, 5.0), ContractError);
}

TEST(SceneMatch, Symmetric) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> cls(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::pair<int, Vec3>> la, lb;
    for (int i = 0; i < 4; ++i) {
      la.emplace_back(cls(rng), support::random_vec(rng, 3.0));
      lb.emplace_back(cls(rng), support::random_vec(rng, 3.0));
    }
    const auto a = scene(0, la), b = scene(1, lb);
    EXPECT_NEAR(scene_match(a, b, 0.5, 5.0).score, scene_match(b, a, 0.5, 5.0).score, 1e-12);
  }
}

TEST(Bayes, Examples) {
  const BayesBelief prior;
  EXPECT_NEAR(bayes_update(prior, true).p_lc, 8.0 / 9.0, 1e-12);

  BayesBelief flat = prior;
  flat.p_pos_given_lc = flat.p_pos_given_no_lc = 0.4;
  flat.p_lc = 0.3;
  // Prediction still mixes; the observation adds nothing.
  const double predicted = 0.3 * 0.9 + 0.7 * 0.1;
  EXPECT_NEAR(bayes_update(flat, true).p_lc, predicted, 1e-12);
  EXPECT_NEAR(bayes_update(flat, false).p_lc, predicted, 1e-12);
}

TEST(Bayes, NegativesDecreaseMonotonicallyToFixedPoint) {
  BayesBelief b;
  double prev = b.p_lc;
  for (int k = 0; k < 20; ++k) {
    b = bayes_update(b, false);
    EXPECT_LE(b.p_lc, prev + 1e-15);
    prev = b.p_lc;
  }
  const BayesBelief next = bayes_update(b, false);
  EXPECT_NEAR(next.p_lc, b.p_lc, 1e-6);
  EXPECT_GT(b.p_lc, 0.0);
}

TEST(Ransac, ExactTransformRecovered) {
  std::mt19937_64 rng(12);
  const Pose truth = support::random_pose(rng, 5.0);
  std::vector<std::pair<Vec3, Vec3>> pairs;
  for (int i = 0; i < 10; ++i) {
    const Vec3 p = support::random_vec(rng, 4.0);
    pairs.emplace_back(p, truth * p);
  }
  std::mt19937_64 r(1);
  const auto res = ransac_verify(pairs, RansacParams{}, r);
  ASSERT_TRUE(res.has_value());
  EXPECT_EQ(res->inliers.size(), 10u);
  EXPECT_LT((res->transform.translation - truth.translation).norm(), 1e-9);
  EXPECT_LT(res->transform.rotation.angularDistance(truth.rotation), 1e-9);
}

TEST(Ransac, HalfOutliers) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose truth = support::random_pose(rng, 5.0);
    std::vector<std::pair<Vec3, Vec3>> pairs;
    std::set<int> clean;
    for (int i = 0; i < 20; ++i) {
      const Vec3 p = support::random_vec(rng, 4.0);
      if (i % 2 == 0) {
        pairs.emplace_back(p, truth * p);
        clean.insert(i);
      } else {
        Vec3 off = support::random_vec(rng);
        off *= (5.0 + 5.0 * std::abs(off.x())) / off.norm();
        pairs.emplace_back(p, truth * p + off);
      }
    }
    std::mt19937_64 r(static_cast<std::uint64_t>(trial));
    const auto res = ransac_verify(pairs, RansacParams{}, r);
    ASSERT_TRUE(res.has_value());
    EXPECT_EQ(std::set<int>(res->inliers.begin(), res->inliers.end()), clean);
    EXPECT_LT((res->transform.translation - truth.translation).norm(), 1e-6);
  }
}

TEST(Ransac, TooFewPairsRejected) {
  std::vector<std::pair<Vec3, Vec3>> pairs{{Vec3::Zero(), Vec3::Zero()}, {Vec3::UnitX(), Vec3::UnitX()}};
  std::mt19937_64 r(1);
  EXPECT_FALSE(ransac_verify(pairs, RansacParams{}, r).has_value());
}

TEST(Ransac, DeterministicUnderSeed) {
  std::mt19937_64 rng(14);
  std::vector<std::pair<Vec3, Vec3>> pairs;
  for (int i = 0; i < 12; ++i) pairs.emplace_back(support::random_vec(rng, 3.0), support::random_vec(rng, 3.0));
  std::mt19937_64 r1(5), r2(5);
  const auto a = ransac_verify(pairs, RansacParams{200, 2.0, 3}, r1);
  const auto b = ransac_verify(pairs, RansacParams{200, 2.0, 3}, r2);
  ASSERT_EQ(a.has_value(), b.has_value());
  if (a) EXPECT_EQ(a->inliers, b->inliers);
}

TEST(VerifyPair, IdenticalScenesAndInfiniteThreshold) {
  const auto a = scene(0, {{0, Vec3(0, 0, 0)}, {0, Vec3(2, 0, 0)}, {0, Vec3(0, 2, 0)}, {0, Vec3(2, 2, 1)},
                           {0, Vec3(4, 1, 0)}});
  VerifyParams p;
  const auto v = verify_pair(a, a, p);
  EXPECT_NEAR(v.s_ncc, 1.0, 1e-12);
  EXPECT_NEAR(v.s_scene, 5.0, 1e-12);
  p.tau_verify = 5.99;
  EXPECT_TRUE(verify_pair(a, a, p).passed);
  p.tau_verify = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(verify_pair(a, a, p).passed);
}

TEST(VerifyPair, DisjointClassesHandComputed) {
  // Three landmarks each, same geometry, no class in common: each term is 1 - s_match * p.
  const auto a = scene(0, {{0, Vec3(0, 0, 0)}, {1, Vec3(5, 0, 0)}, {2, Vec3(0, 5, 0)}});
  const auto b = scene(1, {{3, Vec3(0, 0, 0)}, {4, Vec3(5, 0, 0)}, {5, Vec3(0, 5, 0)}});
  VerifyParams p;
  const auto v = verify_pair(a, b, p);
  EXPECT_NEAR(v.s_scene, 3.0 * (1.0 - 1.0 * p.penalty), 1e-12);
  EXPECT_NEAR(v.s_ncc, 1.0, 1e-12);
  EXPECT_FALSE(v.passed);
}

TEST(LoopDetection, RecallOnLoopWorldAndNoFalseClosuresOnLine) {
  int detected = 0;
  const int seeds = 10;
  for (int s = 1; s <= seeds; ++s) detected += !run_world("loop_world.cfg", static_cast<std::uint64_t>(s)).loop_closures.empty();
  EXPECT_GE(detected, 9);
  for (int s = 1; s <= seeds; ++s)
    EXPECT_TRUE(run_world("line_world.cfg", static_cast<std::uint64_t>(s)).loop_closures.empty()) << "seed " << s;
}
