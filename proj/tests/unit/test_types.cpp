#include "dpmhm/types.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace dpmhm;

namespace {

struct Tagged {
  ClassLabel label;
};

}  // namespace

TEST(Histogram, EmptyInput) {
  const ClassHistogram h = histogram_of(std::vector<Tagged>{});
  EXPECT_TRUE(h.counts.empty());
  EXPECT_EQ(h.total, 0);
  for (double v : h.normalized(3)) EXPECT_EQ(v, 0.0);
}

TEST(Histogram, CountsAndNormalizes) {
  const ClassLabel tree{0}, pole{1};
  const ClassHistogram h = histogram_of(std::vector<Tagged>{{tree}, {tree}, {pole}});
  EXPECT_EQ(h.count(tree), 2);
  EXPECT_EQ(h.count(pole), 1);
  EXPECT_EQ(h.total, 3);
  const auto n = h.normalized(2);
  EXPECT_DOUBLE_EQ(n[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(n[1], 1.0 / 3.0);
}

TEST(Histogram, NormalizedSumsToOne) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> cls(0, 9);
  std::uniform_int_distribution<int> len(1, 200);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Tagged> items(static_cast<std::size_t>(len(rng)));
    for (auto& it : items) it.label = ClassLabel{cls(rng)};
    const auto n = histogram_of(items).normalized(10);
    EXPECT_NEAR(std::accumulate(n.begin(), n.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Histogram, RejectsIdOutsideDimension) {
  ClassHistogram h;
  h.add(ClassLabel{5});
  EXPECT_THROW((void)h.normalized(3), ContractError);
}

TEST(ClassRegistry, DenseStableIds) {
  ClassRegistry reg;
  const ClassLabel a = reg.intern("tree");
  const ClassLabel b = reg.intern("pole");
  EXPECT_EQ(a.id, 0);
  EXPECT_EQ(b.id, 1);
  EXPECT_EQ(reg.intern("tree"), a);
  EXPECT_EQ(reg.name(b), "pole");
  EXPECT_EQ(reg.size(), 2);
  EXPECT_THROW((void)reg.name(ClassLabel{7}), ContractError);
}

TEST(Pose, InverseAndComposition) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const Pose a = support::random_pose(rng);
    const Pose b = support::random_pose(rng);
    const Vec3 p = support::random_vec(rng);
    const Pose id = a * a.inverse();
    EXPECT_LT(id.translation.norm(), 1e-12);
    EXPECT_NEAR(std::abs(id.rotation.w()), 1.0, 1e-12);
    EXPECT_LT(((a * b) * p - a * (b * p)).norm(), 1e-12);
    EXPECT_NEAR((a * b).rotation.norm(), 1.0, 1e-9);
  }
}

TEST(Pose, YawRoundTrip) {
  for (double yaw : {-3.0, -1.0, 0.0, 0.5, 2.5}) EXPECT_NEAR(Pose::from_yaw(Vec3::Zero(), yaw).yaw(), yaw, 1e-12);
}

TEST(SO3, ExpLogRoundTrip) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    Vec3 phi = support::random_vec(rng);
    if (phi.norm() > 3.0) phi *= 3.0 / phi.norm();
    EXPECT_LT((so3_log(so3_exp(phi)) - phi).norm(), 1e-9);
  }
  EXPECT_LT(so3_log(Mat3::Identity()).norm(), 1e-15);
  EXPECT_LT((so3_exp(Vec3(1e-10, 0, 0)) - Mat3::Identity()).norm(), 1e-9);
}

TEST(SO3, RetractMovesAlongBodyAxes) {
  const Pose x = Pose::from_yaw(Vec3(1, 2, 3), M_PI / 2);
  Vec6 d = Vec6::Zero();
  d(0) = 1.0;
  const Pose y = retract(x, d);
  EXPECT_LT((y.translation - Vec3(1, 3, 3)).norm(), 1e-12);
  EXPECT_NEAR(y.rotation.norm(), 1.0, 1e-12);
}

TEST(Spd, ProjectionClampsEigenvalues) {
  Mat3 m = Mat3::Zero();
  m.diagonal() << 2.0, -1.0, 0.0;
  EXPECT_FALSE(is_spd(m));
  const Mat3 p = project_spd(m, 1e-6);
  EXPECT_TRUE(is_spd(p));
  EXPECT_NEAR(p(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(p(1, 1), 1e-6, 1e-15);
}
