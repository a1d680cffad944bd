#include "dpmhm/kdtree.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dpmhm;

TEST(KdIndex, EmptyQuery) {
  KdIndex idx(3);
  const std::vector<double> q{0, 0, 0};
  EXPECT_TRUE(idx.empty());
  EXPECT_TRUE(idx.radius_query(q, 10.0).empty());
}

TEST(KdIndex, RejectsWrongDimension) {
  KdIndex idx(3);
  const std::vector<double> p{1, 2};
  EXPECT_ANY_THROW(idx.insert(p, 0));
}

TEST(KdIndex, BoundaryIsInclusive) {
  KdIndex idx(2);
  idx.insert(std::vector<double>{1, 0}, 7);
  EXPECT_EQ(idx.radius_query(std::vector<double>{0, 0}, 1.0), std::vector<int>{7});
}

// Oracle: linear scan over 1000 random inserts, exact set equality.
TEST(KdIndex, MatchesLinearScan) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int dim : {1, 3, 8}) {
    KdIndex idx(dim);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> p(static_cast<std::size_t>(dim));
      for (auto& v : p) v = u(rng);
      idx.insert(p, i);
      pts.push_back(std::move(p));
    }
    EXPECT_EQ(idx.size(), 1000u);
    for (int q = 0; q < 100; ++q) {
      std::vector<double> query(static_cast<std::size_t>(dim));
      for (auto& v : query) v = u(rng);
      const double r = 0.05 + 0.4 * u(rng);
      std::vector<int> expect;
      for (int i = 0; i < 1000; ++i) {
        double d2 = 0.0;
        for (int k = 0; k < dim; ++k) d2 += std::pow(pts[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] - query[static_cast<std::size_t>(k)], 2);
        if (std::sqrt(d2) <= r) expect.push_back(i);
      }
      EXPECT_EQ(idx.radius_query(query, r), expect);
    }
  }
}
