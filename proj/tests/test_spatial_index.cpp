#include "eelabel/spatial_index.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace eelabel {
namespace {

TEST(SpatialIndex, SinglePoint) {
  const std::vector<Vec3> pts{{1, 2, 3}};
  const SpatialIndex index(pts);
  const auto nn = index.knn({0, 0, 0}, 1);
  ASSERT_EQ(nn.size(), 1u);
  EXPECT_EQ(nn[0].id, 0u);
  EXPECT_EQ(index.nearest({5, 5, 5}).id, 0u);
}

TEST(SpatialIndex, GridRadiusBelowSpacing) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 10; ++k) pts.emplace_back(i, j, k);
  const SpatialIndex index(pts);
  const auto hits = index.radius({3, 4, 5}, 0.5);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(pts[hits[0].id], Vec3(3, 4, 5));
}

TEST(SpatialIndex, EmptyIndexErrors) {
  const SpatialIndex index;
  try {
    index.knn({0, 0, 0}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyIndex);
  }
  EXPECT_THROW(index.radius({0, 0, 0}, 1.0), Error);
}

TEST(SpatialIndex, MatchesBruteForceOnRandomQueries) {
  CounterRng rng(21);
  const auto pts = testing::random_points(rng, 5000);
  const SpatialIndex index(pts);
  for (int q = 0; q < 100; ++q) {
    const Vec3 query = testing::random_point(rng, -1.2, 1.2);
    const auto got = index.knn(query, 10);
    const auto want = testing::brute_knn(pts, query, 10);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].id, want[i].id);
    EXPECT_EQ(index.nearest(query).id, want[0].id);
    std::vector<std::size_t> rad;
    for (const auto& n : index.radius(query, 0.2)) rad.push_back(n.id);
    EXPECT_EQ(rad, testing::brute_radius(pts, query, 0.2));
  }
}

// Property: on 100 random clouds (varying size, duplicates, degenerate
// layouts) every query agrees with a linear scan.
TEST(SpatialIndex, PropertyBruteForceEquivalence) {
  CounterRng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(400);
    auto pts = testing::random_points(rng, n);
    if (trial % 5 == 0)  // duplicates exercise the tie-break
      for (std::size_t i = 1; i < n; i += 3) pts[i] = pts[i - 1];
    if (trial % 7 == 0)  // planar cloud
      for (auto& p : pts) p.z() = 0.0;
    const SpatialIndex index(pts);
    for (int q = 0; q < 5; ++q) {
      const Vec3 query = rng.uniform() < 0.3 ? pts[rng.below(n)] : testing::random_point(rng);
      const std::size_t k = 1 + rng.below(20);
      const auto got = index.knn(query, k);
      const auto want = testing::brute_knn(pts, query, k);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i].id, want[i].id) << "trial " << trial;
      const double r = rng.uniform(0.01, 0.8);
      std::vector<std::size_t> rad;
      for (const auto& nb : index.radius(query, r)) rad.push_back(nb.id);
      ASSERT_EQ(rad, testing::brute_radius(pts, query, r));
    }
  }
}

}  // namespace
}  // namespace eelabel
