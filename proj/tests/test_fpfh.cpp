#include "eelabel/cloud_ops.hpp"
#include "eelabel/fpfh.hpp"
#include "fpfh_oracle.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace eelabel {
namespace {

PointCloud random_oriented_cloud(CounterRng& rng, std::size_t n) {
  PointCloud c;
  c.positions = testing::random_points(rng, n, 0.0, 0.1);
  for (std::size_t i = 0; i < n; ++i) c.normals.push_back(testing::random_point(rng).normalized());
  return c;
}

TEST(Fpfh, IsolatedPointIsZero) {
  PointCloud c;
  c.positions = {{0, 0, 0}, {1, 0, 0}};
  c.normals = {Vec3::UnitZ(), Vec3::UnitZ()};
  const auto d = compute_fpfh(c, 0.1);
  for (const auto& desc : d)
    for (double b : desc) EXPECT_EQ(b, 0.0);
}

TEST(Fpfh, BlocksSumToHundred) {
  CounterRng rng(1);
  const PointCloud c = random_oriented_cloud(rng, 200);
  for (const auto& d : compute_fpfh(c, 0.03)) {
    for (int block = 0; block < 3; ++block) {
      double s = 0.0;
      for (int b = 0; b < kFpfhBinsPerFeature; ++b) {
        EXPECT_GE(d[static_cast<std::size_t>(block * kFpfhBinsPerFeature + b)], 0.0);
        s += d[static_cast<std::size_t>(block * kFpfhBinsPerFeature + b)];
      }
      if (s != 0.0) {
        EXPECT_NEAR(s, 100.0, 1e-6);
      }
    }
  }
}

TEST(Fpfh, PlaneInteriorDescriptorsAgree) {
  PointCloud c;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) {
      c.positions.emplace_back(0.005 * i, 0.005 * j, 0.0);
      c.normals.push_back(Vec3::UnitZ());
    }
  const double radius = 0.02;
  const auto d = compute_fpfh(c, radius);
  std::vector<std::size_t> interior;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const Vec3& p = c.positions[k];
    if (p.x() > 2 * radius && p.x() < 0.145 - 2 * radius && p.y() > 2 * radius && p.y() < 0.145 - 2 * radius)
      interior.push_back(k);
  }
  ASSERT_GT(interior.size(), 10u);
  for (std::size_t a : interior) {
    double l1 = 0.0;
    for (int b = 0; b < kFpfhSize; ++b)
      l1 += std::abs(d[a][static_cast<std::size_t>(b)] - d[interior[0]][static_cast<std::size_t>(b)]);
    EXPECT_LT(l1, 1.0);
  }
}

TEST(Fpfh, MatchesBruteForceOracle) {
  CounterRng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud c = random_oriented_cloud(rng, 40);
    const double radius = 0.05;
    const auto got = compute_fpfh(c, radius);
    const auto want = oracle::fpfh(c, radius);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      for (std::size_t b = 0; b < 33; ++b) ASSERT_NEAR(got[i][b], want[i][b], 1e-6) << "point " << i << " bin " << b;
  }
}

TEST(Fpfh, RigidMotionInvariant) {
  CounterRng rng(3);
  const TriangleMesh m = make_gripper_mesh();
  PointCloud c = estimate_normals_outward(voxel_downsample(sample_uniform(m, 5000, 3), 0.005), 30);
  const auto t = testing::random_transform(rng, 0.5);
  const auto a = compute_fpfh(c, 0.025);
  const auto b = compute_fpfh(transformed(c, t), 0.025);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::sqrt(descriptor_distance2(a[i], b[i])));
  EXPECT_LT(worst, 1e-6);
}

TEST(Fpfh, RequiresNormals) {
  PointCloud c;
  c.positions = {{0, 0, 0}};
  try {
    compute_fpfh(c, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingAttribute);
  }
}

}  // namespace
}  // namespace eelabel
