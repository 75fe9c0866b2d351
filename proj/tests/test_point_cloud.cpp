#include "eelabel/cloud_ops.hpp"
#include "eelabel/ply.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <tuple>

namespace eelabel {
namespace {

PointCloud colored(std::vector<Vec3> pts, const Vec3& color) {
  PointCloud c;
  c.positions = std::move(pts);
  c.colors.assign(c.positions.size(), color);
  return c;
}

TEST(Merge, EmptyAndSingle) {
  EXPECT_TRUE(merge({PointCloud{}, PointCloud{}}).empty());
  const PointCloud a = colored({{1, 2, 3}, {4, 5, 6}}, {0.5, 0.5, 0.5});
  const PointCloud m = merge({a});
  EXPECT_EQ(m.positions, a.positions);
  EXPECT_EQ(m.colors, a.colors);
}

TEST(Merge, ConcatenatesInOrderAndPreservesMass) {
  CounterRng rng(1);
  std::vector<PointCloud> clouds;
  for (int i = 0; i < 3; ++i) clouds.push_back(colored(testing::random_points(rng, 10 + i), Vec3::Constant(0.1 * i)));
  const PointCloud m = merge(clouds);
  EXPECT_EQ(m.size(), 10u + 11u + 12u);
  Vec3 mass = Vec3::Zero(), merged_mass = Vec3::Zero();
  for (const auto& c : clouds)
    for (const auto& p : c.positions) mass += p;
  for (const auto& p : m.positions) merged_mass += p;
  EXPECT_LT((mass - merged_mass).norm(), 1e-12);
  EXPECT_EQ(m.positions[10], clouds[1].positions[0]);
  // Associativity up to order.
  const PointCloud left = merge({merge({clouds[0], clouds[1]}), clouds[2]});
  const PointCloud right = merge({clouds[0], merge({clouds[1], clouds[2]})});
  EXPECT_EQ(left.positions, right.positions);
}

TEST(Merge, AttributeMismatchThrows) {
  PointCloud a = colored({{0, 0, 0}}, {1, 0, 0});
  PointCloud b;
  b.positions = {{1, 1, 1}};
  try {
    merge({a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAttributeMismatch);
  }
  EXPECT_NO_THROW(merge({a, PointCloud{}}));
}

TEST(VoxelDownsample, SingleVoxelGivesCentroid) {
  PointCloud c = colored({{0.01, 0.01, 0.01}, {0.03, 0.01, 0.01}, {0.02, 0.04, 0.01}}, {0.3, 0.6, 0.9});
  const PointCloud d = voxel_downsample(c, 0.1);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_LT((d.positions[0] - Vec3(0.02, 0.02, 0.01)).norm(), 1e-15);
  EXPECT_LT((d.colors[0] - Vec3(0.3, 0.6, 0.9)).norm(), 1e-15);
}

TEST(VoxelDownsample, SeparatePointsUnchanged) {
  PointCloud c;
  c.positions = {{0, 0, 0}, {1, 0, 0}};
  const PointCloud d = voxel_downsample(c, 0.5);
  EXPECT_EQ(d.positions, c.positions);
}

TEST(VoxelDownsample, RejectsNonPositiveVoxel) {
  PointCloud c;
  c.positions = {{0, 0, 0}};
  EXPECT_THROW(voxel_downsample(c, 0.0), Error);
  EXPECT_THROW(voxel_downsample(c, -1.0), Error);
}

TEST(VoxelDownsample, MatchesBruteForceBinning) {
  CounterRng rng(2);
  PointCloud c;
  c.positions = testing::random_points(rng, 10000, 0.0, 1.0);
  const double voxel = 0.1;
  const PointCloud d = voxel_downsample(c, voxel);
  // Oracle: ordered map of integer voxel coordinates to member sums.
  std::map<std::tuple<long, long, long>, std::pair<Vec3, int>> bins;
  for (const auto& p : c.positions) {
    auto& b = bins[{static_cast<long>(std::floor(p.x() / voxel)), static_cast<long>(std::floor(p.y() / voxel)),
                    static_cast<long>(std::floor(p.z() / voxel))}];
    if (b.second == 0) b.first = Vec3::Zero();
    b.first += p;
    ++b.second;
  }
  EXPECT_LE(d.size(), 1000u);
  EXPECT_EQ(d.size(), bins.size());
  const double half_diag = std::sqrt(3.0) * voxel / 2.0;
  for (const auto& q : d.positions) {
    const auto key = std::make_tuple(static_cast<long>(std::floor(q.x() / voxel)),
                                     static_cast<long>(std::floor(q.y() / voxel)),
                                     static_cast<long>(std::floor(q.z() / voxel)));
    ASSERT_TRUE(bins.count(key));
    EXPECT_LT((q - bins[key].first / bins[key].second).norm(), 1e-12);
    double nearest = 1e9;
    for (const auto& p : c.positions) nearest = std::min(nearest, (p - q).norm());
    EXPECT_LE(nearest, half_diag);
  }
}

TEST(VoxelDownsample, IdempotentWhenOnePointPerVoxel) {
  CounterRng rng(3);
  PointCloud c;
  c.positions = testing::random_points(rng, 2000, 0.0, 1.0);
  const PointCloud once = voxel_downsample(c, 0.05);
  const PointCloud twice = voxel_downsample(once, 0.05);
  EXPECT_EQ(once.positions, twice.positions);
}

TEST(VoxelDownsample, AveragesAndRenormalizesNormals) {
  PointCloud c;
  c.positions = {{0.01, 0, 0}, {0.02, 0, 0}};
  c.normals = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
  const PointCloud d = voxel_downsample(c, 1.0);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d.normals[0].norm(), 1.0, 1e-12);
  EXPECT_LT((d.normals[0] - Vec3(1, 1, 0).normalized()).norm(), 1e-12);
}

TEST(EstimateNormals, PlaneFacingViewpoint) {
  PointCloud c;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) c.positions.emplace_back(0.01 * i, 0.01 * j, 0.0);
  const PointCloud n = estimate_normals(c, 30, {0, 0, 1});
  for (const auto& v : n.normals) EXPECT_LT((v - Vec3(0, 0, 1)).norm(), 1e-6);
}

TEST(EstimateNormals, SphereNormalsPointAtInteriorViewpoint) {
  CounterRng rng(4);
  PointCloud c;
  for (int i = 0; i < 2000; ++i) c.positions.push_back(testing::random_point(rng).normalized());
  const PointCloud n = estimate_normals(c, 30, Vec3::Zero());
  for (std::size_t i = 0; i < n.size(); ++i) {
    EXPECT_NEAR(n.normals[i].norm(), 1.0, 1e-6);
    EXPECT_LT(n.normals[i].dot(n.positions[i]), -0.95);
  }
}

TEST(EstimateNormals, NoisyPlaneWithinFiveDegrees) {
  CounterRng rng(5);
  PointCloud c;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) c.positions.emplace_back(0.01 * i, 0.01 * j, 0.001 * rng.normal());
  const PointCloud n = estimate_normals(c, 30, {0.2, 0.2, 1.0});
  for (const auto& v : n.normals) EXPECT_GT(v.dot(Vec3::UnitZ()), std::cos(5.0 * testing::kDeg));
}

TEST(EstimateNormals, InsufficientPoints) {
  PointCloud c;
  c.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  try {
    estimate_normals(c, 30, Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientPoints);
  }
}

TEST(Ply, BinaryAndAsciiRoundTrip) {
  CounterRng rng(6);
  PointCloud c;
  c.positions = testing::random_points(rng, 50);
  for (std::size_t i = 0; i < c.size(); ++i) {
    c.colors.emplace_back((i % 256) / 255.0, 0.5, 1.0);
    c.normals.push_back(testing::random_point(rng).normalized());
  }
  const auto dir = std::filesystem::temp_directory_path() / "eelabel_ply_test";
  std::filesystem::create_directories(dir);
  for (bool binary : {true, false}) {
    const auto path = dir / (binary ? "b.ply" : "a.ply");
    write_ply(path, c, binary);
    const PlyData back = read_ply(path);
    ASSERT_EQ(back.cloud.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_LT((back.cloud.positions[i] - c.positions[i]).norm(), 1e-6);
      EXPECT_LT((back.cloud.normals[i] - c.normals[i]).norm(), 1e-6);
      EXPECT_LT((back.cloud.colors[i] - c.colors[i]).norm(), 0.5 / 255.0 * std::sqrt(3.0));
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(Ply, TruncatedBinaryIsParseError) {
  const auto path = std::filesystem::temp_directory_path() / "eelabel_trunc.ply";
  {
    std::ofstream out(path, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
           "property float z\nend_header\n";
    const float f[4] = {1, 2, 3, 4};
    out.write(reinterpret_cast<const char*>(f), sizeof f);
  }
  try {
    read_ply(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace eelabel
