#include "eelabel/global_registration.hpp"
#include "eelabel/mesh.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace eelabel {
namespace {

using testing::kDeg;

const RegistrationConfig kCfg = RegistrationConfig::for_voxel(0.005);

PointCloud gripper_cloud(std::size_t n = 5000, std::uint64_t seed = 1) {
  return sample_uniform(make_gripper_mesh(), n, seed);
}

double translation_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation - b.translation).norm();
}

TEST(Ransac, IdentityOnCopy) {
  const PointCloud model = gripper_cloud();
  const FeatureCloud f = compute_feature_cloud(model, kCfg);
  RansacParams p = kCfg.ransac;
  p.inlier_distance = 0.02;
  const auto r = ransac_register(f.downsampled, f.downsampled, f.features, f.features, p);
  EXPECT_DOUBLE_EQ(r.fitness, 1.0);
  EXPECT_LT(translation_error(r.transform, RigidTransform::identity()), p.inlier_distance);
  EXPECT_GE(r.inlier_rmse, 0.0);
}

TEST(Ransac, RecoversKnownTransformOnFullCloud) {
  const PointCloud model = with_normals_if_possible(gripper_cloud(), 30);
  const auto truth = testing::make_pose(Vec3(1, 2, 3), 70 * kDeg, {0.1, -0.2, 0.5});
  const PointCloud target = transformed(model, truth);
  const auto fs = compute_fpfh(model, kCfg.fpfh_radius);
  const auto ft = compute_fpfh(target, kCfg.fpfh_radius);
  const auto r = ransac_register(model, target, fs, ft, kCfg.ransac);
  EXPECT_LT(translation_error(r.transform, truth), 2 * kCfg.ransac.inlier_distance);
  EXPECT_LT(rotation_geodesic(r.transform, truth), 5 * kDeg);
  EXPECT_GT(r.fitness, 0.9);
}

TEST(Ransac, ClutterTargetFailsQualityGate) {
  CounterRng rng(3);
  const PointCloud model = gripper_cloud();
  const FeatureCloud fm = compute_feature_cloud(model, kCfg);
  // Sparse random points spread over a large volume: no shared structure.
  PointCloud clutter;
  clutter.positions = testing::random_points(rng, 3000, -0.5, 0.5);
  const FeatureCloud fc = compute_feature_cloud(clutter, kCfg);
  RansacParams p = kCfg.ransac;
  p.max_iterations = 20000;
  const auto r = ransac_register(fm.downsampled, fc.downsampled, fm.features, fc.features, p);
  EXPECT_LT(r.fitness, 0.3);
}

TEST(Ransac, SeedDeterminism) {
  const PointCloud model = gripper_cloud();
  const auto truth = testing::make_pose(Vec3(0, 1, 1), 40 * kDeg, {0.05, 0, 0.3});
  const FeatureCloud fm = compute_feature_cloud(model, kCfg);
  const FeatureCloud ft = compute_feature_cloud(transformed(model, truth), kCfg);
  const auto a = ransac_register(fm.downsampled, ft.downsampled, fm.features, ft.features, kCfg.ransac);
  const auto b = ransac_register(fm.downsampled, ft.downsampled, fm.features, ft.features, kCfg.ransac);
  EXPECT_EQ(a.transform.rotation, b.transform.rotation);
  EXPECT_EQ(a.transform.translation, b.transform.translation);
  EXPECT_EQ(a.fitness, b.fitness);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Ransac, TooFewPoints) {
  PointCloud tiny;
  tiny.positions = {{0, 0, 0}, {1, 0, 0}};
  std::vector<FpfhDescriptor> d(2);
  try {
    ransac_register(tiny, tiny, d, d, RansacParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientPoints);
  }
}

TEST(RansacRequiredIterations, Bounds) {
  EXPECT_EQ(ransac_required_iterations(1.0, 3, 0.999), 0.0);
  EXPECT_TRUE(std::isinf(ransac_required_iterations(0.0, 3, 0.999)));
  EXPECT_NEAR(ransac_required_iterations(0.5, 3, 0.999), std::log(0.001) / std::log(1 - 0.125), 1e-12);
}

TEST(Icp, GroundTruthIsFixedPoint) {
  const PointCloud model = gripper_cloud();
  const auto truth = testing::make_pose(Vec3(1, 0, 0), 30 * kDeg, {0.1, 0.2, 0.3});
  const PointCloud target = with_normals_if_possible(transformed(model, truth), 30);
  for (auto variant : {IcpVariant::kPointToPoint, IcpVariant::kPointToPlane}) {
    IcpParams p = kCfg.icp;
    p.variant = variant;
    const auto r = icp_refine(model, target, truth, p);
    EXPECT_LT((r.transform.rotation - truth.rotation).norm(), 1e-10);
    EXPECT_LT(translation_error(r.transform, truth), 1e-10);
    EXPECT_LT(r.inlier_rmse, 1e-10);
    EXPECT_DOUBLE_EQ(r.fitness, 1.0);
    EXPECT_TRUE(r.converged);
  }
}

TEST(Icp, ConvergesFromSmallPerturbation) {
  const PointCloud model = gripper_cloud();
  const auto truth = testing::make_pose(Vec3(0, 0, 1), 20 * kDeg, {0.0, 0.1, 0.4});
  const PointCloud target = with_normals_if_possible(transformed(model, truth), 30);
  CounterRng rng(5);
  for (auto variant : {IcpVariant::kPointToPoint, IcpVariant::kPointToPlane}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Vec3 axis = testing::random_point(rng).normalized();
      const Vec3 shift = testing::random_point(rng).normalized() * 0.01;
      RigidTransform init = compose(testing::make_pose(axis, 5 * kDeg, shift), truth);
      IcpParams p = kCfg.icp;
      p.variant = variant;
      p.max_iterations = 100;
      const auto r = icp_refine(model, target, init, p);
      EXPECT_LT(translation_error(r.transform, truth), 1e-4);
      EXPECT_LT(rotation_geodesic(r.transform, truth), 0.1 * kDeg);
    }
  }
}

TEST(Icp, FlippedInitOnAsymmetricModelIsFlagged) {
  const PointCloud model = sample_uniform(testing::make_asymmetric_mesh(), 5000, 2);
  const auto truth = testing::make_pose(Vec3(0, 1, 0), 10 * kDeg, {0, 0, 0.5});
  const PointCloud target = with_normals_if_possible(transformed(model, truth), 30);
  const RigidTransform init = compose(truth, rotation_about(Vec3(1, 1, 0), std::numbers::pi));
  IcpParams p = kCfg.icp;
  p.max_correspondence_distance = 0.001;
  const auto r = icp_refine(model, target, init, p);
  EXPECT_LT(r.fitness, p.min_fitness) << r.fitness;
  EXPECT_FALSE(r.converged);
  EXPECT_GT(rotation_geodesic(r.transform, truth), 90 * kDeg);
}

TEST(Icp, NoCorrespondencesGivesZeroFitness) {
  const PointCloud model = gripper_cloud(500);
  const PointCloud far = transformed(model, RigidTransform::from_translation({10, 0, 0}));
  const auto r = icp_refine(model, far, RigidTransform::identity(), kCfg.icp);
  EXPECT_EQ(r.fitness, 0.0);
  EXPECT_EQ(r.inlier_rmse, 0.0);
  EXPECT_FALSE(r.converged);
}

TEST(Icp, InlierRmseNeverIncreasesBetweenAcceptedIterations) {
  CounterRng rng(6);
  const PointCloud model = gripper_cloud();
  for (int trial = 0; trial < 10; ++trial) {
    const auto truth = testing::random_transform(rng, 0.3);
    PointCloud target = transformed(sample_uniform(make_gripper_mesh(), 4000, 100 + trial), truth);
    for (auto& q : target.positions) q += 0.001 * Vec3(rng.normal(), rng.normal(), rng.normal());
    target = with_normals_if_possible(target, 30);
    const RigidTransform init =
        compose(testing::make_pose(testing::random_point(rng).normalized(), 8 * kDeg, Vec3(0.008, -0.005, 0.004)),
                truth);
    for (auto variant : {IcpVariant::kPointToPoint, IcpVariant::kPointToPlane}) {
      IcpParams p = kCfg.icp;
      p.variant = variant;
      const auto r = icp_refine(model, target, init, p);
      ASSERT_FALSE(r.trace.empty());
      for (const auto& step : r.trace) EXPECT_LE(step.objective_after, step.objective_before);
    }
  }
}

TEST(GlobalRegister, RefinementDoesNotDegradeFitness) {
  CounterRng rng(7);
  const PointCloud model = gripper_cloud();
  const FeatureCloud fm = compute_feature_cloud(model, kCfg);
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto truth = testing::random_transform(rng, 0.3);
    PointCloud scene = transformed(sample_uniform(make_gripper_mesh(), 3000, 500 + trial), truth);
    for (auto& q : scene.positions) q += 0.001 * Vec3(rng.normal(), rng.normal(), rng.normal());
    scene = voxel_downsample(scene, kCfg.voxel);
    scene = with_normals_if_possible(scene, kCfg.normal_k);
    RegistrationConfig cfg = kCfg;
    cfg.ransac.seed = static_cast<std::uint64_t>(trial);
    RegistrationResult coarse;
    const auto fine = global_register(model, fm, scene, cfg, &coarse);
    // Compare both poses under the same threshold.
    const SpatialIndex index(scene.positions);
    const double thr = cfg.icp.max_correspondence_distance;
    if (score_alignment(model.positions, index, fine.transform, thr).fitness <
        score_alignment(model.positions, index, coarse.transform, thr).fitness)
      ++violations;
  }
  EXPECT_LE(violations, 2);
}

}  // namespace
}  // namespace eelabel
