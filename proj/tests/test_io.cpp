#include "eelabel/commands.hpp"
#include "eelabel/config.hpp"
#include "eelabel/dataset.hpp"
#include "eelabel/scenario.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace eelabel {
namespace {

using testing::ScratchDir;

DepthImage ramp_image(int w, int h) {
  DepthImage img(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const std::size_t i = img.index(u, v);
      img.depth[i] = (u + v) % 7 == 0 ? 0.0 : 0.3 + 0.00123 * u + 0.0171 * v;
      img.color[i] = Vec3(u / double(w), v / double(h), 0.5);
    }
  img.depth[1] = std::numeric_limits<double>::quiet_NaN();
  return img;
}

template <class F>
void expect_error(F&& f, ErrorKind kind, const std::string& needle) {
  try {
    f();
    FAIL() << "expected an error mentioning " << needle;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

TEST(DepthPng, RoundTripQuantizesToScale) {
  ScratchDir dir("depth_png");
  const DepthImage img = ramp_image(37, 23);
  write_depth_png(dir / "d.png", img, 1e-4);
  DepthImage back;
  read_depth_png(dir / "d.png", 1e-4, back);
  ASSERT_EQ(back.width, 37);
  ASSERT_EQ(back.height, 23);
  for (std::size_t i = 0; i < img.depth.size(); ++i) {
    if (DepthImage::valid_depth(img.depth[i]))
      EXPECT_NEAR(back.depth[i], img.depth[i], 0.5e-4 + 1e-12);
    else
      EXPECT_EQ(back.depth[i], 0.0);
  }
}

TEST(DepthPng, OutOfRangeDepthIsRejected) {
  ScratchDir dir("depth_range");
  DepthImage img(2, 2);
  img.depth[0] = 7.0;  // 70000 units at 0.1 mm
  EXPECT_THROW(write_depth_png(dir / "d.png", img, 1e-4), Error);
}

TEST(ColorPng, RoundTripWithinOneLevel) {
  ScratchDir dir("color_png");
  const DepthImage img = ramp_image(19, 11);
  write_color_png(dir / "c.png", img);
  DepthImage back;
  read_color_png(dir / "c.png", back);
  ASSERT_EQ(back.color.size(), img.color.size());
  for (std::size_t i = 0; i < img.color.size(); ++i)
    EXPECT_LE((back.color[i] - img.color[i]).cwiseAbs().maxCoeff(), 0.5 / 255.0 + 1e-12);
}

TEST(ReadPng, NotAPngIsAParseError) {
  ScratchDir dir("bad_png");
  write_file(dir / "x.png", "definitely not a png");
  EXPECT_THROW(read_png(dir / "x.png"), Error);
  expect_error([&] { read_png(dir / "missing.png"); }, ErrorKind::kIo, "missing.png");
}

TEST(DepthBin, RoundTripAtFloatPrecision) {
  ScratchDir dir("depth_bin");
  const DepthImage img = ramp_image(13, 9);
  write_depth_bin(dir / "d.bin", img);
  DepthImage back;
  read_depth_bin(dir / "d.bin", back);
  ASSERT_EQ(back.width, 13);
  for (std::size_t i = 0; i < img.depth.size(); ++i) {
    if (DepthImage::valid_depth(img.depth[i]))
      EXPECT_EQ(back.depth[i], static_cast<double>(static_cast<float>(img.depth[i])));
    else
      EXPECT_EQ(back.depth[i], 0.0);
  }
  write_file(dir / "bad.bin", "DPTX0000");
  expect_error([&] { read_depth_bin(dir / "bad.bin", back); }, ErrorKind::kParse, "DPTH");
  write_file(dir / "short.bin", std::string("DPTH\x01\x00\x00\x00\x02\x00\x00\x00", 12));
  expect_error([&] { read_depth_bin(dir / "short.bin", back); }, ErrorKind::kParse, "truncated");
}

TEST(PoseJson, RoundTripAndCanonicalSign) {
  CounterRng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto p = testing::random_transform(rng);
    const ojson j = pose_json(p);
    EXPECT_GE(j["q"][0].get<double>(), 0.0);
    const auto back = pose_from_json(nlohmann::json::parse(j.dump()), "pose");
    EXPECT_LT((back.rotation - p.rotation).norm(), 1e-14);
    EXPECT_EQ(back.translation, p.translation);
    EXPECT_EQ(pose_json(p).dump(), j.dump());
  }
  // Either quaternion sign parses to the same rotation.
  const auto neg = pose_from_json(nlohmann::json::parse(R"({"q":[-0.5,-0.5,-0.5,-0.5],"t":[0,0,0]})"), "neg");
  const auto pos = pose_from_json(nlohmann::json::parse(R"({"q":[0.5,0.5,0.5,0.5],"t":[0,0,0]})"), "pos");
  EXPECT_LT((neg.rotation - pos.rotation).norm(), 1e-15);
  expect_error([] { pose_from_json(nlohmann::json::parse(R"({"q":[0,0,0,0],"t":[0,0,0]})"), "p"); }, ErrorKind::kParse,
               "zero norm");
  expect_error([] { pose_from_json(nlohmann::json::parse(R"({"q":[1,0,0],"t":[0,0,0]})"), "p"); }, ErrorKind::kParse,
               "p.q");
}

TEST(Cameras, RoundTripPreservesProjection) {
  ScratchDir dir("cameras");
  const auto cams = make_camera_ring(4, Vec3(0, 0, 0.1), 0.6, 0.3);
  write_cameras(dir / "cameras.json", cams);
  const auto back = read_cameras(dir / "cameras.json");
  ASSERT_EQ(back.size(), cams.size());
  CounterRng rng(2);
  for (std::size_t c = 0; c < cams.size(); ++c) {
    EXPECT_EQ(back[c].width, cams[c].width);
    EXPECT_EQ(back[c].fx, cams[c].fx);
    EXPECT_EQ(back[c].depth_scale, cams[c].depth_scale);
    for (int i = 0; i < 20; ++i) {
      const Vec3 p = testing::random_point(rng, -0.1, 0.1);
      const auto a = project_point(cams[c], p), b = project_point(back[c], p);
      EXPECT_NEAR(a.u, b.u, 1e-9);
      EXPECT_NEAR(a.v, b.v, 1e-9);
      EXPECT_NEAR(a.depth, b.depth, 1e-12);
    }
  }
}

TEST(Cameras, MalformedFilesNameTheField) {
  ScratchDir dir("bad_cameras");
  write_file(dir / "a.json", R"({"cameras":[{"fx":1,"fy":1,"cx":0,"cy":0,"width":4,"extrinsic":{}}]})");
  expect_error([&] { read_cameras(dir / "a.json"); }, ErrorKind::kParse, "cameras[0].height");
  write_file(dir / "b.json", R"({"cameras":[]})");
  expect_error([&] { read_cameras(dir / "b.json"); }, ErrorKind::kParse, "b.json");
  write_file(dir / "c.json", "{");
  expect_error([&] { read_cameras(dir / "c.json"); }, ErrorKind::kParse, "c.json");
}

TEST(Dataset, WriteThenOpenRoundTrip) {
  ScratchDir dir("dataset");
  ScenarioConfig sc = reference_scenario(3, 4);
  sc.name = "d0";
  const SyntheticScene scene(make_gripper_mesh(), sc);
  write_synthetic_demo(dir / "d0", scene, DepthFormat::kPng, 1);
  ScenarioConfig sc2 = sc;
  sc2.name = "a_bin";
  sc2.trajectory.resize(2);
  const SyntheticScene scene2(make_gripper_mesh(), sc2);
  write_synthetic_demo(dir / "a_bin", scene2, DepthFormat::kBin, 1);

  const auto found = find_demonstrations(dir.path());
  ASSERT_EQ(found.size(), 2u);
  EXPECT_EQ(found[0].filename(), "a_bin");
  EXPECT_EQ(found[1].filename(), "d0");

  const Demonstration d = open_demonstration(dir / "d0");
  EXPECT_EQ(d.id, "d0");
  ASSERT_EQ(d.frame_count, 3u);
  const Frame f = d.frame(2);
  const Frame truth = scene.render_frame(2).frame;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < truth.views[c].depth.size(); ++i) {
      const double want = truth.views[c].depth[i];
      if (DepthImage::valid_depth(want))
        ASSERT_NEAR(f.views[c].depth[i], want, 0.5e-4 + 1e-12);
      else
        ASSERT_EQ(f.views[c].depth[i], 0.0);
    }
  const Demonstration b = open_demonstration(dir / "a_bin");
  const Frame fb = b.frame(1);
  const Frame tb = scene2.render_frame(1).frame;
  EXPECT_NEAR(fb.views[0].depth[tb.views[0].index(160, 120)], tb.views[0].depth[tb.views[0].index(160, 120)], 1e-6);

  const auto gt = read_pose_sequence(dir / "d0" / "ground_truth.jsonl");
  ASSERT_EQ(gt.size(), 3u);
  EXPECT_EQ(gt[1].translation, sc.trajectory[1].translation);
}

TEST(Dataset, LayoutErrorsNameThePath) {
  ScratchDir dir("layout");
  ScenarioConfig sc = reference_scenario(3, 5);
  const SyntheticScene scene(make_gripper_mesh(), sc);
  write_synthetic_demo(dir / "x", scene, DepthFormat::kPng, 1);
  fs::remove(dir / "x" / "frame_1" / "view_2.color.png");
  expect_error([&] { open_demonstration(dir / "x"); }, ErrorKind::kIo, "frame_1/view_2.color.png");
  fs::remove_all(dir / "x" / "frame_1");
  expect_error([&] { open_demonstration(dir / "x"); }, ErrorKind::kIo, "frame_1");
  expect_error([&] { find_demonstrations(dir / "nope"); }, ErrorKind::kIo, "nope");
}

TEST(Records, ActionBytesEqualNextPose) {
  CounterRng rng(6);
  PoseTrack track;
  for (int t = 0; t < 8; ++t) {
    TrackEntry e;
    e.pose = testing::random_transform(rng, 0.2);
    e.fitness = rng.uniform();
    e.method = t == 0 ? TrackMethod::kGlobal : (t == 4 ? TrackMethod::kMissing : TrackMethod::kSeeded);
    e.converged = t != 4;
    track.entries.push_back(e);
  }
  const auto steps = label_track(track);
  std::istringstream poses(poses_jsonl(track)), labels(labels_jsonl(steps));
  std::vector<std::string> pose_lines, label_lines;
  for (std::string l; std::getline(poses, l);) pose_lines.push_back(l);
  for (std::string l; std::getline(labels, l);) label_lines.push_back(l);
  ASSERT_EQ(pose_lines.size(), 8u);
  ASSERT_EQ(label_lines.size(), 7u);
  for (std::size_t t = 0; t < 7; ++t) {
    const auto pose_line = nlohmann::ordered_json::parse(pose_lines[t + 1]);
    const auto label_line = nlohmann::ordered_json::parse(label_lines[t]);
    const std::string want = ojson{{"q", pose_line["q"]}, {"t", pose_line["t"]}}.dump();
    EXPECT_EQ(label_line["action"].dump(), want);
    // The same bytes appear verbatim in both files.
    EXPECT_NE(label_lines[t].find(want.substr(1, want.size() - 2)), std::string::npos);
    EXPECT_NE(pose_lines[t + 1].find(want.substr(1, want.size() - 2)), std::string::npos);
  }
  EXPECT_TRUE(nlohmann::json::parse(label_lines[0])["aperture"].is_null());
  EXPECT_EQ(nlohmann::json::parse(pose_lines[4])["method"], "missing");
}

TEST(Records, ActionsExportSkipsMissingAndSupportsDeltas) {
  CounterRng rng(7);
  PoseTrack track;
  for (int t = 0; t < 5; ++t) {
    TrackEntry e;
    e.pose = testing::random_transform(rng, 0.2);
    e.method = t == 2 ? TrackMethod::kMissing : TrackMethod::kSeeded;
    e.converged = true;
    track.entries.push_back(e);
  }
  const auto steps = label_track(track);
  const auto abs_lines = read_jsonl_string(actions_jsonl(steps, false, false));
  ASSERT_EQ(abs_lines.size(), 2u);  // steps 1 and 2 touch the missing frame
  EXPECT_EQ(abs_lines[0]["t"], 0);
  EXPECT_EQ(abs_lines[1]["t"], 3);
  EXPECT_EQ(read_jsonl_string(actions_jsonl(steps, false, true)).size(), 4u);
  for (const auto& j : read_jsonl_string(actions_jsonl(steps, true, true))) {
    const std::size_t t = j["t"].get<std::size_t>();
    const auto delta = pose_from_json(j["delta"], "delta");
    const auto goal = compose(track.entries[t].pose, delta);
    EXPECT_LT((goal.translation - track.entries[t + 1].pose.translation).norm(), 1e-12);
    EXPECT_LT(rotation_geodesic(goal, track.entries[t + 1].pose), 1e-7);
  }
}

TEST(Config, DefaultsRoundTripThroughJson) {
  const PipelineConfig def;
  const auto back = PipelineConfig::from_json(nlohmann::json::parse(def.to_json().dump()));
  EXPECT_EQ(back.to_json().dump(), def.to_json().dump());
  EXPECT_EQ(back.hash(), def.hash());
  EXPECT_NO_THROW(def.validate());
  EXPECT_EQ(PipelineConfig::from_json(nlohmann::json::object()).to_json().dump(), def.to_json().dump());
}

TEST(Config, HashIgnoresJobsButTracksEverythingElse) {
  PipelineConfig a, b;
  b.jobs = 8;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 1;
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.cluster.link_radius = 0.02;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, ErrorsNameTheField) {
  auto parse = [](const char* text) { return PipelineConfig::from_json(nlohmann::json::parse(text)); };
  expect_error([&] { parse(R"({"voxel_sise": 0.01})"); }, ErrorKind::kConfig, "voxel_sise");
  expect_error([&] { parse(R"({"cluster": {"link_radius": "big"}})"); }, ErrorKind::kConfig, "cluster.link_radius");
  expect_error([&] { parse(R"({"registration": {"icp": {"variant": "nope"}}})"); }, ErrorKind::kConfig,
               "registration.icp.variant");
  expect_error([&] { parse(R"({"registration": {"ransac": {"bogus": 1}}})"); }, ErrorKind::kConfig,
               "registration.ransac.bogus");
  expect_error([&] { parse(R"({"cluster": {"link_radius": -1}})").validate(); }, ErrorKind::kConfig, "cluster");
  expect_error([&] { parse(R"({"voxel_size": 0})").validate(); }, ErrorKind::kConfig, "voxel_size");
  expect_error([&] { parse(R"({"model": {"path": "/no/such/mesh.obj"}})").validate(); }, ErrorKind::kConfig,
               "model.path");
  expect_error([&] { parse(R"({"symmetry": {"axis": [0, 0]}})"); }, ErrorKind::kConfig, "symmetry.axis");
}

TEST(Config, RelativeModelPathResolvesAgainstConfigFile) {
  ScratchDir dir("config_rel");
  fs::create_directories(dir / "sub" / "meshes");
  write_obj(dir / "sub" / "meshes" / "g.obj", make_gripper_mesh());
  write_file(dir / "sub" / "cfg.json", R"({"model": {"path": "meshes/g.obj"}, "voxel_size": 0.004})");
  const auto cfg = PipelineConfig::load(dir / "sub" / "cfg.json");
  EXPECT_EQ(fs::path(cfg.model_path), (dir / "sub" / "meshes" / "g.obj").lexically_normal());
  EXPECT_NO_THROW(cfg.validate());
  // Registration radii follow the voxel.
  EXPECT_DOUBLE_EQ(cfg.tracking.registration.fpfh_radius, 0.02);
  EXPECT_EQ(cfg.load_model_mesh().triangles.size(), make_gripper_mesh().triangles.size());
}

TEST(SymmetrySpecParse, Forms) {
  EXPECT_EQ(SymmetrySpec::parse("none").group().order(), 1u);
  EXPECT_EQ(SymmetrySpec::parse("z:2").group().order(), 2u);
  const auto s = SymmetrySpec::parse("0,1,0:4");
  EXPECT_EQ(s.axis, Vec3(0, 1, 0));
  EXPECT_EQ(s.order, 4);
  EXPECT_THROW(SymmetrySpec::parse("z"), Error);
  EXPECT_THROW(SymmetrySpec::parse("q:2"), Error);
  EXPECT_THROW(SymmetrySpec::parse("z:0"), Error);
  EXPECT_THROW(SymmetrySpec::parse("z:2x"), Error);
}

TEST(Scenario, DemosGetNamesSeedsAndOverrides) {
  const auto plan = parse_scenario(nlohmann::json::parse(
      R"({"name": "run", "seed": 10, "frames": 4, "demos": [{}, {"depth_noise": 0.001}, {"name": "odd", "seed": 99}],
          "depth_format": "bin"})"));
  ASSERT_EQ(plan.demos.size(), 3u);
  EXPECT_EQ(plan.depth_format, DepthFormat::kBin);
  EXPECT_EQ(plan.demos[0].name, "run_000");
  EXPECT_EQ(plan.demos[0].seed, 10u);
  EXPECT_EQ(plan.demos[1].seed, 11u);
  EXPECT_EQ(plan.demos[1].depth_noise, 0.001);
  EXPECT_EQ(plan.demos[0].depth_noise, 0.002);
  EXPECT_EQ(plan.demos[2].name, "odd");
  EXPECT_EQ(plan.demos[2].seed, 99u);
  EXPECT_EQ(plan.demos[0].trajectory.size(), 4u);
  EXPECT_EQ(plan.demos[0].cameras.size(), 3u);

  const auto single = parse_scenario(nlohmann::json::parse(R"({"name": "solo", "frames": 2})"), {}, 5);
  ASSERT_EQ(single.demos.size(), 1u);
  EXPECT_EQ(single.demos[0].name, "solo");
  EXPECT_EQ(single.demos[0].seed, 5u);
}

TEST(Scenario, ErrorsNameTheField) {
  auto parse = [](const char* text) { return parse_scenario(nlohmann::json::parse(text)); };
  expect_error([&] { parse(R"({"depth_noise": -0.001})"); }, ErrorKind::kConfig, "depth_noise");
  expect_error([&] { parse(R"({"dropout": 1.5})"); }, ErrorKind::kConfig, "dropout");
  expect_error([&] { parse(R"({"clutter": {"boxes": 1, "colour": 3}})"); }, ErrorKind::kConfig, "clutter.colour");
  expect_error([&] { parse(R"({"demos": [{}, {"color_noise": -1}]})"); }, ErrorKind::kConfig, "demos[1]: color_noise");
  expect_error([&] { parse(R"({"demos": [{"name": "a"}, {"name": "a"}]})"); }, ErrorKind::kConfig, "duplicate");
  expect_error([&] { parse(R"({"frames": 0})"); }, ErrorKind::kConfig, "trajectory");
  expect_error([&] { parse(R"({"cameras": {"focal": -1}})"); }, ErrorKind::kConfig, "cameras.focal");
}

TEST(Stats, MedianAndPercentile) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  EXPECT_EQ(percentile(v, 95), 95.0);
  EXPECT_EQ(percentile(v, 100), 100.0);
  EXPECT_EQ(percentile({7}, 95), 7.0);
  const auto s = error_stats({{0.001, 0.0}, {0.004, 0.01}, {0.02, 0.0}, {0.001, 0.1}});
  EXPECT_EQ(s.frames, 4u);
  EXPECT_DOUBLE_EQ(s.within, 0.5);
  EXPECT_DOUBLE_EQ(s.median_translation, 0.0025);
}

TEST(Hash, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace eelabel
