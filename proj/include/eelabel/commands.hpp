#pragma once

#include "eelabel/config.hpp"
#include "eelabel/dataset.hpp"
#include "eelabel/labeling.hpp"
#include "eelabel/ply.hpp"
#include "eelabel/scenario.hpp"
#include "eelabel/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace eelabel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPartial = 2;

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots so the schedule never affects outputs.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& work) {
  const std::size_t threads = std::min<std::size_t>(std::max(jobs, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < threads; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) work(i);
    });
  for (auto& t : pool) t.join();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------- label

struct LabelOptions {
  fs::path dataset;
  fs::path out;
  std::optional<fs::path> config;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

struct DemoOutcome {
  std::string id;
  bool ok = false;
  std::string error;
  std::size_t frames = 0;
  std::size_t steps = 0;
  std::size_t exported = 0;
  double mean_fitness = 0.0;
  std::size_t flagged_frames = 0;
  std::size_t reregistered_frames = 0;
  std::size_t global_registrations = 0;
};

/// Writes poses.jsonl, labels.jsonl, actions.jsonl (if enabled) and
/// manifest.json for one labeled demo.
inline void write_label_outputs(const fs::path& dir, const LabeledDemonstration& ld, const PipelineConfig& cfg,
                                const std::string& config_hash, const std::string& model_hash,
                                const std::string& camera_hash) {
  fs::create_directories(dir);
  write_file(dir / "poses.jsonl", poses_jsonl(ld.track));
  write_file(dir / "labels.jsonl", labels_jsonl(ld.steps));
  if (cfg.exports.actions)
    write_file(dir / "actions.jsonl",
               actions_jsonl(ld.steps, cfg.exports.relative_actions, cfg.exports.include_flagged));
  else
    fs::remove(dir / "actions.jsonl");
  ojson config = cfg.to_json();
  config.erase("jobs");
  ojson m;
  m["demo_id"] = ld.id;
  m["frames"] = ld.track.entries.size();
  m["steps"] = ld.steps.size();
  m["config_hash"] = config_hash;
  m["seeds"] = {{"ransac", cfg.seed}, {"model_samples", cfg.model_seed}};
  m["model_hash"] = model_hash;
  m["camera_hash"] = camera_hash;
  m["config"] = config;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

inline int cmd_label(const LabelOptions& o, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  std::vector<Demonstration> demos;
  try {
    if (o.config) cfg = PipelineConfig::load(*o.config);
    if (o.jobs) cfg.jobs = *o.jobs;
    if (o.seed) cfg.seed = *o.seed;
    cfg.validate();
    if (!fs::is_directory(o.dataset)) throw Error(ErrorKind::kIo, o.dataset.string() + ": dataset directory not found");
    for (const auto& dir : find_demonstrations(o.dataset)) demos.push_back(open_demonstration(dir));
    if (demos.empty()) {
      err << "eelabel label: no demonstrations found in " << o.dataset.string() << "\n";
      return kExitUsage;
    }
    fs::create_directories(o.out);
  } catch (const Error& e) {
    err << "eelabel label: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "eelabel label: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::string config_hash = cfg.hash();
  const std::string model_hash = cfg.model_hash();
  const PointCloud model = sample_uniform(cfg.load_model_mesh(), cfg.model_samples, cfg.model_seed);
  const LabelingParams params = cfg.labeling_params();

  std::vector<DemoOutcome> outcomes(demos.size());
  std::mutex log_mutex;
  parallel_for(demos.size(), cfg.jobs, [&](std::size_t i) {
    const Demonstration& d = demos[i];
    DemoOutcome& r = outcomes[i];
    r.id = d.id;
    r.frames = d.frame_count;
    try {
      const LabeledDemonstration ld = label_demonstration(d, model, params);
      const std::string camera_hash = fnv1a_hex(read_file(d.source_path / "cameras.json"));
      write_label_outputs(o.out / d.id, ld, cfg, config_hash, model_hash, camera_hash);
      r.ok = true;
      r.steps = ld.steps.size();
      r.global_registrations = ld.track.global_registrations;
      double sum = 0.0;
      for (const auto& e : ld.track.entries) {
        sum += e.fitness;
        r.flagged_frames += e.flagged();
        r.reregistered_frames += e.method == TrackMethod::kReregistered;
      }
      r.mean_fitness = sum / static_cast<double>(ld.track.entries.size());
      for (const auto& s : ld.steps) r.exported += cfg.exports.include_flagged || !s.excluded_by_default();
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    std::lock_guard lock(log_mutex);
    if (r.ok)
      out << "labeled " << r.id << ": " << r.steps << " steps, mean fitness " << std::fixed << std::setprecision(3)
          << r.mean_fitness << ", " << r.flagged_frames << " flagged frame(s)\n";
    else
      err << "failed " << r.id << ": " << r.error << "\n";
  });

  ojson summary;
  summary["generated_at"] = utc_timestamp();
  summary["config_hash"] = config_hash;
  std::size_t ok = 0;
  summary["demos"] = ojson::array();
  for (const auto& r : outcomes) {
    ojson j;
    j["id"] = r.id;
    j["status"] = r.ok ? "ok" : "failed";
    j["frames"] = r.frames;
    if (r.ok) {
      j["steps"] = r.steps;
      j["exported_steps"] = r.exported;
      j["mean_fitness"] = r.mean_fitness;
      j["flagged_frames"] = r.flagged_frames;
      j["reregistered_frames"] = r.reregistered_frames;
      j["global_registrations"] = r.global_registrations;
    } else {
      j["error"] = r.error;
    }
    summary["demos"].push_back(j);
    ok += r.ok;
  }
  summary["succeeded"] = ok;
  summary["failed"] = outcomes.size() - ok;
  try {
    write_file(o.out / "summary.json", summary.dump(2) + "\n");
  } catch (const Error& e) {
    err << "eelabel label: " << e.what() << "\n";
    return kExitPartial;
  }
  out << ok << "/" << outcomes.size() << " demonstrations labeled; summary in "
      << (o.out / "summary.json").string() << "\n";
  return ok == outcomes.size() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  fs::path scenario;
  fs::path out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

/// Writes one synthetic demo in the dataset layout plus ground_truth.jsonl.
inline void write_synthetic_demo(const fs::path& dir, const SyntheticScene& scene, DepthFormat format, int jobs) {
  fs::create_directories(dir);
  const auto& sc = scene.config();
  write_cameras(dir / "cameras.json", sc.cameras);
  write_file(dir / "ground_truth.jsonl", ground_truth_jsonl(sc.trajectory));
  std::vector<std::string> errors(scene.frame_count());
  parallel_for(scene.frame_count(), jobs, [&](std::size_t t) {
    try {
      write_frame(dir, t, scene.render_frame(t).frame, sc.cameras, format);
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw Error(ErrorKind::kIo, e);
}

inline int cmd_synth(const SynthOptions& o, std::ostream& out, std::ostream& err) {
  SynthPlan plan;
  TriangleMesh mesh;
  try {
    const auto j = read_json_file(o.scenario);
    plan = parse_scenario(j, o.scenario.parent_path(), o.seed);
    mesh = plan.load_model_mesh();
  } catch (const Error& e) {
    err << "eelabel synth: " << o.scenario.string() << ": " << e.message() << "\n";
    return kExitUsage;
  }
  const int jobs = o.jobs.value_or(1);
  if (jobs < 1) {
    err << "eelabel synth: --jobs must be >= 1\n";
    return kExitUsage;
  }
  for (const auto& sc : plan.demos) {
    try {
      const SyntheticScene scene(mesh, sc);
      write_synthetic_demo(o.out / sc.name, scene, plan.depth_format, jobs);
      out << "wrote " << (o.out / sc.name).string() << ": " << sc.trajectory.size() << " frames, " << sc.cameras.size()
          << " cameras\n";
    } catch (const std::exception& e) {
      err << "eelabel synth: " << sc.name << ": " << e.what() << "\n";
      return kExitPartial;
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  fs::path labels;
  fs::path truth;
  std::string symmetry = "z:2";
  bool force = false;
  std::optional<fs::path> out;  // metrics JSON; default <labels>/metrics.json
};

struct ErrorStats {
  std::size_t frames = 0;
  double median_translation = 0.0;
  double median_rotation = 0.0;
  double p95_translation = 0.0;
  double p95_rotation = 0.0;
  double within = 0.0;  // fraction within 5 mm and 2 degrees

  ojson to_json() const {
    return {{"frames", frames},
            {"median_translation_m", median_translation},
            {"median_rotation_deg", median_rotation * 180.0 / std::numbers::pi},
            {"p95_translation_m", p95_translation},
            {"p95_rotation_deg", p95_rotation * 180.0 / std::numbers::pi},
            {"within_5mm_2deg", within}};
  }
};

/// Median (mean of the middle pair for even counts) of `v`.
inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Nearest-rank percentile, `p` in (0, 100].
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline ErrorStats error_stats(const std::vector<PoseError>& errors) {
  ErrorStats s;
  s.frames = errors.size();
  std::vector<double> tr, rot;
  std::size_t within = 0;
  for (const auto& e : errors) {
    tr.push_back(e.translation);
    rot.push_back(e.rotation);
    within += e.translation <= 0.005 && e.rotation <= 2.0 * std::numbers::pi / 180.0;
  }
  s.median_translation = median(tr);
  s.median_rotation = median(rot);
  s.p95_translation = percentile(tr, 95.0);
  s.p95_rotation = percentile(rot, 95.0);
  s.within = errors.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(errors.size());
  return s;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  SymmetryGroup group;
  std::map<std::string, fs::path> labeled, truth;
  try {
    group = SymmetrySpec::parse(o.symmetry).group();
    for (const auto* side : {&o.labels, &o.truth})
      if (!fs::is_directory(*side)) throw Error(ErrorKind::kIo, side->string() + ": not a directory");
    for (const auto& e : fs::directory_iterator(o.labels))
      if (e.is_directory() && fs::exists(e.path() / "poses.jsonl")) labeled[e.path().filename().string()] = e.path();
    for (const auto& e : fs::directory_iterator(o.truth))
      if (e.is_directory() && fs::exists(e.path() / "ground_truth.jsonl"))
        truth[e.path().filename().string()] = e.path();
  } catch (const std::exception& e) {
    err << "eelabel eval: " << e.what() << "\n";
    return kExitUsage;
  }
  if (labeled.empty()) {
    err << "eelabel eval: no labeled demonstrations found in " << o.labels.string() << "\n";
    return kExitUsage;
  }
  std::vector<std::string> only_labels, only_truth;
  for (const auto& [id, _] : labeled)
    if (!truth.count(id)) only_labels.push_back(id);
  for (const auto& [id, _] : truth)
    if (!labeled.count(id)) only_truth.push_back(id);
  if (!only_labels.empty() || !only_truth.empty()) {
    err << "eelabel eval: demo ids differ between " << o.labels.string() << " and " << o.truth.string() << "\n";
    for (const auto& id : only_labels) err << "  only in labels: " << id << "\n";
    for (const auto& id : only_truth) err << "  only in ground truth: " << id << "\n";
    return kExitUsage;
  }

  std::map<std::string, std::vector<std::string>> hashes;  // config hash -> demo ids
  for (const auto& [id, dir] : labeled) {
    std::string h = "unknown";
    if (fs::exists(dir / "manifest.json")) {
      try {
        const auto m = read_json_file(dir / "manifest.json");
        if (m.contains("config_hash") && m["config_hash"].is_string()) h = m["config_hash"].get<std::string>();
      } catch (const Error& e) {
        err << "eelabel eval: " << e.what() << "\n";
        return kExitUsage;
      }
    }
    hashes[h].push_back(id);
  }
  if (hashes.size() > 1) {
    err << "eelabel eval: labels were produced with " << hashes.size() << " different configs";
    if (!o.force) {
      err << " (use --force to compare anyway)\n";
      for (const auto& [h, ids] : hashes) err << "  " << h << ": " << ids.size() << " demo(s), e.g. " << ids[0] << "\n";
      return kExitUsage;
    }
    err << "; continuing because of --force\n";
  }

  ojson metrics;
  metrics["symmetry"] = o.symmetry;
  metrics["demos"] = ojson::array();
  std::vector<PoseError> all;
  out << std::left << std::setw(24) << "demo" << std::right << std::setw(7) << "frames" << std::setw(11) << "med mm"
      << std::setw(10) << "med deg" << std::setw(11) << "p95 mm" << std::setw(10) << "p95 deg" << std::setw(9)
      << "within" << "\n";
  auto row = [&](const std::string& name, const ErrorStats& s) {
    out << std::left << std::setw(24) << name << std::right << std::setw(7) << s.frames << std::fixed
        << std::setprecision(2) << std::setw(11) << s.median_translation * 1e3 << std::setw(10)
        << s.median_rotation * 180.0 / std::numbers::pi << std::setw(11) << s.p95_translation * 1e3 << std::setw(10)
        << s.p95_rotation * 180.0 / std::numbers::pi << std::setprecision(3) << std::setw(9) << s.within << "\n";
  };
  for (const auto& [id, dir] : labeled) {
    std::vector<RigidTransform> est, gt;
    try {
      est = read_pose_sequence(dir / "poses.jsonl");
      gt = read_pose_sequence(truth[id] / "ground_truth.jsonl");
    } catch (const Error& e) {
      err << "eelabel eval: " << e.what() << "\n";
      return kExitUsage;
    }
    if (est.size() != gt.size()) {
      err << "eelabel eval: " << id << ": " << est.size() << " estimated poses but " << gt.size()
          << " ground-truth poses\n";
      return kExitUsage;
    }
    std::vector<PoseError> errors;
    for (std::size_t t = 0; t < est.size(); ++t) errors.push_back(pose_error(est[t], gt[t], group));
    all.insert(all.end(), errors.begin(), errors.end());
    const ErrorStats s = error_stats(errors);
    row(id, s);
    ojson j = s.to_json();
    j["id"] = id;
    metrics["demos"].push_back(j);
  }
  const ErrorStats total = error_stats(all);
  row("ALL", total);
  metrics["aggregate"] = total.to_json();
  const fs::path metrics_path = o.out.value_or(o.labels / "metrics.json");
  try {
    write_file(metrics_path, metrics.dump(2) + "\n");
  } catch (const Error& e) {
    err << "eelabel eval: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- sample-mesh

struct SampleMeshOptions {
  std::string mesh = "builtin:gripper";
  fs::path out;
  std::size_t count = 5000;
  std::uint64_t seed = 1;
  bool ascii = false;
};

inline int cmd_sample_mesh(const SampleMeshOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const TriangleMesh mesh = o.mesh == "builtin:gripper" ? make_gripper_mesh() : load_mesh(o.mesh);
    if (o.count < 1) throw Error(ErrorKind::kInvalidArgument, "--count must be >= 1");
    const PointCloud cloud = sample_uniform(mesh, o.count, o.seed);
    write_ply(o.out, cloud, !o.ascii);
    out << "wrote " << cloud.size() << " points to " << o.out.string() << "\n";
  } catch (const Error& e) {
    err << "eelabel sample-mesh: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace eelabel
