#include "eelabel/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace eelabel;
  CLI::App app{"End-effector pose labeling for multi-view RGB-D demonstrations"};
  app.require_subcommand(1);

  LabelOptions label;
  std::string label_config;
  int label_jobs = 1;
  std::uint64_t label_seed = 0;
  bool print_default = false;
  auto* lab = app.add_subcommand("label", "Estimate poses and write action labels for every demo in a dataset");
  lab->add_option("dataset", label.dataset, "Dataset directory (one subdirectory per demo)");
  lab->add_option("out", label.out, "Output directory");
  auto* lab_config = lab->add_option("--config", label_config, "Pipeline config JSON");
  auto* lab_jobs = lab->add_option("--jobs", label_jobs, "Demos processed in parallel")->check(CLI::PositiveNumber);
  auto* lab_seed = lab->add_option("--seed", label_seed, "RANSAC seed (overrides the config)");
  lab->add_flag("--print-default-config", print_default, "Print the default config and exit");

  SynthOptions synth;
  int synth_jobs = 1;
  std::uint64_t synth_seed = 0;
  auto* syn = app.add_subcommand("synth", "Render synthetic demonstrations with ground truth");
  syn->add_option("scenario", synth.scenario, "Scenario JSON")->required();
  syn->add_option("out", synth.out, "Output dataset directory")->required();
  auto* syn_jobs = syn->add_option("--jobs", synth_jobs, "Frames rendered in parallel")->check(CLI::PositiveNumber);
  auto* syn_seed = syn->add_option("--seed", synth_seed, "Base seed (overrides the scenario)");

  EvalOptions eval;
  std::string eval_out;
  auto* ev = app.add_subcommand("eval", "Compare estimated pose tracks with ground truth");
  ev->add_option("labels", eval.labels, "Label output directory")->required();
  ev->add_option("truth", eval.truth, "Ground-truth dataset directory")->required();
  ev->add_option("--symmetry", eval.symmetry, "none, <x|y|z>:<order> or <ax,ay,az>:<order>")->capture_default_str();
  ev->add_flag("--force", eval.force, "Compare labels produced with different configs");
  auto* ev_out = ev->add_option("--out", eval_out, "Metrics JSON path (default <labels>/metrics.json)");

  SampleMeshOptions sample;
  std::string sample_mesh_path;
  auto* sm = app.add_subcommand("sample-mesh", "Sample a mesh surface uniformly into a PLY point cloud");
  sm->add_option("out", sample.out, "Output PLY")->required();
  auto* sm_mesh = sm->add_option("--mesh", sample_mesh_path, "OBJ/PLY mesh (default: built-in gripper)");
  sm->add_option("--count", sample.count, "Number of samples")->capture_default_str();
  sm->add_option("--seed", sample.seed, "Sampling seed")->capture_default_str();
  sm->add_flag("--ascii", sample.ascii, "Write ASCII PLY");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*lab) {
    if (print_default) {
      std::cout << PipelineConfig{}.to_json().dump(2) << "\n";
      return kExitOk;
    }
    if (label.dataset.empty() || label.out.empty()) {
      std::cerr << "eelabel label: dataset and out directories are required\n";
      return kExitUsage;
    }
    if (*lab_config) label.config = label_config;
    if (*lab_jobs) label.jobs = label_jobs;
    if (*lab_seed) label.seed = label_seed;
    return cmd_label(label, std::cout, std::cerr);
  }
  if (*syn) {
    if (*syn_jobs) synth.jobs = synth_jobs;
    if (*syn_seed) synth.seed = synth_seed;
    return cmd_synth(synth, std::cout, std::cerr);
  }
  if (*ev) {
    if (*ev_out) eval.out = eval_out;
    return cmd_eval(eval, std::cout, std::cerr);
  }
  if (*sm) {
    if (*sm_mesh) sample.mesh = sample_mesh_path;
    return cmd_sample_mesh(sample, std::cout, std::cerr);
  }
  return kExitUsage;
}
