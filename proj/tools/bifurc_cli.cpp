// Command-line front end: simulate synthetic sweeps, run the reconstruction
// pipeline on a dataset directory, score results against ground truth, and
// export results to JSON/PLY/CSV.
//
// Exit codes: 0 success, 1 pipeline error, 2 I/O or configuration error.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bifurc/bifurc.hpp"

namespace {

bifurc::HyperParams profile_params(const std::string& name) {
  return name == "pig" ? bifurc::HyperParams::pigs() : bifurc::HyperParams::phantom();
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir, std::uint64_t seed,
                 const std::string& profile) {
  const bifurc::PhantomFile pf = bifurc::load_phantom_spec(spec_path);
  const bifurc::ScanParams sp = pf.scan.value_or(bifurc::ScanParams{});
  bifurc::ScanDataset ds = bifurc::simulate(pf.spec, sp, seed);

  bifurc::RunConfig cfg;
  cfg.hyperparams = profile_params(profile);
  cfg.calibration = ds.calibration;
  cfg.scan = sp;
  bifurc::save_dataset(ds, cfg, out_dir);

  std::cout << "wrote " << ds.frames.size() << " frames, " << ds.poses.size() << " poses to "
            << out_dir << "\n";
  return 0;
}

int cmd_run(const std::string& data_dir, const std::string& config_path,
            const std::string& profile, const std::string& out_path) {
  bifurc::LoadedDataset lds = bifurc::load_dataset(data_dir);
  bifurc::RunConfig cfg = lds.config;
  if (!config_path.empty()) cfg = bifurc::load_config(config_path);
  if (!profile.empty()) cfg.hyperparams = profile_params(profile);

  const bifurc::PipelineResult result = bifurc::run(lds.dataset, cfg.hyperparams, cfg.calibration);
  bifurc::save_result(result, out_path);

  std::cout << result.merged_tracks.size() << " merged track(s), " << result.bifurcations.size()
            << " bifurcation(s)";
  if (result.primary_bifurcation >= 0) {
    const auto& b = result.bifurcations[result.primary_bifurcation];
    std::cout << "; primary at (" << b.position.x << ", " << b.position.y << ", " << b.position.z
              << ") mm, t=" << b.t << " s";
    const auto& site = result.needle_sites[result.primary_bifurcation];
    if (site.has_value())
      std::cout << "; needle site " << site->distance_to_bifurcation << " mm cranial";
  }
  std::cout << "; identification time " << result.identification_time_s << " s\n";
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int cmd_eval(const std::string& result_path, const std::string& truth_path,
             const std::string& data_dir, const std::string& out_path) {
  const bifurc::PipelineResult result = bifurc::load_result(result_path);
  const bifurc::GroundTruth truth = bifurc::load_truth(truth_path);
  bifurc::EvalReport report = bifurc::evaluate(result, truth);

  if (!data_dir.empty()) {
    const bifurc::LoadedDataset lds = bifurc::load_dataset(data_dir);
    if (!lds.dataset.truth_masks.empty()) {
      std::vector<bifurc::Mask> frames;
      frames.reserve(lds.dataset.frames.size());
      for (const bifurc::Frame& f : lds.dataset.frames) frames.push_back(f.mask);
      report.iou = bifurc::mean_iou(frames, lds.dataset.truth_masks);
    }
  }

  const auto j = bifurc::report_to_json(report);
  if (!out_path.empty()) bifurc::io::write_json_file(j, out_path);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_export(const std::string& result_path, const std::string& format,
               const std::string& out_path) {
  const bifurc::PipelineResult result = bifurc::load_result(result_path);
  if (format == "json")
    bifurc::save_result(result, out_path);
  else if (format == "ply")
    bifurc::export_ply(result, out_path);
  else
    bifurc::export_csv(result, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D vessel centerline reconstruction and bifurcation identification "
               "from binary ultrasound masks and probe poses"};
  app.require_subcommand(1);

  std::string spec_path, data_dir, config_path, profile, result_path, truth_path, out_path,
      format = "json";
  std::uint64_t seed = 0;

  auto* sim = app.add_subcommand("simulate", "Render a synthetic scan from a phantom spec");
  sim->add_option("--spec", spec_path, "phantom spec JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_path, "output dataset directory")->required();
  sim->add_option("--seed", seed, "noise seed");
  std::string sim_profile = "phantom";
  sim->add_option("--profile", sim_profile, "hyperparameter profile written to config.json")
      ->check(CLI::IsMember({"pig", "phantom"}));

  auto* run = app.add_subcommand("run", "Reconstruct vessels and report the needle site");
  run->add_option("--data", data_dir, "dataset directory")->required()
      ->check(CLI::ExistingDirectory);
  run->add_option("--config", config_path, "config JSON overriding the dataset's config.json")
      ->check(CLI::ExistingFile);
  run->add_option("--profile", profile, "hyperparameter profile override")
      ->check(CLI::IsMember({"pig", "phantom"}));
  run->add_option("--out", out_path, "result JSON path")->required();

  auto* ev = app.add_subcommand("eval", "Score a result against ground truth");
  ev->add_option("--result", result_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", truth_path)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data_dir, "dataset directory, enables the IoU pass-through")
      ->check(CLI::ExistingDirectory);
  ev->add_option("--out", out_path, "also write the report JSON here");

  auto* ex = app.add_subcommand("export", "Convert a result to another format");
  ex->add_option("--result", result_path)->required()->check(CLI::ExistingFile);
  ex->add_option("--format", format)->check(CLI::IsMember({"json", "ply", "csv"}));
  ex->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(spec_path, out_path, seed, sim_profile);
    if (run->parsed()) return cmd_run(data_dir, config_path, profile, out_path);
    if (ev->parsed()) return cmd_eval(result_path, truth_path, data_dir, out_path);
    if (ex->parsed()) return cmd_export(result_path, format, out_path);
  } catch (const bifurc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
