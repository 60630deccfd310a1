#include <CLI11.hpp>

#include <iostream>

#include "rissense/commands.hpp"

using namespace rissense;

int main(int argc, char** argv) {
  CLI::App app{"RIS-aided spectrum sensing simulator and dataset toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::string ris_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  int jobs_override = 0;
  bool save_iq = false;

  auto add_common = [&](CLI::App* cmd, bool config_required) {
    auto* c = cmd->add_option("--config", config_path, "JSON run configuration");
    if (config_required) c->required();
    cmd->add_option("--out", out_override, "output root (overrides config and RISSENSE_OUT_ROOT)");
    cmd->add_option("--jobs", jobs_override, "worker threads (0 = all cores)");
    cmd->add_option("--seed", seed_override, "master seed override")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_option("--ris", ris_override, "RIS pipeline: off | optimized | ideal");
    cmd->add_flag("--save-iq", save_iq, "persist IQ captures next to the images");
  };

  auto* gen = app.add_subcommand("generate", "synthesize the spectrogram dataset");
  add_common(gen, true);

  auto* study = app.add_subcommand("ris-study", "Monte-Carlo study of the greedy RIS optimizer");
  add_common(study, true);

  auto* det = app.add_subcommand("detect", "run the baseline detector over a manifest");
  std::string manifest_path, detections_dir;
  det->add_option("--manifest", manifest_path, "dataset manifest")->required();
  det->add_option("--detections", detections_dir, "output directory (default: <root>/detections)");
  add_common(det, false);

  auto* ev = app.add_subcommand("evaluate", "score detections against ground truth");
  std::string truth_path, eval_detections, report_dir;
  ev->add_option("--truth", truth_path, "manifest or COCO annotation file")->required();
  ev->add_option("--detections", eval_detections, "detections directory")->required();
  ev->add_option("--report", report_dir, "report directory (default: detections dir)");
  add_common(ev, false);

  auto* exp = app.add_subcommand("experiment", "generate, detect and evaluate off vs optimized");
  add_common(exp, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : commands::kUsage;
  }

  try {
    config::RunConfig cfg =
        config_path.empty() ? config::parse_config(R"({"schema_version":1})")
                            : config::load_config(config_path);
    config::Overrides ov;
    if (!out_override.empty()) ov.output_root = out_override;
    if (seed_given) ov.seed = seed_override;
    if (!ris_override.empty()) ov.pipeline = dataset::pipeline_from_string(ris_override);
    if (jobs_override > 0) ov.jobs = jobs_override;
    if (save_iq) ov.save_iq = true;
    config::apply_overrides(cfg, ov);

    if (gen->parsed()) return commands::cmd_generate(cfg, std::cout);
    if (study->parsed()) return commands::cmd_ris_study(cfg, std::cout);
    if (det->parsed()) {
      const std::filesystem::path mp = manifest_path;
      const std::filesystem::path dd =
          detections_dir.empty() ? mp.parent_path() / "detections" : std::filesystem::path(detections_dir);
      return commands::cmd_detect(mp, dd, cfg, std::cout);
    }
    if (ev->parsed()) {
      const std::filesystem::path rd =
          report_dir.empty() ? std::filesystem::path(eval_detections) : std::filesystem::path(report_dir);
      return commands::cmd_evaluate(truth_path, eval_detections, rd, cfg, std::cout);
    }
    if (exp->parsed()) return commands::cmd_experiment(cfg, std::cout);
  } catch (const std::exception& e) {
    return commands::exit_code_for(e, std::cerr);
  }
  return commands::kUsage;
}
