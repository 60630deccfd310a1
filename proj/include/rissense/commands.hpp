#ifndef RISSENSE_COMMANDS_HPP
#define RISSENSE_COMMANDS_HPP

#include <filesystem>
#include <iosfwd>

#include "rissense/config.hpp"

namespace rissense::commands {

// Exit codes shared by the CLI: 0 success, 1 usage, 2 config validation,
// 3 generation/processing failure, 4 I/O failure.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kGenerationError = 3,
  kIoError = 4,
};

int cmd_generate(const config::RunConfig& cfg, std::ostream& out);

int cmd_ris_study(const config::RunConfig& cfg, std::ostream& out);

int cmd_detect(const std::filesystem::path& manifest_path,
               const std::filesystem::path& detections_dir, const config::RunConfig& cfg,
               std::ostream& out);

// truth_path may be a dataset manifest or a COCO annotation file.
int cmd_evaluate(const std::filesystem::path& truth_path,
                 const std::filesystem::path& detections_dir,
                 const std::filesystem::path& report_dir, const config::RunConfig& cfg,
                 std::ostream& out);

// Full pipeline: paired off/optimized generation with matched seeds,
// detection, evaluation, and an off-vs-optimized delta summary.
int cmd_experiment(const config::RunConfig& cfg, std::ostream& out);

// Maps an exception to the documented exit code, printing the diagnostic.
int exit_code_for(const std::exception& e, std::ostream& err);

}  // namespace rissense::commands

#endif
