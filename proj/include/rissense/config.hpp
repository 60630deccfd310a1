#ifndef RISSENSE_CONFIG_HPP
#define RISSENSE_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "rissense/dataset.hpp"
#include "rissense/detector.hpp"
#include "rissense/eval.hpp"

namespace rissense::config {

// Declarative run configuration: a single JSON file with a versioned schema.
// Unknown keys are rejected at every level; all values are validated before
// any work starts.

struct RunConfig {
  dataset::GenerationConfig generation;
  detector::DetectorParams detector;
  eval::MatchConfig match = eval::MatchConfig::coco();
  int ris_study_trials = 1000;
  bool ris_study_exhaustive = false;
};

RunConfig load_config(const std::filesystem::path& path);

// Parses the JSON text directly (tests, embedded configs).
RunConfig parse_config(const std::string& text);

struct Overrides {
  std::optional<std::filesystem::path> output_root;
  std::optional<std::uint64_t> seed;
  std::optional<dataset::RisPipeline> pipeline;
  std::optional<int> jobs;
  std::optional<bool> save_iq;
};

// Precedence: explicit flag > RISSENSE_OUT_ROOT env var > config file.
void apply_overrides(RunConfig& cfg, const Overrides& ov);

}  // namespace rissense::config

#endif
