#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "notemort/discovery.hpp"
#include "notemort/eval.hpp"
#include "notemort/experiment.hpp"
#include "notemort/ingest.hpp"
#include "notemort/synthgen.hpp"

namespace notemort {

struct RunConfig {
  std::filesystem::path input_dir;
  std::filesystem::path output_dir = "runs";
  CohortOptions cohort;
  std::size_t vocabulary_size = kDefaultVocabularySize;
  SplitRatios ratios;
  std::uint64_t seed = 1;
  ModelGrid grid;
  std::vector<ModelSpec> specs = default_model_specs();
  SignificanceThresholds thresholds;
  std::size_t top_keywords = 20;
  SynthConfig synth;
  /// The document as read, for hashing.
  nlohmann::json source = nlohmann::json::object();
};

/// Validates the document. Unknown keys and ill-typed values throw
/// ConfigError naming the offending key.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// 16 hex digits over the config minus its seed and output directory.
std::string config_hash(const RunConfig& config);
/// output_dir / "run-<hash>-s<seed>".
std::filesystem::path run_directory(const RunConfig& config);

/// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace notemort
