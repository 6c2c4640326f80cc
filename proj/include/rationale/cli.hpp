#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rationale/scoring.hpp"

namespace rationale::cli {

enum class Backend { Baseline, Sidecar };

struct RunPaths {
  std::filesystem::path input;
  std::filesystem::path graph;
  std::filesystem::path reports = ".";
};

/// Settings for one invocation. Resolved as flag > config file > default.
struct RunConfig {
  std::string project;
  RunPaths paths;
  std::string thresholds_preset = "oom";
  Thresholds thresholds = Thresholds::preset("oom");
  std::string classifier_id = "baseline";
  std::string extractor_id = "baseline";
  Backend backend = Backend::Baseline;
  std::optional<std::string> sidecar_url;
  std::size_t batch_size = 2000;
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;

  /// Throws UsageError naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Applies a JSON config document on top of `base`.
RunConfig apply_config_json(RunConfig base, const nlohmann::json& doc, const std::string& source_name);

/// Parses argv (without the program name), runs the subcommand and returns
/// the exit code: 0 success, 1 domain error, 2 usage error. Structured logs
/// go to `err`; usage and help text to `out`.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rationale::cli
