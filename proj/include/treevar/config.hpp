#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "treevar/forecast.hpp"
#include "treevar/gibbs.hpp"

namespace treevar {

// Exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  SamplerConfig sampler;
  std::string data_csv;
  std::vector<int> transforms;  // empty means no transformation (all code 1)
  EvalConfig eval;
  int forecast_horizons = 4;
  // Every effective key=value after defaults, for the manifest.
  std::map<std::string, std::string> resolved;
};

// Flat key = value file with '#' comments; unknown keys are rejected.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Rebuilds the configuration recorded in a manifest written by a previous
// run.
RunConfig config_from_manifest(const std::string& manifest_path);

std::uint64_t fnv1a_file(const std::string& path);

void write_manifest(const std::string& path, const std::string& command,
                    const std::map<std::string, std::string>& resolved,
                    const std::vector<std::string>& input_files,
                    const std::vector<std::string>& output_files, double wall_ms);

}  // namespace treevar
